#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hvqa/sekd/scorer.hpp"

namespace hvqa::sekd {

inline constexpr double kLogFloor = 1e-12;

struct LossWeights {
    double lambda_hard = 2.0;
    double lambda_soft = 1.0;
    double lambda_feat = 0.5;
    double kd_temperature = 1.0;

    void validate() const {
        if (lambda_hard < 0 || lambda_soft < 0 || lambda_feat < 0) throw std::invalid_argument("loss weights must be >= 0");
        if (lambda_hard == 0 && lambda_soft == 0 && lambda_feat == 0) {
            throw std::invalid_argument("loss weights are all zero");
        }
        if (!(kd_temperature > 0)) throw std::invalid_argument("kd_temperature must be > 0");
    }
};

struct LossParts {
    double hard = 0.0;
    double soft = 0.0;
    double feat = 0.0;
};

inline double loss_total(const LossParts& parts, const LossWeights& w) {
    return w.lambda_hard * parts.hard + w.lambda_soft * parts.soft + w.lambda_feat * parts.feat;
}

// Column-wise softmax of z / T with max subtraction.
template <typename Derived>
Mat<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& z, double temperature = 1.0) {
    using S = typename Derived::Scalar;
    Mat<S> p = z / S(temperature);
    for (Eigen::Index i = 0; i < p.cols(); ++i) {
        p.col(i).array() -= p.col(i).maxCoeff();
        p.col(i) = p.col(i).array().exp().matrix();
        p.col(i) /= p.col(i).sum();
    }
    return p;
}

template <typename S>
S floored_log(S p) {
    return std::log(std::max(p, S(kLogFloor)));
}

// KL(p || q) for one pair of distributions; terms with p = 0 contribute 0.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
    using S = typename DerivedP::Scalar;
    S kl = 0;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        if (p(j) > S(0)) kl += p(j) * (floored_log(p(j)) - floored_log(q(j)));
    }
    return kl;
}

/*
 * Losses over a batch of chains. Logit matrices are options x batch, one per
 * level, summed over levels and averaged over the batch. Each function
 * returns the loss and, when asked, adds its gradient into the given buffers.
 */

// sum_l -log p_S(y_l); d/dz = p - onehot.
template <typename S>
S loss_hard(const std::vector<Mat<S>>& z_student, const std::vector<std::vector<int>>& labels,
            std::vector<Mat<S>>* dz = nullptr, S scale = S(1)) {
    S total = 0;
    for (std::size_t l = 0; l < z_student.size(); ++l) {
        const Mat<S> p = softmax(z_student[l]);
        const Eigen::Index n = p.cols();
        for (Eigen::Index i = 0; i < n; ++i) {
            const int y = labels[l][static_cast<std::size_t>(i)];
            total -= floored_log(p(y, i)) / S(n);
            if (dz) {
                Vec<S> g = p.col(i);
                g(y) -= S(1);
                (*dz)[l].col(i) += scale * g / S(n);
            }
        }
    }
    return total;
}

// sum_l KL(p_T || p_S) with both sides at temperature T; d/dz_S = (p_S - p_T) / T.
template <typename S>
S loss_soft(const std::vector<Mat<S>>& z_teacher, const std::vector<Mat<S>>& z_student, double temperature,
            std::vector<Mat<S>>* dz = nullptr, S scale = S(1)) {
    S total = 0;
    for (std::size_t l = 0; l < z_student.size(); ++l) {
        const Mat<S> pt = softmax(z_teacher[l], temperature);
        const Mat<S> ps = softmax(z_student[l], temperature);
        const Eigen::Index n = ps.cols();
        for (Eigen::Index i = 0; i < n; ++i) total += kl_divergence(pt.col(i), ps.col(i)) / S(n);
        if (dz) (*dz)[l] += scale * (ps - pt) / (S(temperature) * S(n));
    }
    return total;
}

// sum_l ||W h_S - h_T||^2; d/dh_S = 2 W^T r, d/dW = 2 r h_S^T.
template <typename S>
S loss_feat(const std::vector<Mat<S>>& h_student, const std::vector<Mat<S>>& h_teacher, const Projector<S>& W,
            std::vector<Mat<S>>* dh = nullptr, Projector<S>* dW = nullptr, S scale = S(1)) {
    S total = 0;
    for (std::size_t l = 0; l < h_student.size(); ++l) {
        const int level = static_cast<int>(l);
        const Eigen::Index n = h_student[l].cols();
        const Mat<S> r = W.at(level) * h_student[l] - h_teacher[l];
        total += r.squaredNorm() / S(n);
        if (dh) (*dh)[l].noalias() += (scale * S(2) / S(n)) * W.at(level).transpose() * r;
        if (dW) dW->at(level).noalias() += (scale * S(2) / S(n)) * r * h_student[l].transpose();
    }
    return total;
}

}  // namespace hvqa::sekd
