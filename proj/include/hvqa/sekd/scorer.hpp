#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvqa/sekd/world.hpp"

namespace hvqa::sekd {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Per-level weights: u = tanh(A [x; e] + a), h = tanh(C u + c), z = O h + o.
// h is the anchor feature; z holds one logit per child rank.
template <typename Scalar>
struct LevelWeights {
    Mat<Scalar> A;
    Vec<Scalar> a;
    Mat<Scalar> C;
    Vec<Scalar> c;
    Mat<Scalar> O;
    Vec<Scalar> o;
};

template <typename Scalar>
struct ScorerParams {
    std::vector<LevelWeights<Scalar>> levels;
    Mat<Scalar> embed;  // embed_dim x context rows, laid out as in SyntheticWorld

    int depth() const { return static_cast<int>(levels.size()); }
    int hidden_dim() const { return static_cast<int>(levels.front().C.rows()); }
    int embed_dim() const { return static_cast<int>(embed.rows()); }
    int feature_dim() const { return static_cast<int>(levels.front().A.cols()) - embed_dim(); }

    template <typename F>
    void for_each_tensor(F&& f) {
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const std::string p = "level" + std::to_string(l + 1) + ".";
            f(p + "A", levels[l].A);
            f(p + "a", levels[l].a);
            f(p + "C", levels[l].C);
            f(p + "c", levels[l].c);
            f(p + "O", levels[l].O);
            f(p + "o", levels[l].o);
        }
        f(std::string("embed"), embed);
    }
    template <typename F>
    void for_each_tensor(F&& f) const {
        const_cast<ScorerParams*>(this)->for_each_tensor([&](const std::string& name, const auto& t) { f(name, t); });
    }

    // Same shapes, all zeros; used for gradients and optimizer moments.
    ScorerParams zeros_like() const {
        ScorerParams z = *this;
        z.for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
        return z;
    }
};

// Projector for the anchor loss: one shared matrix, or one per level.
template <typename Scalar>
struct Projector {
    std::vector<Mat<Scalar>> W;

    const Mat<Scalar>& at(int level) const { return W.size() == 1 ? W.front() : W[static_cast<std::size_t>(level)]; }
    Mat<Scalar>& at(int level) { return W.size() == 1 ? W.front() : W[static_cast<std::size_t>(level)]; }

    static Projector identity(int hidden_dim, int copies = 1) {
        Projector p;
        p.W.assign(static_cast<std::size_t>(copies), Mat<Scalar>::Identity(hidden_dim, hidden_dim));
        return p;
    }

    template <typename F>
    void for_each_tensor(F&& f) {
        for (std::size_t i = 0; i < W.size(); ++i) f("W" + (W.size() == 1 ? std::string() : std::to_string(i + 1)), W[i]);
    }
};

// How the context embedding at levels >= 2 is chosen.
enum class ChainMode {
    kGold,         // gold parent label (pretraining)
    kConditioned,  // own previous label choice: the stepwise teacher
    kJoint,        // own previous letter only: the single-pass student
};

// Values of one level over a batch (one column per example).
template <typename Scalar>
struct LevelTrace {
    std::vector<int> ctx;   // context row per example
    Mat<Scalar> input;      // [x; e]
    Mat<Scalar> u;
    Mat<Scalar> h;
    Mat<Scalar> z;          // letter order: row j is the option shown as letter j
    std::vector<int> pick;  // chosen letter per example
};

template <typename Scalar>
struct ChainTrace {
    std::vector<LevelTrace<Scalar>> levels;
};

inline char option_letter(int j) { return static_cast<char>('A' + j); }

// Highest logit, ties to the lowest letter.
template <typename Derived>
int argmax_lowest(const Eigen::MatrixBase<Derived>& z) {
    int best = 0;
    for (int j = 1; j < z.size(); ++j) {
        if (z(j) > z(best)) best = j;
    }
    return best;
}

// One level over a batch with fixed context rows.
template <typename Scalar>
LevelTrace<Scalar> forward_level(const ScorerParams<Scalar>& params, int level, const std::vector<ToyExample>& batch,
                                 const std::vector<int>& ctx) {
    const auto& w = params.levels[static_cast<std::size_t>(level)];
    const int n = static_cast<int>(batch.size());
    const int d = params.feature_dim();
    const int E = params.embed_dim();
    LevelTrace<Scalar> t;
    t.ctx = ctx;
    t.input.resize(d + E, n);
    for (int i = 0; i < n; ++i) {
        t.input.col(i).head(d) = batch[static_cast<std::size_t>(i)].x.template cast<Scalar>();
        t.input.col(i).tail(E) = params.embed.col(ctx[static_cast<std::size_t>(i)]);
    }
    t.u = ((w.A * t.input).colwise() + w.a).array().tanh().matrix();
    t.h = ((w.C * t.u).colwise() + w.c).array().tanh().matrix();
    const Mat<Scalar> by_slot = (w.O * t.h).colwise() + w.o;
    t.z.resize(kOptions, n);
    t.pick.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& perm = batch[static_cast<std::size_t>(i)].slot_of_letter[static_cast<std::size_t>(level)];
        for (int j = 0; j < kOptions; ++j) t.z(j, i) = by_slot(perm[static_cast<std::size_t>(j)], i);
        t.pick[static_cast<std::size_t>(i)] = argmax_lowest(t.z.col(i));
    }
    for (Eigen::Index k = 0; k < t.z.size(); ++k) {
        if (!std::isfinite(static_cast<double>(t.z.data()[k]))) throw std::runtime_error("scorer: non-finite logits");
    }
    return t;
}

// Context row for `level` (0-based) given what happened at level-1.
inline int context_row(const SyntheticWorld& world, ChainMode mode, int level, const ToyExample& ex, int prev_pick) {
    if (level == 0) return world.unknown_row();
    switch (mode) {
        case ChainMode::kGold: return world.label_row(level, ex.slots[static_cast<std::size_t>(level - 1)]);
        case ChainMode::kConditioned:
            return world.label_row(level,
                                   ex.slot_of_letter[static_cast<std::size_t>(level - 1)][static_cast<std::size_t>(prev_pick)]);
        case ChainMode::kJoint: return world.letter_row(prev_pick);
    }
    return world.unknown_row();
}

// Runs levels 1..L in order; each level's context comes from the mode.
template <typename Scalar>
ChainTrace<Scalar> forward_chain(const ScorerParams<Scalar>& params, const SyntheticWorld& world,
                                 const std::vector<ToyExample>& batch, ChainMode mode) {
    ChainTrace<Scalar> trace;
    const std::size_t n = batch.size();
    std::vector<int> ctx(n);
    for (int l = 0; l < params.depth(); ++l) {
        for (std::size_t i = 0; i < n; ++i) {
            ctx[i] = context_row(world, mode, l, batch[i], l == 0 ? 0 : trace.levels.back().pick[i]);
        }
        trace.levels.push_back(forward_level(params, l, batch, ctx));
    }
    return trace;
}

// Same as forward_chain but reusing the context rows of an earlier trace, so
// the result is a smooth function of the parameters (finite-difference checks).
template <typename Scalar>
ChainTrace<Scalar> forward_fixed(const ScorerParams<Scalar>& params, const std::vector<ToyExample>& batch,
                                 const ChainTrace<Scalar>& contexts) {
    ChainTrace<Scalar> trace;
    for (int l = 0; l < params.depth(); ++l) {
        trace.levels.push_back(forward_level(params, l, batch, contexts.levels[static_cast<std::size_t>(l)].ctx));
    }
    return trace;
}

// Accumulates parameter gradients given dL/dz (letter order) and dL/dh per level.
template <typename Scalar>
void backward_chain(const ScorerParams<Scalar>& params, const std::vector<ToyExample>& batch,
                    const ChainTrace<Scalar>& trace, const std::vector<Mat<Scalar>>& dz,
                    const std::vector<Mat<Scalar>>& dh, ScorerParams<Scalar>& grad) {
    const int E = params.embed_dim();
    const int n = static_cast<int>(batch.size());
    for (int l = 0; l < params.depth(); ++l) {
        const auto L = static_cast<std::size_t>(l);
        const auto& w = params.levels[L];
        auto& g = grad.levels[L];
        const auto& t = trace.levels[L];
        Mat<Scalar> dslot(kOptions, n);
        for (int i = 0; i < n; ++i) {
            const auto& perm = batch[static_cast<std::size_t>(i)].slot_of_letter[L];
            for (int j = 0; j < kOptions; ++j) dslot(perm[static_cast<std::size_t>(j)], i) = dz[L](j, i);
        }
        g.O.noalias() += dslot * t.h.transpose();
        g.o += dslot.rowwise().sum();
        Mat<Scalar> dpre_h = w.O.transpose() * dslot + dh[L];
        dpre_h.array() *= (Scalar(1) - t.h.array().square());
        g.C.noalias() += dpre_h * t.u.transpose();
        g.c += dpre_h.rowwise().sum();
        Mat<Scalar> dpre_u = w.C.transpose() * dpre_h;
        dpre_u.array() *= (Scalar(1) - t.u.array().square());
        g.A.noalias() += dpre_u * t.input.transpose();
        g.a += dpre_u.rowwise().sum();
        const Mat<Scalar> dinput = w.A.transpose() * dpre_u;
        for (int i = 0; i < n; ++i) grad.embed.col(t.ctx[static_cast<std::size_t>(i)]) += dinput.col(i).tail(E);
    }
}

// Fraction of examples whose whole path (every level's pick) is right.
template <typename Scalar>
double chain_hca(const ChainTrace<Scalar>& trace, const std::vector<ToyExample>& batch) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        bool ok = true;
        for (std::size_t l = 0; l < trace.levels.size() && ok; ++l) {
            ok = batch[i].slot_of_letter[l][static_cast<std::size_t>(trace.levels[l].pick[i])] == batch[i].slots[l];
        }
        hits += ok ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(batch.size());
}

// Per-level correctness masks of a chain.
template <typename Scalar>
std::vector<std::vector<bool>> chain_masks(const ChainTrace<Scalar>& trace, const std::vector<ToyExample>& batch) {
    std::vector<std::vector<bool>> masks(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t l = 0; l < trace.levels.size(); ++l) {
            masks[i].push_back(batch[i].slot_of_letter[l][static_cast<std::size_t>(trace.levels[l].pick[i])] ==
                               batch[i].slots[l]);
        }
    }
    return masks;
}

}  // namespace hvqa::sekd
