#include "hvqa/sekd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <stdexcept>

#include "hvqa/common.hpp"

namespace hvqa::sekd {

namespace {

struct Span {
    double* data;
    Eigen::Index size;
};

template <typename T>
std::vector<Span> spans_of(T& tensors) {
    std::vector<Span> out;
    tensors.for_each_tensor([&](const std::string&, auto& t) { out.push_back({t.data(), t.size()}); });
    return out;
}

// Decoupled weight decay Adam over flat views of the trained tensors.
class AdamW {
  public:
    AdamW(std::vector<Span> params, double beta1, double beta2, double eps, double weight_decay)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {
        for (const auto& p : params_) {
            m_.emplace_back(Eigen::VectorXd::Zero(p.size));
            v_.emplace_back(Eigen::VectorXd::Zero(p.size));
        }
    }

    void step(const std::vector<Span>& grads, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            Eigen::Map<Eigen::ArrayXd> p(params_[k].data, params_[k].size);
            Eigen::Map<const Eigen::ArrayXd> g(grads[k].data, grads[k].size);
            auto m = m_[k].array();
            auto v = v_[k].array();
            p *= 1.0 - lr * wd_;
            m = beta1_ * m + (1.0 - beta1_) * g;
            v = beta2_ * v + (1.0 - beta2_) * g.square();
            p -= lr * (m / c1) / ((v / c2).sqrt() + eps_);
        }
    }

  private:
    std::vector<Span> params_;
    std::vector<Eigen::VectorXd> m_;
    std::vector<Eigen::VectorXd> v_;
    double beta1_;
    double beta2_;
    double eps_;
    double wd_;
    std::size_t t_ = 0;
};

void clip_global_norm(const std::vector<Span>& grads, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (const auto& g : grads) sq += Eigen::Map<const Eigen::ArrayXd>(g.data, g.size).square().sum();
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double scale = max_norm / (norm + 1e-6);
    for (const auto& g : grads) Eigen::Map<Eigen::ArrayXd>(g.data, g.size) *= scale;
}

void uniform_fill(Eigen::Ref<Eigen::MatrixXd> m, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
    }
}

std::vector<ToyExample> gather(const std::vector<ToyExample>& data, const std::vector<std::size_t>& idx) {
    std::vector<ToyExample> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(data[i]);
    return out;
}

BatchTargets gather(const BatchTargets& all, const std::vector<std::size_t>& idx) {
    BatchTargets out;
    for (std::size_t l = 0; l < all.z.size(); ++l) {
        Mat<double> z(all.z[l].rows(), static_cast<Eigen::Index>(idx.size()));
        Mat<double> h(all.h[l].rows(), static_cast<Eigen::Index>(idx.size()));
        std::vector<int> hard(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            z.col(static_cast<Eigen::Index>(k)) = all.z[l].col(static_cast<Eigen::Index>(idx[k]));
            h.col(static_cast<Eigen::Index>(k)) = all.h[l].col(static_cast<Eigen::Index>(idx[k]));
            hard[k] = all.hard[l][idx[k]];
        }
        out.z.push_back(std::move(z));
        out.h.push_back(std::move(h));
        out.hard.push_back(std::move(hard));
    }
    return out;
}

}  // namespace

Params init_scorer(const SyntheticWorld& world, const ScorerShape& shape, std::uint64_t seed) {
    if (shape.hidden_dim < 1) throw ConfigError("scorer: hidden_dim must be >= 1");
    std::mt19937_64 rng(seed);
    const int d = world.feature_dim();
    const int E = world.embed_dim();
    const int H = shape.hidden_dim;
    Params p;
    for (int l = 0; l < world.depth(); ++l) {
        LevelWeights<double> w;
        w.A.resize(H, d + E);
        w.a.resize(H);
        w.C.resize(H, H);
        w.c.resize(H);
        w.O.resize(kOptions, H);
        w.o.resize(kOptions);
        uniform_fill(w.A, 1.0 / std::sqrt(d + E), rng);
        uniform_fill(w.a, 1.0 / std::sqrt(d + E), rng);
        uniform_fill(w.C, 1.0 / std::sqrt(H), rng);
        uniform_fill(w.c, 1.0 / std::sqrt(H), rng);
        uniform_fill(w.O, 1.0 / std::sqrt(H), rng);
        uniform_fill(w.o, 1.0 / std::sqrt(H), rng);
        p.levels.push_back(std::move(w));
    }
    p.embed = Mat<double>::Zero(E, world.context_rows());
    p.embed.leftCols(world.label_rows()) = world.label_semantics();
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(E));
    for (int i = 0; i < E; ++i) p.embed(i, world.unknown_row()) = normal(rng);
    return p;
}

std::vector<DistillSignals> teacher_forward(const Params& params, const SyntheticWorld& world,
                                            const std::vector<ToyExample>& batch) {
    const auto trace = forward_chain(params, world, batch, ChainMode::kConditioned);
    std::vector<DistillSignals> out(batch.size());
    for (const auto& lt : trace.levels) {
        const Mat<double> p = softmax(lt.z);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            out[i].hard_label.push_back(option_letter(argmax_lowest(p.col(col))));
            out[i].soft_dist.emplace_back(p.col(col));
            out[i].logits.emplace_back(lt.z.col(col));
            out[i].anchor.emplace_back(lt.h.col(col));
        }
    }
    return out;
}

std::vector<StudentOutput> student_forward(const Params& params, const SyntheticWorld& world,
                                           const std::vector<ToyExample>& batch) {
    const auto trace = forward_chain(params, world, batch, ChainMode::kJoint);
    std::vector<StudentOutput> out(batch.size());
    for (const auto& lt : trace.levels) {
        const Mat<double> p = softmax(lt.z);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            out[i].letters.push_back(option_letter(lt.pick[i]));
            out[i].soft_dist.emplace_back(p.col(col));
            out[i].anchor.emplace_back(lt.h.col(col));
        }
    }
    return out;
}

double schedule_factor(const AdamWConfig& config, std::size_t step, std::size_t total) {
    if (!config.cosine) return 1.0;
    const std::size_t warm = std::max<std::size_t>(1, static_cast<std::size_t>(config.warmup_fraction * static_cast<double>(total)));
    if (step < warm) return static_cast<double>(step + 1) / static_cast<double>(warm);
    const double progress = static_cast<double>(step - warm) / static_cast<double>(std::max<std::size_t>(1, total - warm));
    return 0.5 * (1.0 + std::cos(M_PI * progress));
}

Params pretrain_base(const SyntheticWorld& world, const PretrainConfig& config) {
    if (config.steps == 0 || config.batch_size == 0) throw ConfigError("pretrain: steps and batch_size must be >= 1");
    Params params = init_scorer(world, config.shape, mix_seed(config.seed, 1));
    Params grad = params.zeros_like();
    AdamW opt(spans_of(params), 0.9, 0.999, 1e-8, config.weight_decay);
    const auto grad_spans = spans_of(grad);
    std::mt19937_64 rng(mix_seed(config.seed, 2));
    const double per_level = 1.0 / world.depth();

    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto batch = world.sample(config.batch_size, rng);
        const auto trace = forward_chain(params, world, batch, ChainMode::kGold);
        std::vector<Mat<double>> z;
        std::vector<std::vector<int>> gold;
        std::vector<Mat<double>> dz;
        std::vector<Mat<double>> dh;
        for (std::size_t l = 0; l < trace.levels.size(); ++l) {
            z.push_back(trace.levels[l].z);
            std::vector<int> y(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const auto& perm = batch[i].slot_of_letter[l];
                y[i] = static_cast<int>(std::find(perm.begin(), perm.end(), batch[i].slots[l]) - perm.begin());
            }
            gold.push_back(std::move(y));
            dz.push_back(Mat<double>::Zero(kOptions, static_cast<Eigen::Index>(batch.size())));
            dh.push_back(Mat<double>::Zero(params.hidden_dim(), static_cast<Eigen::Index>(batch.size())));
        }
        const double loss = loss_hard(z, gold, &dz, per_level) * per_level;
        if (!std::isfinite(loss)) throw std::runtime_error("pretrain: non-finite loss at step " + std::to_string(step));
        grad.for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
        backward_chain(params, batch, trace, dz, dh, grad);
        opt.step(grad_spans, config.lr);
    }
    return params;
}

BatchTargets teacher_targets(const ChainTrace<double>& trace) {
    BatchTargets t;
    for (const auto& lt : trace.levels) {
        t.z.push_back(lt.z);
        t.h.push_back(lt.h);
        t.hard.push_back(lt.pick);
    }
    return t;
}

LossParts distill_objective(const Params& student, const Projector<double>& W, const SyntheticWorld& world,
                            const std::vector<ToyExample>& batch, const BatchTargets& targets,
                            const LossWeights& weights, const ChainTrace<double>* contexts, Params* grad,
                            Projector<double>* grad_W) {
    const auto trace = contexts ? forward_fixed(student, batch, *contexts)
                                : forward_chain(student, world, batch, ChainMode::kJoint);
    const auto n = static_cast<Eigen::Index>(batch.size());
    std::vector<Mat<double>> z;
    std::vector<Mat<double>> h;
    std::vector<Mat<double>> dz;
    std::vector<Mat<double>> dh;
    for (const auto& lt : trace.levels) {
        z.push_back(lt.z);
        h.push_back(lt.h);
        dz.push_back(Mat<double>::Zero(kOptions, n));
        dh.push_back(Mat<double>::Zero(student.hidden_dim(), n));
    }
    const bool want = grad != nullptr;
    auto* dz_hard = want && weights.lambda_hard > 0.0 ? &dz : nullptr;
    auto* dz_soft = want && weights.lambda_soft > 0.0 ? &dz : nullptr;
    auto* dh_feat = want && weights.lambda_feat > 0.0 ? &dh : nullptr;
    LossParts parts;
    parts.hard = loss_hard(z, targets.hard, dz_hard, weights.lambda_hard);
    parts.soft = loss_soft(targets.z, z, weights.kd_temperature, dz_soft, weights.lambda_soft);
    parts.feat = loss_feat(h, targets.h, W, dh_feat, dh_feat ? grad_W : nullptr, weights.lambda_feat);
    if (want) backward_chain(student, batch, trace, dz, dh, *grad);
    return parts;
}

Split make_split(const SyntheticWorld& world, std::size_t train_size, std::size_t val_size, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0x5b1));
    Split s;
    s.train = world.sample(train_size, rng);
    s.val = world.sample(val_size, rng);
    return s;
}

DistillResult distill(const SyntheticWorld& world, const Params& teacher, const Params& student_init,
                      const DistillConfig& config) {
    return distill(world, teacher, student_init, config, make_split(world, config.train_size, config.val_size, config.seed));
}

DistillResult distill(const SyntheticWorld& world, const Params& teacher, const Params& student_init,
                      const DistillConfig& config, const Split& split) {
    config.weights.validate();
    if (config.batch_size == 0 || split.train.empty() || split.val.empty()) {
        throw ConfigError("distill: batch size and both splits must be non-empty");
    }
    DistillResult result;
    result.student = student_init;
    result.projector = Projector<double>::identity(student_init.hidden_dim(), config.per_level_projector ? world.depth() : 1);
    result.teacher_val_hca = evaluate_hca(teacher, world, split.val, ChainMode::kConditioned);
    result.base_val_hca = evaluate_hca(student_init, world, split.val, ChainMode::kJoint);

    // The teacher is frozen, so its signals are computed once.
    const BatchTargets all_targets = teacher_targets(forward_chain(teacher, world, split.train, ChainMode::kConditioned));

    Params& student = result.student;
    Projector<double>& W = result.projector;
    Params grad = student.zeros_like();
    Projector<double> grad_W = W;
    auto params = spans_of(student);
    auto wspans = spans_of(W);
    params.insert(params.end(), wspans.begin(), wspans.end());
    auto grads = spans_of(grad);
    auto gwspans = spans_of(grad_W);
    grads.insert(grads.end(), gwspans.begin(), gwspans.end());
    AdamW opt(params, config.optimizer.beta1, config.optimizer.beta2, config.optimizer.eps, config.optimizer.weight_decay);

    const std::size_t n = split.train.size();
    const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    const std::size_t total = steps_per_epoch * config.epochs;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(config.seed, 0xd15));
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        CurvePoint point;
        point.epoch = epoch;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + config.batch_size)));
            const auto batch = gather(split.train, idx);
            const auto targets = gather(all_targets, idx);
            grad.for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
            grad_W.for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
            const LossParts parts = distill_objective(student, W, world, batch, targets, config.weights, nullptr, &grad, &grad_W);
            const double total_loss = loss_total(parts, config.weights);
            if (!std::isfinite(total_loss)) {
                throw std::runtime_error("distill: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                         std::to_string(step) + " (hard " + format_double(parts.hard) + ", soft " +
                                         format_double(parts.soft) + ", feat " + format_double(parts.feat) + ")");
            }
            point.loss_hard += parts.hard;
            point.loss_soft += parts.soft;
            point.loss_feat += parts.feat;
            point.loss_total += total_loss;
            clip_global_norm(grads, config.optimizer.clip_norm);
            opt.step(grads, config.optimizer.lr * schedule_factor(config.optimizer, step, total));
            ++step;
        }
        const double k = static_cast<double>(steps_per_epoch);
        point.loss_hard /= k;
        point.loss_soft /= k;
        point.loss_feat /= k;
        point.loss_total /= k;
        const auto trace = forward_chain(student, world, split.val, ChainMode::kJoint);
        point.val_hca = chain_hca(trace, split.val);
        std::size_t leaf_hits = 0;
        for (const auto& m : chain_masks(trace, split.val)) leaf_hits += m.back() ? 1 : 0;
        point.val_leaf_acc = static_cast<double>(leaf_hits) / static_cast<double>(split.val.size());
        result.curve.push_back(point);
    }
    return result;
}

double evaluate_hca(const Params& params, const SyntheticWorld& world, const std::vector<ToyExample>& data,
                    ChainMode mode) {
    return chain_hca(forward_chain(params, world, data, mode), data);
}

std::vector<double> evaluate_level_acc(const Params& params, const SyntheticWorld& world,
                                       const std::vector<ToyExample>& data, ChainMode mode) {
    const auto masks = chain_masks(forward_chain(params, world, data, mode), data);
    std::vector<double> acc(static_cast<std::size_t>(params.depth()), 0.0);
    for (const auto& m : masks) {
        for (std::size_t l = 0; l < m.size(); ++l) acc[l] += m[l] ? 1.0 : 0.0;
    }
    for (auto& a : acc) a /= static_cast<double>(data.size());
    return acc;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::string out = "epoch,loss_hard,loss_soft,loss_feat,loss_total,val_hca,val_leaf_acc\n";
    for (const auto& p : curve) {
        out += std::to_string(p.epoch) + "," + format_double(p.loss_hard) + "," + format_double(p.loss_soft) + "," +
               format_double(p.loss_feat) + "," + format_double(p.loss_total) + "," + format_double(p.val_hca) + "," +
               format_double(p.val_leaf_acc) + "\n";
    }
    return out;
}

bool bit_identical(const Params& a, const Params& b) {
    std::vector<std::pair<const double*, Eigen::Index>> ta;
    std::vector<std::pair<const double*, Eigen::Index>> tb;
    a.for_each_tensor([&](const std::string&, const auto& t) { ta.emplace_back(t.data(), t.size()); });
    b.for_each_tensor([&](const std::string&, const auto& t) { tb.emplace_back(t.data(), t.size()); });
    if (ta.size() != tb.size()) return false;
    for (std::size_t k = 0; k < ta.size(); ++k) {
        if (ta[k].second != tb[k].second) return false;
        if (std::memcmp(ta[k].first, tb[k].first, static_cast<std::size_t>(ta[k].second) * sizeof(double)) != 0) return false;
    }
    return true;
}

}  // namespace hvqa::sekd
