#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hvqa/sekd/losses.hpp"
#include "hvqa/sekd/scorer.hpp"
#include "hvqa/sekd/world.hpp"

namespace hvqa::sekd {

using Params = ScorerParams<double>;

struct ScorerShape {
    int hidden_dim = 32;
};

// Layer weights and biases uniform in +-1/sqrt(fan_in); label rows copied
// from the world's label semantics; UNKNOWN random; letter rows zero.
Params init_scorer(const SyntheticWorld& world, const ScorerShape& shape, std::uint64_t seed);

// Teacher outputs for one example, per level, in letter order.
struct DistillSignals {
    std::vector<char> hard_label;           // argmax of soft_dist, ties to the lowest letter
    std::vector<Eigen::VectorXd> soft_dist;  // at temperature 1
    std::vector<Eigen::VectorXd> logits;
    std::vector<Eigen::VectorXd> anchor;     // h at the decision
};

// Stepwise teacher: the context at level l is the embedding of the label it
// chose itself at level l-1 (UNKNOWN at level 1).
std::vector<DistillSignals> teacher_forward(const Params& params, const SyntheticWorld& world,
                                            const std::vector<ToyExample>& batch);

// Single-pass student: the context at level l is the embedding of the letter
// it emitted at level l-1. Nothing else crosses levels.
struct StudentOutput {
    std::vector<char> letters;
    std::vector<Eigen::VectorXd> soft_dist;
    std::vector<Eigen::VectorXd> anchor;
};
std::vector<StudentOutput> student_forward(const Params& params, const SyntheticWorld& world,
                                           const std::vector<ToyExample>& batch);

struct AdamWConfig {
    double lr = 2e-3;  // 2e-5 x 100 for a scorer this small
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double warmup_fraction = 0.03;
    double clip_norm = 1.0;  // <= 0 disables clipping
    bool cosine = true;
};

// Learning-rate multiplier at `step` of `total`: linear warmup then cosine.
double schedule_factor(const AdamWConfig& config, std::size_t step, std::size_t total);

struct PretrainConfig {
    std::size_t steps = 6000;
    std::size_t batch_size = 64;
    double lr = 3e-3;
    double weight_decay = 0.01;
    std::uint64_t seed = 42;
    ScorerShape shape;
};

// Trains every level with the gold parent label as context. The result is
// good when conditioned on its own labels and weak when it only sees its
// own letters; it serves as both Base and Teacher.
Params pretrain_base(const SyntheticWorld& world, const PretrainConfig& config);

struct DistillConfig {
    LossWeights weights;
    AdamWConfig optimizer;
    std::size_t epochs = 20;
    std::size_t batch_size = 8;
    std::size_t train_size = 2000;
    std::size_t val_size = 500;
    bool per_level_projector = false;
    std::uint64_t seed = 42;
};

struct CurvePoint {
    std::size_t epoch = 0;
    double loss_hard = 0.0;
    double loss_soft = 0.0;
    double loss_feat = 0.0;
    double loss_total = 0.0;
    double val_hca = 0.0;
    double val_leaf_acc = 0.0;
};

struct DistillResult {
    Params student;
    Projector<double> projector;
    std::vector<CurvePoint> curve;
    double teacher_val_hca = 0.0;  // conditioned
    double base_val_hca = 0.0;     // joint, before training
};

// Teacher targets for a batch, per level: logits (options x batch), hard
// letters and anchors (hidden x batch).
struct BatchTargets {
    std::vector<Mat<double>> z;
    std::vector<std::vector<int>> hard;
    std::vector<Mat<double>> h;
};
BatchTargets teacher_targets(const ChainTrace<double>& teacher_trace);

// The distillation objective on one batch, student run in joint mode. With
// `contexts` set, the student reuses those context rows instead of its own
// picks. Gradients are added into grad / grad_W when given.
LossParts distill_objective(const Params& student, const Projector<double>& W, const SyntheticWorld& world,
                            const std::vector<ToyExample>& batch, const BatchTargets& targets,
                            const LossWeights& weights, const ChainTrace<double>* contexts = nullptr,
                            Params* grad = nullptr, Projector<double>* grad_W = nullptr);

// Train/val examples for a run seed.
struct Split {
    std::vector<ToyExample> train;
    std::vector<ToyExample> val;
};
Split make_split(const SyntheticWorld& world, std::size_t train_size, std::size_t val_size, std::uint64_t seed);

// Distils `teacher` (frozen, stepwise) into a copy of `student_init` run in
// joint mode. Throws on a non-finite loss.
DistillResult distill(const SyntheticWorld& world, const Params& teacher, const Params& student_init,
                      const DistillConfig& config);
DistillResult distill(const SyntheticWorld& world, const Params& teacher, const Params& student_init,
                      const DistillConfig& config, const Split& split);

double evaluate_hca(const Params& params, const SyntheticWorld& world, const std::vector<ToyExample>& data,
                    ChainMode mode);
std::vector<double> evaluate_level_acc(const Params& params, const SyntheticWorld& world,
                                       const std::vector<ToyExample>& data, ChainMode mode);

std::string curve_csv(const std::vector<CurvePoint>& curve);

bool bit_identical(const Params& a, const Params& b);

}  // namespace hvqa::sekd
