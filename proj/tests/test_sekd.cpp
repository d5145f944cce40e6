#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "hvqa/common.hpp"
#include "hvqa/sekd/experiment.hpp"
#include "hvqa/sekd/param_io.hpp"

using namespace hvqa;
using namespace hvqa::sekd;

namespace {

WorldConfig small_world(int depth, std::uint64_t seed = 7) {
    WorldConfig c;
    c.depth = depth;
    c.feature_dim = 6;
    c.embed_dim = 5;
    c.seed = seed;
    return c;
}

ScorerShape small_shape() {
    ScorerShape s;
    s.hidden_dim = 8;
    return s;
}

Vec<double> vec(std::initializer_list<double> v) {
    Vec<double> out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Plain-loop forward pass for one example, written from the layer equations.
struct Unrolled {
    std::vector<int> letters;
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> h;
};

Unrolled unrolled_forward(const Params& p, const SyntheticWorld& world, const ToyExample& ex, ChainMode mode) {
    Unrolled out;
    int prev = -1;
    for (int l = 0; l < p.depth(); ++l) {
        const auto& w = p.levels[static_cast<std::size_t>(l)];
        int row = world.unknown_row();
        if (l > 0 && mode == ChainMode::kConditioned) {
            row = world.label_row(l, ex.slot_of_letter[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(prev)]);
        } else if (l > 0 && mode == ChainMode::kJoint) {
            row = world.letter_row(prev);
        }
        std::vector<double> in;
        for (Eigen::Index i = 0; i < ex.x.size(); ++i) in.push_back(ex.x(i));
        for (Eigen::Index i = 0; i < p.embed.rows(); ++i) in.push_back(p.embed(i, row));
        std::vector<double> u(static_cast<std::size_t>(w.A.rows()));
        for (Eigen::Index r = 0; r < w.A.rows(); ++r) {
            double s = w.a(r);
            for (Eigen::Index c = 0; c < w.A.cols(); ++c) s += w.A(r, c) * in[static_cast<std::size_t>(c)];
            u[static_cast<std::size_t>(r)] = std::tanh(s);
        }
        std::vector<double> h(static_cast<std::size_t>(w.C.rows()));
        for (Eigen::Index r = 0; r < w.C.rows(); ++r) {
            double s = w.c(r);
            for (Eigen::Index c = 0; c < w.C.cols(); ++c) s += w.C(r, c) * u[static_cast<std::size_t>(c)];
            h[static_cast<std::size_t>(r)] = std::tanh(s);
        }
        std::vector<double> z(kOptions);
        int best = 0;
        for (int j = 0; j < kOptions; ++j) {
            const int slot = ex.slot_of_letter[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
            double s = w.o(slot);
            for (Eigen::Index c = 0; c < w.O.cols(); ++c) s += w.O(slot, c) * h[static_cast<std::size_t>(c)];
            z[static_cast<std::size_t>(j)] = s;
            if (s > z[static_cast<std::size_t>(best)]) best = j;
        }
        out.letters.push_back(best);
        out.z.push_back(z);
        out.h.push_back(h);
        prev = best;
    }
    return out;
}

}  // namespace

TEST_CASE("world layout and sampling") {
    const SyntheticWorld world(standard_world_config(42));
    CHECK(world.depth() == 6);
    CHECK(world.tree().size() == 5461);
    CHECK(world.leaf_means().cols() == 4096);
    CHECK(world.leaf_means().rows() == 16);
    CHECK(world.label_rows() == 25);
    CHECK(world.unknown_row() == 25);
    CHECK(world.letter_row(3) == 29);
    CHECK(world.context_rows() == 30);
    std::mt19937_64 a(1), b(1);
    const auto xs = world.sample(20, a);
    const auto ys = world.sample(20, b);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK(xs[i].x == ys[i].x);
        CHECK(xs[i].slots.size() == 6);
        for (const auto& perm : xs[i].slot_of_letter) {
            std::array<int, kOptions> sorted = perm;
            std::sort(sorted.begin(), sorted.end());
            CHECK(sorted == std::array<int, kOptions>{0, 1, 2, 3});
        }
    }
    CHECK(SyntheticWorld::leaf_column({0, 0, 0, 0, 0, 1}) == 1);
    CHECK(SyntheticWorld::leaf_column({1, 0, 0, 0, 0, 0}) == 1024);
}

TEST_CASE("softmax and KL basics") {
    const Mat<double> z = Mat<double>::Zero(4, 1);
    const auto p = softmax(z);
    for (int j = 0; j < 4; ++j) CHECK(p(j, 0) == doctest::Approx(0.25));
    CHECK(kl_divergence(p.col(0), p.col(0)) == 0.0);
    // KL([.5,.5,0,0] || [.25,.75,0,0]) over the two supported entries.
    const double kl = kl_divergence(vec({0.5, 0.5, 0, 0}), vec({0.25, 0.75, 0, 0}));
    CHECK(kl == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(0.5 / 0.75)).epsilon(1e-12));
    CHECK(kl == doctest::Approx(0.1438).epsilon(1e-3));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int t = 0; t < 100; ++t) {
        Vec<double> a(4), b(4);
        for (int j = 0; j < 4; ++j) {
            a(j) = u(rng);
            b(j) = u(rng);
        }
        a /= a.sum();
        b /= b.sum();
        CHECK(kl_divergence(a, b) >= 0.0);
    }
}

TEST_CASE("loss values") {
    const std::vector<Mat<double>> uniform{Mat<double>::Zero(4, 1)};
    CHECK(loss_hard(uniform, {{2}}) == doctest::Approx(std::log(4.0)));
    Mat<double> confident = Mat<double>::Constant(4, 1, -100.0);
    confident(1, 0) = 100.0;
    CHECK(loss_hard(std::vector<Mat<double>>{confident}, {{1}}) == doctest::Approx(0.0));
    CHECK(loss_soft(uniform, uniform, 1.0) == 0.0);
    CHECK(loss_soft(std::vector<Mat<double>>{confident}, std::vector<Mat<double>>{confident}, 2.0) == 0.0);
    Projector<double> W;
    W.W.push_back(Mat<double>::Constant(1, 1, 2.0));
    CHECK(loss_feat(std::vector<Mat<double>>{Mat<double>::Constant(1, 1, 3.0)},
                    std::vector<Mat<double>>{Mat<double>::Constant(1, 1, 5.0)}, W) == 1.0);
    const auto I = Projector<double>::identity(3);
    const std::vector<Mat<double>> h{Mat<double>::Random(3, 2)};
    CHECK(loss_feat(h, h, I) == 0.0);
}

TEST_CASE("loss weights") {
    const LossWeights w;
    CHECK(w.lambda_hard == 2.0);
    CHECK(w.lambda_soft == 1.0);
    CHECK(w.lambda_feat == 0.5);
    CHECK(loss_total({1.0, 0.5, 0.2}, w) == doctest::Approx(2.6));
    CHECK(loss_total({1.3, 0.5, 0.2}, {1, 0, 0, 1}) == 1.3);
    CHECK_THROWS_AS((LossWeights{0, 0, 0, 1}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((LossWeights{1, 0, 0, 0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((LossWeights{-1, 1, 0, 1}.validate()), std::invalid_argument);
}

TEST_CASE("logit-level gradients match finite differences") {
    for (double T : {1.0, 2.0}) {
        for (std::uint64_t s = 0; s < 10; ++s) {
            const auto worst = gradcheck::check_logit_losses(s, T);
            INFO("T=" << T << " seed=" << s << " worst at " << worst.where);
            CHECK(worst.error < 1e-6);
        }
    }
}

TEST_CASE("objective gradients match finite differences through both layers") {
    for (double T : {1.0, 2.0}) {
        for (bool per_level : {false, true}) {
            for (std::uint64_t s = 1; s <= 4; ++s) {
                auto problem = gradcheck::make_problem(s, T, per_level);
                const auto worst = gradcheck::check_objective(problem, 0, s);
                INFO("T=" << T << " per_level=" << per_level << " seed=" << s << " worst at " << worst.where);
                CHECK(worst.error < 1e-5);
            }
        }
    }
}

TEST_CASE("forward passes agree with a hand-unrolled oracle") {
    const SyntheticWorld world(small_world(3));
    const Params p = init_scorer(world, small_shape(), 3);
    std::mt19937_64 rng(8);
    const auto batch = world.sample(10, rng);
    const auto teacher = teacher_forward(p, world, batch);
    const auto student = student_forward(p, world, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto t = unrolled_forward(p, world, batch[i], ChainMode::kConditioned);
        const auto s = unrolled_forward(p, world, batch[i], ChainMode::kJoint);
        for (std::size_t l = 0; l < 3; ++l) {
            CHECK(teacher[i].hard_label[l] == option_letter(t.letters[l]));
            CHECK(student[i].letters[l] == option_letter(s.letters[l]));
            for (int j = 0; j < kOptions; ++j) {
                CHECK(teacher[i].logits[l](j) == doctest::Approx(t.z[l][static_cast<std::size_t>(j)]).epsilon(1e-12));
            }
            for (std::size_t k = 0; k < t.h[l].size(); ++k) {
                CHECK(teacher[i].anchor[l](static_cast<Eigen::Index>(k)) == doctest::Approx(t.h[l][k]).epsilon(1e-12));
                CHECK(student[i].anchor[l](static_cast<Eigen::Index>(k)) == doctest::Approx(s.h[l][k]).epsilon(1e-12));
            }
        }
        // Level 1 is the same computation in both modes.
        CHECK(teacher[i].soft_dist[0] == student[i].soft_dist[0]);
        CHECK(teacher[i].anchor[0] == student[i].anchor[0]);
    }
}

TEST_CASE("teacher signals are consistent") {
    const SyntheticWorld world(small_world(3));
    Params p = init_scorer(world, small_shape(), 5);
    std::mt19937_64 rng(9);
    const auto batch = world.sample(30, rng);
    for (const auto& sig : teacher_forward(p, world, batch)) {
        for (std::size_t l = 0; l < sig.soft_dist.size(); ++l) {
            CHECK(std::abs(sig.soft_dist[l].sum() - 1.0) < 1e-9);
            Eigen::Index best = 0;
            sig.soft_dist[l].maxCoeff(&best);
            CHECK(sig.hard_label[l] == option_letter(static_cast<int>(best)));
        }
    }
    // Scaling one level's logits keeps the hard labels.
    Params scaled = p;
    scaled.levels[1].O *= 3.0;
    scaled.levels[1].o *= 3.0;
    const auto a = teacher_forward(p, world, batch);
    const auto b = teacher_forward(scaled, world, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(a[i].hard_label[1] == b[i].hard_label[1]);
        CHECK(a[i].hard_label[0] == b[i].hard_label[0]);
    }
    // Uniform logits tie; the lowest letter wins.
    for (auto& lw : p.levels) {
        lw.O.setZero();
        lw.o.setZero();
    }
    for (const auto& sig : teacher_forward(p, world, batch)) {
        for (std::size_t l = 0; l < sig.soft_dist.size(); ++l) {
            CHECK(sig.hard_label[l] == 'A');
            for (int j = 0; j < kOptions; ++j) CHECK(sig.soft_dist[l](j) == doctest::Approx(0.25));
        }
    }
}

TEST_CASE("gold-favouring weights reproduce the gold path") {
    // Each level reads the slot straight from one-hot feature coordinates.
    WorldConfig wc = small_world(2);
    const SyntheticWorld world(wc);
    Params p = init_scorer(world, small_shape(), 1);
    std::mt19937_64 rng(3);
    auto batch = world.sample(40, rng);
    for (auto& ex : batch) {
        ex.x.setZero();
        for (std::size_t l = 0; l < 2; ++l) ex.x(static_cast<Eigen::Index>(l * 3)) = ex.slots[l];
    }
    for (int l = 0; l < 2; ++l) {
        auto& w = p.levels[static_cast<std::size_t>(l)];
        w.A.setZero();
        w.a.setZero();
        w.C.setZero();
        w.c.setZero();
        w.A(0, l * 3) = 0.1;  // u0 = tanh(0.1 slot)
        w.C(0, 0) = 1.0;      // h0 = tanh(u0), increasing in the slot
        w.O.setZero();
        w.o.setZero();
        // Logit of slot s: -(h0 - t_s)^2 expanded, t_s the anchor of slot s.
        for (int s = 0; s < kOptions; ++s) {
            const double t = std::tanh(std::tanh(0.1 * s));
            w.O(s, 0) = 2 * t * 1000;
            w.o(s) = -t * t * 1000;
        }
    }
    const auto teacher = teacher_forward(p, world, batch);
    const auto student = student_forward(p, world, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t l = 0; l < 2; ++l) {
            const int gold_letter = static_cast<int>(std::find(batch[i].slot_of_letter[l].begin(), batch[i].slot_of_letter[l].end(),
                                                               batch[i].slots[l]) -
                                                     batch[i].slot_of_letter[l].begin());
            CHECK(teacher[i].hard_label[l] == option_letter(gold_letter));
            CHECK(student[i].letters[l] == option_letter(gold_letter));
        }
    }
}

TEST_CASE("schedule warms up then decays") {
    AdamWConfig c;
    CHECK(schedule_factor(c, 0, 1000) == doctest::Approx(1.0 / 30));
    CHECK(schedule_factor(c, 29, 1000) == doctest::Approx(1.0));
    CHECK(schedule_factor(c, 999, 1000) < 0.01);
    c.cosine = false;
    CHECK(schedule_factor(c, 500, 1000) == 1.0);
}

TEST_CASE("feature-only distillation from an identical teacher is a fixed point") {
    // With one asked level both modes see the same context, so student and
    // teacher anchors coincide and the feature loss has nothing to pull.
    const SyntheticWorld world(small_world(1));
    const Params teacher = init_scorer(world, small_shape(), 11);
    DistillConfig cfg;
    cfg.weights = {0, 0, 1, 1};
    cfg.epochs = 3;
    cfg.train_size = 200;
    cfg.val_size = 50;
    cfg.optimizer.weight_decay = 0.0;
    const auto exact = distill(world, teacher, teacher, cfg);
    for (const auto& pt : exact.curve) CHECK(pt.loss_feat == 0.0);
    CHECK(bit_identical(exact.student, teacher));

    // Decay shrinks the student away from the teacher; the feature loss keeps the drift small.
    cfg.optimizer.weight_decay = 0.01;
    const auto decayed = distill(world, teacher, teacher, cfg);
    for (const auto& pt : decayed.curve) CHECK(pt.loss_feat < 1e-3);
}

TEST_CASE("distill keeps the teacher frozen and is deterministic") {
    const SyntheticWorld world(small_world(3));
    PretrainConfig pc;
    pc.steps = 300;
    pc.batch_size = 32;
    pc.shape = small_shape();
    const Params base = pretrain_base(world, pc);
    const Params before = base;
    DistillConfig cfg;
    cfg.epochs = 2;
    cfg.train_size = 200;
    cfg.val_size = 100;
    const auto a = distill(world, base, base, cfg);
    const auto b = distill(world, base, base, cfg);
    CHECK(bit_identical(base, before));
    CHECK(bit_identical(a.student, b.student));
    CHECK(curve_csv(a.curve) == curve_csv(b.curve));
    CHECK(a.curve.size() == 2);
    CHECK(curve_csv(a.curve).rfind("epoch,loss_hard,loss_soft,loss_feat,loss_total,val_hca,val_leaf_acc\n", 0) == 0);
    cfg.seed = 43;
    CHECK(curve_csv(distill(world, base, base, cfg).curve) != curve_csv(a.curve));
    CHECK(bit_identical(pretrain_base(world, pc), base));
    cfg.weights = {0, 0, 0, 1};
    CHECK_THROWS(distill(world, base, base, cfg));
}

TEST_CASE("parameter files round-trip") {
    const SyntheticWorld world(small_world(2));
    const Params p = init_scorer(world, small_shape(), 2);
    const auto W = Projector<double>::identity(8, 2);
    const std::string bytes = serialize_params(p, W, R"({"k":1})");
    CHECK(bytes.substr(0, 8) == "HVQAPRM1");
    const auto back = deserialize_params(bytes);
    CHECK(bit_identical(back.params, p));
    REQUIRE(back.projector.W.size() == 2);
    CHECK(back.projector.W[1] == W.W[1]);
    CHECK(back.metadata_json == R"({"k":1})");
    CHECK(serialize_params(back.params, back.projector, back.metadata_json) == bytes);
    CHECK_THROWS_AS(deserialize_params(bytes.substr(0, bytes.size() - 3)), ValidationError);
    CHECK_THROWS_AS(deserialize_params("XXXXXXXX" + bytes.substr(8)), ValidationError);
}

TEST_CASE("experiment config") {
    const ExperimentConfig defaults;
    CHECK(defaults.seeds == std::vector<std::uint64_t>{42, 21, 87, 13, 100});
    CHECK(defaults.distill.optimizer.lr == doctest::Approx(2e-5 * 100));
    const auto round = experiment_from_json(experiment_to_json(defaults));
    CHECK(experiment_to_json(round) == experiment_to_json(defaults));
    const auto custom = experiment_from_json(nlohmann::json::parse(R"({"weights":{"lambda_soft":0,"kd_temperature":2},"distill":{"epochs":3}})"));
    CHECK(custom.distill.weights.lambda_soft == 0.0);
    CHECK(custom.distill.weights.kd_temperature == 2.0);
    CHECK(custom.distill.epochs == 3);
    CHECK_THROWS_AS(experiment_from_json(nlohmann::json::parse(R"({"weights":{"lambda_hard":0,"lambda_soft":0,"lambda_feat":0}})")),
                    ConfigError);
    CHECK_THROWS_AS(experiment_from_json(nlohmann::json::parse(R"({"distill":{"epochs":"many"}})")), ConfigError);
    CHECK_THROWS_AS(experiment_from_json(nlohmann::json::parse(R"({"seeds":[]})")), ConfigError);
}
