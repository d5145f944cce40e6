#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hvqa/sekd/distill.hpp"

using namespace hvqa::sekd;

namespace {

struct Standard {
    SyntheticWorld world{standard_world_config(42)};
    Params base;
    Split split;
    DistillResult result;

    Standard() {
        base = pretrain_base(world, PretrainConfig{});
        split = make_split(world, 2000, 500, 42);
        result = distill(world, base, base, DistillConfig{}, split);
    }
};

const Standard& standard() {
    static const Standard s;
    return s;
}

}  // namespace

TEST_CASE("pretrained base: strong with gold parents, weak in joint mode") {
    const auto& s = standard();
    for (double acc : evaluate_level_acc(s.base, s.world, s.split.val, ChainMode::kGold)) CHECK(acc >= 0.9);
    const double cond = evaluate_hca(s.base, s.world, s.split.val, ChainMode::kConditioned);
    const double joint = evaluate_hca(s.base, s.world, s.split.val, ChainMode::kJoint);
    CHECK(cond >= 0.9);
    CHECK(cond - joint >= 0.10);
}

TEST_CASE("distilled student recovers most of the teacher's HCA") {
    const auto& s = standard();
    const double final_hca = s.result.curve.back().val_hca;
    CHECK(final_hca >= 0.8 * s.result.teacher_val_hca);
    CHECK(final_hca - s.result.base_val_hca >= 0.10);
}

TEST_CASE("student HCA rises monotonically, allowing one dip") {
    const auto& s = standard();
    int dips = 0;
    double prev = s.result.base_val_hca;
    for (const auto& pt : s.result.curve) {
        MESSAGE("epoch " << pt.epoch << " val_hca " << pt.val_hca);
        if (pt.val_hca < prev) ++dips;
        prev = pt.val_hca;
    }
    CHECK(dips <= 1);
}
