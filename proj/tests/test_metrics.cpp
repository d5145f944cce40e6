#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "hvqa/common.hpp"
#include "hvqa/metrics.hpp"
#include "hvqa/report.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace hvqa;

namespace {

const Mask kWorked = {true, true, false, true, true, true};

std::vector<Mask> random_masks(std::mt19937_64& rng, std::size_t n, std::size_t min_len, std::size_t max_len) {
    std::vector<Mask> out(n);
    for (auto& m : out) {
        m.resize(min_len + rng() % (max_len - min_len + 1));
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng() % 3 != 0;
    }
    return out;
}

bool same(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || std::abs(*a - *b) <= 1e-12;
}

}  // namespace

TEST_CASE("worked mask") {
    const std::vector<Mask> one{kWorked};
    CHECK(compute_hca(one) == 0.0);
    CHECK(compute_leaf_acc(one) == 1.0);
    CHECK(compute_por(one) == 5.0 / 6.0);
    CHECK(compute_spor(one) == 0.5);
    CHECK(compute_spor_prefix(one) == 2.0 / 6.0);
    CHECK(compute_tor(one).value == 0.6);
}

TEST_CASE("trivial masks") {
    CHECK(compute_hca({{true, true, true}}) == 1.0);
    CHECK(compute_hca({{true, true, false, true}}) == 0.0);
    CHECK(compute_leaf_acc({{false, false, true}}) == 1.0);
    CHECK(compute_por({{false, false, false}}) == 0.0);
    CHECK(compute_spor({{true, true, true, true}}) == 1.0);
    CHECK(compute_spor({{false, false}}) == 0.0);
    CHECK(compute_tor({{true, true, true}}).value == 1.0);
}

TEST_CASE("TOR leaves out single-level paths and needs at least one pair") {
    const auto t = compute_tor({{true}, {true, false}, {true, true}});
    CHECK(t.value == 0.5);
    CHECK(t.n == 2);
    CHECK(t.excluded == 1);
    CHECK_THROWS_AS(compute_tor({{true}}), MetricError);
}

TEST_CASE("empty inputs are errors") {
    CHECK_THROWS_AS(compute_hca({}), MetricError);
    CHECK_THROWS_AS(compute_por({Mask{}}), MetricError);
}

TEST_CASE("conditional accuracy") {
    const std::vector<Mask> four{{true, true}, {true, false}, {false, true}, {false, false}};
    const auto c = compute_conditional(four, 1);
    CHECK(*c.given_correct == 0.5);
    CHECK(*c.given_error == 0.5);
    CHECK(*c.delta == 0.0);
    CHECK(c.n_correct == 2);
    CHECK(c.n_error == 2);
    const auto all_right = compute_conditional({{true, true}, {true, false}}, 1);
    CHECK_FALSE(all_right.given_error.has_value());
    CHECK_FALSE(all_right.delta.has_value());
    CHECK(*all_right.given_correct == 0.5);
    // Paths too short for level 2 do not take part.
    const auto short_paths = compute_conditional({{true}, {true, true}}, 1);
    CHECK(short_paths.n_correct == 1);
}

TEST_CASE("random masks agree with the brute-force oracles") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const auto masks = random_masks(rng, 1 + rng() % 50, 1, 12);
        CHECK(std::abs(compute_hca(masks) - oracle::hca(masks)) <= 1e-12);
        CHECK(std::abs(compute_leaf_acc(masks) - oracle::leaf_acc(masks)) <= 1e-12);
        CHECK(std::abs(compute_por(masks) - oracle::por(masks)) <= 1e-12);
        CHECK(std::abs(compute_spor(masks) - oracle::spor(masks)) <= 1e-12);
        CHECK(std::abs(compute_spor_prefix(masks) - oracle::spor_prefix(masks)) <= 1e-12);
        const auto tor = oracle::tor(masks);
        if (tor) {
            CHECK(std::abs(compute_tor(masks).value - *tor) <= 1e-12);
        } else {
            CHECK_THROWS_AS(compute_tor(masks), MetricError);
        }
        for (std::size_t l = 1; l < 12; ++l) {
            const auto got = compute_conditional(masks, l);
            const auto want = oracle::conditional(masks, l);
            CHECK(same(got.given_correct, want.given_correct));
            CHECK(same(got.given_error, want.given_error));
        }
    }
}

TEST_CASE("S-POR scan matches window enumeration on every short mask") {
    for (std::size_t len = 1; len <= 10; ++len) {
        for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
            Mask m(len);
            for (std::size_t i = 0; i < len; ++i) m[i] = (bits >> i) & 1u;
            REQUIRE(compute_spor({m}) == static_cast<double>(oracle::longest_window(m)) / static_cast<double>(len));
        }
    }
}

TEST_CASE("forgetting reproduces the published rows") {
    const auto llava = compute_forgetting(0.8454, 0.8411);
    CHECK(llava.delta_pp_2dp == -0.43);
    CHECK(llava.rel_forget_pct_2dp == 0.51);
    CHECK(llava.delta_pp == doctest::Approx(-0.43));
    const auto qwen = compute_forgetting(0.8634, 0.8625);
    CHECK(qwen.delta_pp_2dp == -0.09);
    CHECK(qwen.rel_forget_pct_2dp == 0.10);
    const auto same_acc = compute_forgetting(0.7, 0.7);
    CHECK(same_acc.delta_pp == 0.0);
    CHECK(same_acc.rel_forget_pct == 0.0);
    CHECK(same_acc.ratio == 1.0);
    CHECK_THROWS_AS(compute_forgetting(0.0, 0.5), MetricError);
    CHECK_THROWS_AS(compute_forgetting(0.5, 1.5), MetricError);
}

TEST_CASE("report and depth tables") {
    const std::vector<Mask> masks{kWorked, {true, true, true, true, true, true}};
    const auto rep = compute_report(masks);
    CHECK(rep.n_samples == 2);
    CHECK(rep.hca == 0.5);
    REQUIRE(rep.per_level.size() == 6);
    CHECK(rep.per_level[2].acc == 0.5);
    CHECK(*rep.per_level[1].next.given_correct == 0.5);
    const auto csv = report_csv(rep);
    CHECK(csv.rfind("metric,value,n,excluded\n", 0) == 0);
    CHECK(csv.find("hca,0.5,2,0\n") != std::string::npos);
    CHECK(depth_csv(rep).rfind("level,n,acc,acc_given_correct,acc_given_error,delta\n", 0) == 0);
    const auto j = nlohmann::json::parse(report_json(rep));
    CHECK(j["hca"] == 0.5);
}

TEST_CASE("singleton levels can be dropped from the depth table only") {
    PredictionRecord a;
    a.correct_mask = {true, true, false};
    a.level_indices = {1, 2, 3};
    a.singleton = {true, false, false};
    PredictionRecord b = a;
    b.correct_mask = {true, false, false};
    ReportOptions drop;
    drop.exclude_singleton_levels = true;
    const auto full = compute_report({a, b});
    const auto trimmed = compute_report({a, b}, drop);
    CHECK(full.per_level.size() == 3);
    CHECK(trimmed.per_level.size() == 2);
    CHECK(trimmed.per_level.front().level == 2);
    CHECK(trimmed.hca == full.hca);
    CHECK(trimmed.por == full.por);
}

TEST_CASE("comparison table") {
    const auto perfect = compute_report(std::vector<Mask>{{true, true}, {true, true}});
    std::vector<CompareRow> rows{compare_row("joint", perfect), compare_row("independent", perfect),
                                 compare_row("conditioned", perfect)};
    const auto csv = compare_csv(rows);
    CHECK(csv.find("independent,100,100,100,100,100,0,0,0,0,0\n") != std::string::npos);
    CHECK(parse_compare_csv(csv) == rows);
    CHECK(compare_text(rows).find("+0.00)") != std::string::npos);

    std::mt19937_64 rng(3);
    std::vector<CompareRow> odd;
    for (const char* p : {"joint", "independent", "conditioned"}) {
        odd.push_back(compare_row(p, compute_report(random_masks(rng, 37, 2, 7))));
    }
    CHECK(parse_compare_csv(compare_csv(odd)) == odd);
    CHECK_THROWS_AS(parse_compare_csv("nope\n"), ValidationError);
}

TEST_CASE("summaries use population standard deviation") {
    MetricReport a;
    a.hca = 0.2;
    MetricReport b;
    b.hca = 0.4;
    const auto s = summarize_reports({a, b});
    CHECK(s.front().metric == "hca");
    CHECK(s.front().mean == doctest::Approx(0.3));
    CHECK(s.front().std == doctest::Approx(0.1));
    const auto five = summarize_reports({a, a, a, a, a});
    CHECK(five.front().std == 0.0);
    CHECK(summary_csv(five).rfind("metric,mean,std,n\n", 0) == 0);
    CHECK_THROWS_AS(summarize_reports({}), ValidationError);
}
