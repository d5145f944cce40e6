#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hvqa/harness.hpp"

namespace hvqa {

// One entry per asked level, root first.
using Mask = std::vector<bool>;

class MetricError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

double compute_hca(const std::vector<Mask>& masks);
double compute_leaf_acc(const std::vector<Mask>& masks);
double compute_por(const std::vector<Mask>& masks);
// Longest contiguous correct block anywhere on the path.
double compute_spor(const std::vector<Mask>& masks);
// Longest correct prefix starting at the root.
double compute_spor_prefix(const std::vector<Mask>& masks);

struct TorResult {
    double value = 0.0;
    std::size_t n = 0;
    std::size_t excluded = 0;  // paths with fewer than two levels
};
TorResult compute_tor(const std::vector<Mask>& masks);

// Accuracy at level+1 over paths whose level (1-based) was right / wrong.
// Only paths with at least level+1 levels take part. An empty branch is nullopt.
struct ConditionalAccuracy {
    std::optional<double> given_correct;
    std::optional<double> given_error;
    std::optional<double> delta;
    std::size_t n_correct = 0;
    std::size_t n_error = 0;
};
ConditionalAccuracy compute_conditional(const std::vector<Mask>& masks, std::size_t level);

struct ForgettingReport {
    double acc_base = 0.0;
    double acc_after = 0.0;
    double delta_pp = 0.0;        // 100 * (after - base)
    double rel_forget_pct = 0.0;  // 100 * (base - after) / base
    double ratio = 0.0;           // after / base
    // Same two quantities rounded to two decimals, as forgetting tables print them.
    double delta_pp_2dp = 0.0;
    double rel_forget_pct_2dp = 0.0;
};
// Accuracies in [0,1]; acc_base must be positive.
ForgettingReport compute_forgetting(double acc_base, double acc_after);

struct LevelRow {
    std::size_t level = 0;  // position along the path, 1-based
    std::size_t n = 0;
    double acc = 0.0;
    ConditionalAccuracy next;  // level+1 conditioned on this level
};

struct MetricReport {
    double hca = 0.0;
    double leaf_acc = 0.0;
    double por = 0.0;
    double s_por = 0.0;
    double s_por_prefix = 0.0;
    double tor = 0.0;
    std::size_t n_samples = 0;
    std::map<std::string, std::size_t> excluded_counts;
    std::vector<LevelRow> per_level;
};

struct ReportOptions {
    // Drop levels that offered a single option from the depth-wise table.
    bool exclude_singleton_levels = false;
};

std::vector<Mask> masks_of(const std::vector<PredictionRecord>& records);
MetricReport compute_report(const std::vector<PredictionRecord>& records, const ReportOptions& options = {});
MetricReport compute_report(const std::vector<Mask>& masks);

// metric,value,n,excluded
std::string report_csv(const MetricReport& report);
// level,n,acc,acc_given_correct,acc_given_error,delta
std::string depth_csv(const MetricReport& report);
std::string report_json(const MetricReport& report);

}  // namespace hvqa
