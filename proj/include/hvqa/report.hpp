#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hvqa/metrics.hpp"

namespace hvqa {

// One row of the protocol comparison, values in percent.
struct CompareRow {
    std::string protocol;
    double hca = 0.0;
    double leaf_acc = 0.0;
    double tor = 0.0;
    double por = 0.0;
    double s_por = 0.0;
    friend bool operator==(const CompareRow&, const CompareRow&) = default;
};

CompareRow compare_row(std::string protocol, const MetricReport& report, bool prefix_spor = false);

// protocol,hca,leaf_acc,tor,por,s_por,d_hca,d_leaf_acc,d_tor,d_por,d_s_por
// Deltas are against the joint row. Values print at full round-trip precision.
std::string compare_csv(const std::vector<CompareRow>& rows);
std::vector<CompareRow> parse_compare_csv(std::string_view text);
// Fixed-width table with deltas in parentheses, for terminals.
std::string compare_text(const std::vector<CompareRow>& rows);

struct MetricSummary {
    std::string metric;
    double mean = 0.0;
    double std = 0.0;  // population (divide by n)
    std::size_t n = 0;
};

std::vector<MetricSummary> summarize_reports(const std::vector<MetricReport>& reports);
// metric,mean,std,n
std::string summary_csv(const std::vector<MetricSummary>& summary);

}  // namespace hvqa
