#include "hvqa/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hvqa/common.hpp"
#include "json.hpp"

namespace hvqa {

using json = nlohmann::json;

namespace {

void require_samples(const std::vector<Mask>& masks, const char* what) {
    if (masks.empty()) throw MetricError(std::string(what) + ": no samples");
    for (const auto& m : masks) {
        if (m.empty()) throw MetricError(std::string(what) + ": sample with zero levels");
    }
}

template <typename PerSample>
double mean_over(const std::vector<Mask>& masks, const char* what, PerSample f) {
    require_samples(masks, what);
    double sum = 0.0;
    for (const auto& m : masks) sum += f(m);
    return sum / static_cast<double>(masks.size());
}

double longest_run(const Mask& m) {
    std::size_t best = 0;
    std::size_t run = 0;
    for (bool c : m) {
        run = c ? run + 1 : 0;
        best = std::max(best, run);
    }
    return static_cast<double>(best);
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

}  // namespace

double compute_hca(const std::vector<Mask>& masks) {
    return mean_over(masks, "hca", [](const Mask& m) {
        return std::all_of(m.begin(), m.end(), [](bool c) { return c; }) ? 1.0 : 0.0;
    });
}

double compute_leaf_acc(const std::vector<Mask>& masks) {
    return mean_over(masks, "leaf_acc", [](const Mask& m) { return m.back() ? 1.0 : 0.0; });
}

double compute_por(const std::vector<Mask>& masks) {
    return mean_over(masks, "por", [](const Mask& m) {
        return static_cast<double>(std::count(m.begin(), m.end(), true)) / static_cast<double>(m.size());
    });
}

double compute_spor(const std::vector<Mask>& masks) {
    return mean_over(masks, "s_por", [](const Mask& m) { return longest_run(m) / static_cast<double>(m.size()); });
}

double compute_spor_prefix(const std::vector<Mask>& masks) {
    return mean_over(masks, "s_por_prefix", [](const Mask& m) {
        const auto prefix = std::find(m.begin(), m.end(), false) - m.begin();
        return static_cast<double>(prefix) / static_cast<double>(m.size());
    });
}

TorResult compute_tor(const std::vector<Mask>& masks) {
    require_samples(masks, "tor");
    TorResult r;
    double sum = 0.0;
    for (const auto& m : masks) {
        if (m.size() < 2) {
            ++r.excluded;
            continue;
        }
        std::size_t both = 0;
        for (std::size_t l = 0; l + 1 < m.size(); ++l) both += (m[l] && m[l + 1]) ? 1 : 0;
        sum += static_cast<double>(both) / static_cast<double>(m.size() - 1);
        ++r.n;
    }
    if (r.n == 0) throw MetricError("tor: every sample has fewer than two levels");
    r.value = sum / static_cast<double>(r.n);
    return r;
}

ConditionalAccuracy compute_conditional(const std::vector<Mask>& masks, std::size_t level) {
    if (level < 1) throw MetricError("conditional: level is 1-based");
    ConditionalAccuracy out;
    double hit_correct = 0.0;
    double hit_error = 0.0;
    for (const auto& m : masks) {
        if (m.size() < level + 1) continue;
        const double next = m[level] ? 1.0 : 0.0;
        if (m[level - 1]) {
            ++out.n_correct;
            hit_correct += next;
        } else {
            ++out.n_error;
            hit_error += next;
        }
    }
    if (out.n_correct > 0) out.given_correct = hit_correct / static_cast<double>(out.n_correct);
    if (out.n_error > 0) out.given_error = hit_error / static_cast<double>(out.n_error);
    if (out.given_correct && out.given_error) out.delta = *out.given_correct - *out.given_error;
    return out;
}

ForgettingReport compute_forgetting(double acc_base, double acc_after) {
    if (!(acc_base > 0.0 && acc_base <= 1.0)) throw MetricError("forgetting: acc_base must be in (0,1]");
    if (!(acc_after >= 0.0 && acc_after <= 1.0)) throw MetricError("forgetting: acc_after must be in [0,1]");
    ForgettingReport r;
    r.acc_base = acc_base;
    r.acc_after = acc_after;
    r.delta_pp = 100.0 * (acc_after - acc_base);
    r.rel_forget_pct = 100.0 * (acc_base - acc_after) / acc_base;
    r.ratio = acc_after / acc_base;
    r.delta_pp_2dp = round2(r.delta_pp) + 0.0;  // no negative zero
    r.rel_forget_pct_2dp = round2(r.rel_forget_pct) + 0.0;
    return r;
}

std::vector<Mask> masks_of(const std::vector<PredictionRecord>& records) {
    std::vector<Mask> masks;
    masks.reserve(records.size());
    for (const auto& r : records) masks.push_back(r.correct_mask);
    return masks;
}

MetricReport compute_report(const std::vector<Mask>& masks) {
    MetricReport rep;
    rep.hca = compute_hca(masks);
    rep.leaf_acc = compute_leaf_acc(masks);
    rep.por = compute_por(masks);
    rep.s_por = compute_spor(masks);
    rep.s_por_prefix = compute_spor_prefix(masks);
    rep.n_samples = masks.size();
    std::size_t max_len = 0;
    for (const auto& m : masks) max_len = std::max(max_len, m.size());
    rep.excluded_counts["tor"] = 0;
    if (max_len >= 2) {
        const TorResult tor = compute_tor(masks);
        rep.tor = tor.value;
        rep.excluded_counts["tor"] = tor.excluded;
    } else {
        rep.excluded_counts["tor"] = masks.size();
    }
    for (std::size_t l = 1; l <= max_len; ++l) {
        LevelRow row;
        row.level = l;
        double hits = 0.0;
        for (const auto& m : masks) {
            if (m.size() < l) continue;
            ++row.n;
            hits += m[l - 1] ? 1.0 : 0.0;
        }
        row.acc = hits / static_cast<double>(row.n);
        row.next = compute_conditional(masks, l);
        rep.per_level.push_back(row);
    }
    return rep;
}

MetricReport compute_report(const std::vector<PredictionRecord>& records, const ReportOptions& options) {
    MetricReport rep = compute_report(masks_of(records));
    if (options.exclude_singleton_levels) {
        std::size_t dropped = 0;
        std::erase_if(rep.per_level, [&](const LevelRow& row) {
            const bool all_single = std::all_of(records.begin(), records.end(), [&](const PredictionRecord& r) {
                return r.singleton.size() < row.level || r.singleton[row.level - 1];
            });
            dropped += all_single ? 1 : 0;
            return all_single;
        });
        rep.excluded_counts["singleton_levels"] = dropped;
    }
    return rep;
}

namespace {

std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

std::string report_csv(const MetricReport& r) {
    const std::string n = std::to_string(r.n_samples);
    std::string out = "metric,value,n,excluded\n";
    out += "hca," + format_double(r.hca) + "," + n + ",0\n";
    out += "leaf_acc," + format_double(r.leaf_acc) + "," + n + ",0\n";
    out += "por," + format_double(r.por) + "," + n + ",0\n";
    out += "s_por," + format_double(r.s_por) + "," + n + ",0\n";
    out += "s_por_prefix," + format_double(r.s_por_prefix) + "," + n + ",0\n";
    const std::size_t tor_excluded = r.excluded_counts.count("tor") ? r.excluded_counts.at("tor") : 0;
    out += "tor," + format_double(r.tor) + "," + std::to_string(r.n_samples - tor_excluded) + "," +
           std::to_string(tor_excluded) + "\n";
    return out;
}

std::string depth_csv(const MetricReport& r) {
    std::string out = "level,n,acc,acc_given_correct,acc_given_error,delta\n";
    for (const auto& row : r.per_level) {
        out += std::to_string(row.level) + "," + std::to_string(row.n) + "," + format_double(row.acc) + "," +
               opt_cell(row.next.given_correct) + "," + opt_cell(row.next.given_error) + "," +
               opt_cell(row.next.delta) + "\n";
    }
    return out;
}

std::string report_json(const MetricReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["hca"] = r.hca;
    j["leaf_acc"] = r.leaf_acc;
    j["por"] = r.por;
    j["s_por"] = r.s_por;
    j["s_por_prefix"] = r.s_por_prefix;
    j["tor"] = r.tor;
    j["n_samples"] = r.n_samples;
    j["excluded_counts"] = r.excluded_counts;
    json levels = json::array();
    for (const auto& row : r.per_level) {
        levels.push_back({{"level", row.level},
                          {"n", row.n},
                          {"acc", row.acc},
                          {"acc_given_correct", opt(row.next.given_correct)},
                          {"acc_given_error", opt(row.next.given_error)},
                          {"delta", opt(row.next.delta)}});
    }
    j["per_level"] = std::move(levels);
    return j.dump(2);
}

}  // namespace hvqa
