#include "hvqa/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>

#include "hvqa/common.hpp"

namespace hvqa {

namespace {

const CompareRow* joint_row(const std::vector<CompareRow>& rows) {
    for (const auto& r : rows) {
        if (r.protocol == "joint") return &r;
    }
    return nullptr;
}

std::vector<double> values(const CompareRow& r) { return {r.hca, r.leaf_acc, r.tor, r.por, r.s_por}; }

double parse_number(std::string_view cell) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ValidationError("compare table: bad number '" + std::string(cell) + "'");
    }
    return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

}  // namespace

CompareRow compare_row(std::string protocol, const MetricReport& report, bool prefix_spor) {
    return {std::move(protocol), 100.0 * report.hca, 100.0 * report.leaf_acc, 100.0 * report.tor,
            100.0 * report.por, 100.0 * (prefix_spor ? report.s_por_prefix : report.s_por)};
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
    const CompareRow* base = joint_row(rows);
    std::string out = "protocol,hca,leaf_acc,tor,por,s_por,d_hca,d_leaf_acc,d_tor,d_por,d_s_por\n";
    for (const auto& r : rows) {
        out += r.protocol;
        const auto v = values(r);
        for (double x : v) out += "," + format_double(x);
        const auto b = base ? values(*base) : v;
        for (std::size_t k = 0; k < v.size(); ++k) out += "," + format_double(v[k] - b[k]);
        out += '\n';
    }
    return out;
}

std::vector<CompareRow> parse_compare_csv(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines.front().rfind("protocol,hca,", 0) != 0) throw ValidationError("compare table: bad header");
    std::vector<CompareRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_commas(lines[i]);
        if (cells.size() != 11) throw ValidationError("compare table: expected 11 columns on line " + std::to_string(i + 1));
        rows.push_back({std::string(cells[0]), parse_number(cells[1]), parse_number(cells[2]), parse_number(cells[3]),
                        parse_number(cells[4]), parse_number(cells[5])});
    }
    return rows;
}

std::string compare_text(const std::vector<CompareRow>& rows) {
    const CompareRow* base = joint_row(rows);
    char buf[64];
    std::string out = "protocol       HCA              LeafAcc          TOR              POR              S-POR\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-14s", r.protocol.c_str());
        out += buf;
        const auto v = values(r);
        const auto b = base ? values(*base) : v;
        for (std::size_t k = 0; k < v.size(); ++k) {
            std::snprintf(buf, sizeof buf, " %6.2f (%+6.2f)  ", v[k], v[k] - b[k]);
            out += buf;
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    }
    return out;
}

std::vector<MetricSummary> summarize_reports(const std::vector<MetricReport>& reports) {
    if (reports.empty()) throw ValidationError("report: no runs to summarise");
    const std::vector<std::pair<std::string, std::function<double(const MetricReport&)>>> fields = {
        {"hca", [](const MetricReport& r) { return r.hca; }},
        {"leaf_acc", [](const MetricReport& r) { return r.leaf_acc; }},
        {"por", [](const MetricReport& r) { return r.por; }},
        {"s_por", [](const MetricReport& r) { return r.s_por; }},
        {"s_por_prefix", [](const MetricReport& r) { return r.s_por_prefix; }},
        {"tor", [](const MetricReport& r) { return r.tor; }},
    };
    std::vector<MetricSummary> out;
    const double n = static_cast<double>(reports.size());
    for (const auto& [name, get] : fields) {
        double mean = 0.0;
        for (const auto& r : reports) mean += get(r);
        mean /= n;
        double var = 0.0;
        for (const auto& r : reports) var += (get(r) - mean) * (get(r) - mean);
        out.push_back({name, mean, std::sqrt(var / n), reports.size()});
    }
    return out;
}

std::string summary_csv(const std::vector<MetricSummary>& summary) {
    std::string out = "metric,mean,std,n\n";
    for (const auto& s : summary) {
        out += s.metric + "," + format_double(s.mean) + "," + format_double(s.std) + "," + std::to_string(s.n) + "\n";
    }
    return out;
}

}  // namespace hvqa
