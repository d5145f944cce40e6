#pragma once

// Brute-force reference implementations written straight from the metric
// definitions. They share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace oracle {

using Mask = std::vector<bool>;

inline double hca(const std::vector<Mask>& m) {
    double s = 0;
    for (const auto& x : m) {
        bool all = true;
        for (bool b : x) all = all && b;
        s += all ? 1 : 0;
    }
    return s / m.size();
}

inline double leaf_acc(const std::vector<Mask>& m) {
    double s = 0;
    for (const auto& x : m) s += x[x.size() - 1] ? 1 : 0;
    return s / m.size();
}

inline double por(const std::vector<Mask>& m) {
    double s = 0;
    for (const auto& x : m) {
        double c = 0;
        for (bool b : x) c += b;
        s += c / x.size();
    }
    return s / m.size();
}

// Every window [i, j] is checked for being all-correct.
inline std::size_t longest_window(const Mask& x) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i; j < x.size(); ++j) {
            bool ok = true;
            for (std::size_t k = i; k <= j; ++k) ok = ok && x[k];
            if (ok) best = std::max(best, j - i + 1);
        }
    }
    return best;
}

inline double spor(const std::vector<Mask>& m) {
    double s = 0;
    for (const auto& x : m) s += static_cast<double>(longest_window(x)) / x.size();
    return s / m.size();
}

inline double spor_prefix(const std::vector<Mask>& m) {
    double s = 0;
    for (const auto& x : m) {
        std::size_t k = 0;
        while (k < x.size() && x[k]) ++k;
        s += static_cast<double>(k) / x.size();
    }
    return s / m.size();
}

// Paths with one level have no adjacent pair and are left out.
inline std::optional<double> tor(const std::vector<Mask>& m) {
    double s = 0;
    std::size_t n = 0;
    for (const auto& x : m) {
        if (x.size() < 2) continue;
        double c = 0;
        for (std::size_t l = 0; l + 1 < x.size(); ++l) c += (x[l] && x[l + 1]) ? 1 : 0;
        s += c / (x.size() - 1);
        ++n;
    }
    if (n == 0) return std::nullopt;
    return s / n;
}

struct Conditional {
    std::optional<double> given_correct;
    std::optional<double> given_error;
};

// Accuracy at level l+1 (1-based l) split by whether level l was right.
inline Conditional conditional(const std::vector<Mask>& m, std::size_t l) {
    double hit_c = 0, n_c = 0, hit_e = 0, n_e = 0;
    for (const auto& x : m) {
        if (x.size() < l + 1) continue;
        if (x[l - 1]) {
            n_c += 1;
            hit_c += x[l];
        } else {
            n_e += 1;
            hit_e += x[l];
        }
    }
    Conditional c;
    if (n_c > 0) c.given_correct = hit_c / n_c;
    if (n_e > 0) c.given_error = hit_e / n_e;
    return c;
}

// Expected HCA of the conditional mock over L asked levels with k options.
// Per-level correctness probability is the forced-correct rate plus the share
// of uniform draws that land on gold.
struct ProtocolExpectation {
    double joint;
    double independent;
    double conditioned;
};

inline ProtocolExpectation mock_hca(double acc_with_parent, double acc_without, int levels, int k) {
    const double q0 = acc_without + (1 - acc_without) / k;
    const double q1 = acc_with_parent + (1 - acc_with_parent) / k;
    // Conditioned: only the all-correct branch of the chain counts for HCA,
    // and on it every level after the first sees its gold parent.
    double all_correct = q0;
    for (int l = 1; l < levels; ++l) all_correct *= q1;
    return {std::pow(q0, levels), std::pow(q0, levels), all_correct};
}

}  // namespace oracle
