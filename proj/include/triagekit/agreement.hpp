#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "triagekit/metrics.hpp"

namespace triagekit {

struct ConfusionMatrix {
    // rows = gold rank, columns = predicted rank
    std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};
    std::size_t total = 0;
};

ConfusionMatrix confusion(const std::vector<int>& pred_ranks, const std::vector<int>& gold_ranks);

struct BlandAltmanSummary {
    double bias = 0.0;
    bool limits_defined = false;  // false for a single case
    double sd = 0.0;              // sample sd of the differences
    double lower = 0.0;           // bias - 1.96 sd
    double upper = 0.0;           // bias + 1.96 sd
    std::vector<std::pair<double, double>> pairs; // ((pred+gold)/2, pred-gold)
};

BlandAltmanSummary bland_altman(const std::vector<int>& pred_ranks,
                                const std::vector<int>& gold_ranks);

/// Counts of the signed difference pred - gold; index d+5 holds difference d.
std::array<std::size_t, 11> error_histogram(const std::vector<int>& pred_ranks,
                                            const std::vector<int>& gold_ranks);

} // namespace triagekit
