#include "triagekit/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace triagekit {

std::string brier_variant_token(BrierVariant v) {
    return v == BrierVariant::SumOverClasses ? "sum" : "mean";
}

BrierVariant brier_variant_from_token(const std::string& token) {
    if (token == "sum") return BrierVariant::SumOverClasses;
    if (token == "mean") return BrierVariant::PerComponentMean;
    throw ConfigError("unknown brier variant: " + token);
}

double brier(const PredictionSet& set, const std::vector<int>& gold_ranks,
             BrierVariant variant) {
    if (set.probs.size() != gold_ranks.size()) {
        throw LengthMismatch(set.probs.size(), gold_ranks.size());
    }
    if (set.probs.empty()) throw EmptyInput();
    double total = 0;
    for (std::size_t i = 0; i < set.probs.size(); ++i) {
        double case_sum = 0;
        for (int c = 0; c < kNumClasses; ++c) {
            const double y = gold_ranks[i] == c + 1 ? 1.0 : 0.0;
            const double d = set.probs[i][static_cast<std::size_t>(c)] - y;
            case_sum += d * d;
        }
        total += variant == BrierVariant::SumOverClasses ? case_sum : case_sum / kNumClasses;
    }
    return total / static_cast<double>(set.probs.size());
}

std::vector<CalibrationBin> calibration_table(const PredictionSet& set,
                                              const std::vector<int>& gold_ranks, int rank,
                                              int n_bins) {
    if (set.probs.size() != gold_ranks.size()) {
        throw LengthMismatch(set.probs.size(), gold_ranks.size());
    }
    if (set.probs.empty()) throw EmptyInput();
    if (rank < 1 || rank > kNumClasses) throw DataError("rank out of range");
    if (n_bins < 1) throw ConfigError("bin count must be positive");

    const std::size_t n = set.probs.size();
    const auto c = static_cast<std::size_t>(rank - 1);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return set.probs[a][c] < set.probs[b][c];
    });

    std::vector<CalibrationBin> table;
    const auto bins = static_cast<std::size_t>(n_bins);
    std::size_t start = 0;
    // the final nominal boundary is bins*n/bins == n, so every case lands in a bin
    for (std::size_t b = 0; b < bins && start < n; ++b) {
        std::size_t stop = std::max((b + 1) * n / bins, start + 1);
        // equal probabilities never straddle a boundary
        while (stop < n && set.probs[order[stop]][c] == set.probs[order[stop - 1]][c]) ++stop;

        CalibrationBin bin;
        bin.bin = static_cast<int>(table.size());
        bin.count = stop - start;
        double pred_sum = 0;
        for (std::size_t k = start; k < stop; ++k) {
            pred_sum += set.probs[order[k]][c];
            if (gold_ranks[order[k]] == rank) ++bin.positives;
        }
        bin.mean_predicted = pred_sum / static_cast<double>(bin.count);
        bin.observed = static_cast<double>(bin.positives) / static_cast<double>(bin.count);
        bin.gap = bin.observed - bin.mean_predicted;
        table.push_back(bin);
        start = stop;
    }
    return table;
}

ProbabilitySurfaces probability_surfaces(const PredictionSet& set,
                                         const std::vector<int>& gold_ranks) {
    if (set.probs.size() != gold_ranks.size()) {
        throw LengthMismatch(set.probs.size(), gold_ranks.size());
    }
    if (set.probs.empty()) throw EmptyInput();

    ProbabilitySurfaces out;
    std::array<std::size_t, kNumClasses> counts{};
    for (std::size_t i = 0; i < set.probs.size(); ++i) {
        const int g = gold_ranks[i];
        if (g < 1 || g > kNumClasses) throw DataError("rank out of range");
        const auto t = static_cast<std::size_t>(g - 1);
        ++counts[t];
        for (std::size_t p = 0; p < static_cast<std::size_t>(kNumClasses); ++p) {
            out.heatmap[t][p] += set.probs[i][p];
            out.ridge[t][p].push_back(set.probs[i][p]);
        }
    }
    for (std::size_t t = 0; t < static_cast<std::size_t>(kNumClasses); ++t) {
        out.defined[t] = counts[t] > 0;
        for (double& cell : out.heatmap[t]) {
            cell = out.defined[t] ? cell / static_cast<double>(counts[t])
                                  : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

} // namespace triagekit
