#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "triagekit/metrics.hpp"

namespace triagekit {

enum class BrierVariant { SumOverClasses, PerComponentMean };

std::string brier_variant_token(BrierVariant v);
BrierVariant brier_variant_from_token(const std::string& token);

/// Mean over cases of the squared distance between the predicted probability
/// vector and the one-hot gold outcome. SumOverClasses spans [0, 2];
/// PerComponentMean divides each case by the class count and spans [0, 1/3].
double brier(const PredictionSet& set, const std::vector<int>& gold_ranks,
             BrierVariant variant = BrierVariant::SumOverClasses);

struct CalibrationBin {
    int bin = 0;
    std::size_t count = 0;
    std::size_t positives = 0;   // gold == rank within the bin
    double mean_predicted = 0.0;
    double observed = 0.0;       // positives / count
    double gap = 0.0;            // observed - mean_predicted
};

/// Quantile bins of the class probabilities for one rank. Cases are split
/// into n_bins equal blocks in sorted order; a block boundary never divides
/// equal probabilities (ties stay in the lower bin), so degenerate inputs
/// collapse to fewer bins. Counts sum to the case count.
std::vector<CalibrationBin> calibration_table(const PredictionSet& set,
                                              const std::vector<int>& gold_ranks, int rank,
                                              int n_bins = 10);

struct ProbabilitySurfaces {
    // [true class][predicted class] mean probability; rows of defined classes sum to 1
    std::array<std::array<double, kNumClasses>, kNumClasses> heatmap{};
    std::array<bool, kNumClasses> defined{};
    // raw probability lists for external density rendering
    std::array<std::array<std::vector<double>, kNumClasses>, kNumClasses> ridge;
};

ProbabilitySurfaces probability_surfaces(const PredictionSet& set,
                                         const std::vector<int>& gold_ranks);

} // namespace triagekit
