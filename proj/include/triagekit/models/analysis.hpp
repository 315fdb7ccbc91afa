#pragma once

#include "triagekit/models/common.hpp"

namespace triagekit {

struct ThresholdEntry {
    bool defined = false; // false when the class has no positive cases
    double threshold = 0;
    double f1 = 0;
};
using ThresholdReport = std::array<ThresholdEntry, kNumClasses>;

/// Per class, the smallest observed class probability whose one-vs-rest cut
/// (predict positive when p >= threshold) maximizes F1, reported with that
/// F1. Candidates are exactly the observed probabilities for the class.
ThresholdReport tune_thresholds(const std::vector<Probs>& probs,
                                const std::vector<int>& labels);

struct GroupImportance {
    std::string name;
    double importance = 0; // mean exact-agreement drop when the block is permuted
};

/// Permutes each feature group's column block `repeats` times and measures
/// the mean drop in exact agreement; sorted by descending importance.
std::vector<GroupImportance> permutation_importance(const Model& model, const Dataset& val,
                                                    std::size_t repeats, std::uint64_t seed);

} // namespace triagekit
