#pragma once

#include <utility>

#include "triagekit/models/common.hpp"

namespace triagekit {

/// Depth-limited regression tree stored as parallel node arrays. Leaves have
/// feature = -1 and carry the additive score contribution.
struct RegressionTree {
    std::vector<int> feature;
    std::vector<double> threshold; // go left when x[feature] < threshold
    std::vector<int> left;
    std::vector<int> right;
    std::vector<double> value;

    double score(std::span<const double> x) const {
        int node = 0;
        while (feature[static_cast<std::size_t>(node)] >= 0) {
            const auto f = static_cast<std::size_t>(feature[static_cast<std::size_t>(node)]);
            node = x[f] < threshold[static_cast<std::size_t>(node)]
                       ? left[static_cast<std::size_t>(node)]
                       : right[static_cast<std::size_t>(node)];
        }
        return value[static_cast<std::size_t>(node)];
    }
};

/// Per-class additive score = log prior + shrinkage * sum of per-round trees;
/// probabilities are the normalized exponential of the six scores.
class BoostedEnsemble final : public Model {
public:
    BoostedEnsemble(std::string schema_id, std::size_t dim, Probs log_priors, double shrinkage);

    std::string kind() const override { return "boosted"; }
    Probs predict_row(std::span<const double> x) const override;

    const Probs& log_priors() const { return log_priors_; }
    double shrinkage() const { return shrinkage_; }
    /// trees()[r][c] is round r's tree for class c.
    const std::vector<std::array<RegressionTree, kNumClasses>>& trees() const { return trees_; }
    void add_round(std::array<RegressionTree, kNumClasses> round);

private:
    Probs log_priors_{};
    double shrinkage_ = 0.1;
    std::vector<std::array<RegressionTree, kNumClasses>> trees_;
};

std::pair<BoostedEnsemble, LearningCurve> train_boosted(const Dataset& train, const Dataset& val,
                                                        const TrainConfig& cfg);

} // namespace triagekit
