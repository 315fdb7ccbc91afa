#pragma once

#include <memory>
#include <utility>

#include "triagekit/models/common.hpp"
#include "triagekit/rng.hpp"

namespace triagekit {

/// Input -> rectifier -> rectifier -> 6-way normalized exponential, trained
/// by mini-batch gradient descent on cross-entropy plus an L2 weight penalty,
/// with inverted dropout on the hidden activations during training.
class FeedForwardModel final : public Model {
public:
    struct Structure {
        std::size_t input = 0;
        std::size_t hidden1 = 64;
        std::size_t hidden2 = 32;
        double dropout = 0.05;
        double l2 = 1e-5;
    };

    /// All parameters zero; output is exactly uniform.
    FeedForwardModel(std::string schema_id, const Structure& s);

    std::string kind() const override { return "feedforward"; }
    Probs predict_row(std::span<const double> x) const override;

    const Structure& structure() const { return structure_; }

    /// Flat view of (W1, b1, W2, b2, W3, b3), row-major.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> p);

    /// Hidden layers get He-scaled gaussian weights; the output layer stays
    /// zero so the untrained model predicts the uniform distribution.
    void init_weights(Rng& rng);

    /// Mean cross-entropy over the rows plus l2 * sum of squared weights,
    /// dropout disabled. Gradient matches it exactly.
    double batch_loss(const Dataset& ds, std::span<const std::size_t> rows) const;
    std::vector<double> batch_gradient(const Dataset& ds,
                                       std::span<const std::size_t> rows) const;

private:
    friend std::pair<FeedForwardModel, LearningCurve> train_feedforward(
        const Dataset&, const Dataset&, const TrainConfig&);

    std::vector<double> gradient_impl(const Dataset& ds, std::span<const std::size_t> rows,
                                      Rng* dropout_rng) const;
    void forward(std::span<const double> x, std::vector<double>& a1, std::vector<double>& a2,
                 Probs& p) const;

    Structure structure_;
    std::vector<double> w1_, b1_, w2_, b2_, w3_, b3_;
};

std::pair<FeedForwardModel, LearningCurve> train_feedforward(const Dataset& train,
                                                             const Dataset& val,
                                                             const TrainConfig& cfg);

} // namespace triagekit
