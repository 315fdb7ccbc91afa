#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "triagekit/cohort.hpp"
#include "triagekit/features.hpp"

namespace triagekit {

struct NonFiniteLoss : NumericError {
    explicit NonFiniteLoss(std::size_t epoch_no);
    std::size_t epoch;
};

struct EmptyLeafSplit : NumericError {
    EmptyLeafSplit();
};

using Probs = std::array<double, kNumClasses>;

struct CurvePoint {
    double train_accuracy = 0;
    double train_logloss = 0;
    double val_accuracy = 0;
    double val_logloss = 0;
};
using LearningCurve = std::vector<CurvePoint>;

/// Hyperparameters for all three pipelines; each trainer reads its own slice.
struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;

    // feedforward
    std::size_t hidden1 = 64;
    std::size_t hidden2 = 32;
    double learning_rate = 0.25;
    double dropout = 0.05;
    double l2 = 1e-5;

    // boosted trees
    std::size_t rounds = 200;
    std::size_t max_depth = 3;
    std::size_t min_leaf = 5;
    double shrinkage = 0.1;
    double leaf_l2 = 1.0;

    // joint-embedding model
    std::size_t embed_dim = 32;
    std::size_t encoder_hidden = 64;
    double jepa_learning_rate = 0.005;
    double lambda_inv = 25.0;
    double mu_var = 25.0;
    double nu_cov = 1.0;
    double gamma = 1.0;

    void validate() const; // throws ConfigError
};

/// Immutable after training; prediction is const and thread-safe.
class Model {
public:
    virtual ~Model() = default;

    virtual std::string kind() const = 0;
    const std::string& schema_id() const { return schema_id_; }
    std::size_t dim() const { return dim_; }

    /// Distribution over the six classes; sums to 1 within 1e-6.
    Probs predict_proba(const FeatureVector& fv) const;
    virtual Probs predict_row(std::span<const double> x) const = 0;
    std::vector<Probs> predict_dataset(const Dataset& ds) const;

protected:
    Model(std::string schema_id, std::size_t dim);
    void check_length(std::size_t got) const;

    std::string schema_id_;
    std::size_t dim_ = 0;
};

/// 1-based rank of the argmax; ties resolve toward the most acute rank.
int argmax_rank(const Probs& p);

double exact_agreement(const std::vector<Probs>& probs, const std::vector<int>& labels);
double mean_logloss(const std::vector<Probs>& probs, const std::vector<int>& labels);

} // namespace triagekit
