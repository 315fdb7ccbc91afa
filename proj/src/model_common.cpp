#include "triagekit/models/common.hpp"

#include <cmath>

namespace triagekit {

NonFiniteLoss::NonFiniteLoss(std::size_t epoch_no)
    : NumericError("non-finite loss at epoch " + std::to_string(epoch_no)),
      epoch(epoch_no) {}

EmptyLeafSplit::EmptyLeafSplit() : NumericError("split produced an empty leaf") {}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (hidden1 == 0 || hidden2 == 0) throw ConfigError("hidden sizes must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
    if (max_depth == 0) throw ConfigError("max_depth must be positive");
    if (min_leaf == 0) throw ConfigError("min_leaf must be positive");
    if (!(shrinkage > 0.0)) throw ConfigError("shrinkage must be positive");
    if (!(leaf_l2 >= 0.0)) throw ConfigError("leaf_l2 must be non-negative");
    if (embed_dim == 0 || encoder_hidden == 0) throw ConfigError("embedding sizes must be positive");
    if (!(jepa_learning_rate > 0.0)) throw ConfigError("jepa_learning_rate must be positive");
    if (!(lambda_inv >= 0.0) || !(mu_var >= 0.0) || !(nu_cov >= 0.0)) {
        throw ConfigError("loss coefficients must be non-negative");
    }
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
}

Model::Model(std::string schema_id, std::size_t dim)
    : schema_id_(std::move(schema_id)), dim_(dim) {}

void Model::check_length(std::size_t got) const {
    if (got != dim_) {
        throw SchemaMismatch("expected " + std::to_string(dim_) + " features, got " +
                             std::to_string(got));
    }
}

Probs Model::predict_proba(const FeatureVector& fv) const {
    if (fv.schema_id != schema_id_) {
        throw SchemaMismatch("feature vector from schema " + fv.schema_id +
                             ", model expects " + schema_id_);
    }
    return predict_row(fv.values);
}

std::vector<Probs> Model::predict_dataset(const Dataset& ds) const {
    if (ds.schema_id != schema_id_) {
        throw SchemaMismatch("dataset from schema " + ds.schema_id + ", model expects " +
                             schema_id_);
    }
    std::vector<Probs> out;
    out.reserve(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i) out.push_back(predict_row(ds.row(i)));
    return out;
}

int argmax_rank(const Probs& p) {
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c) {
        if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(best)]) best = c;
    }
    return best + 1;
}

double exact_agreement(const std::vector<Probs>& probs, const std::vector<int>& labels) {
    if (probs.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (argmax_rank(probs[i]) - 1 == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(probs.size());
}

double mean_logloss(const std::vector<Probs>& probs, const std::vector<int>& labels) {
    if (probs.empty()) return 0.0;
    double sum = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        sum += -std::log(probs[i][static_cast<std::size_t>(labels[i])]);
    }
    return sum / static_cast<double>(probs.size());
}

} // namespace triagekit
