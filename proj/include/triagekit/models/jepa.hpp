#pragma once

#include <utility>

#include "triagekit/models/common.hpp"
#include "triagekit/rng.hpp"

namespace triagekit {

/// Hinge on per-dimension spread: (1/d) * sum_j max(0, gamma - std_j) with the
/// population standard deviation and no epsilon, so an all-identical batch
/// yields exactly gamma (for gamma=1).
double vicreg_variance_term(std::span<const double> embeddings, std::size_t rows,
                            std::size_t dim, double gamma);

/// (1/d) * sum over off-diagonal pairs of the squared (n-1)-normalized sample
/// covariance; defined as 0 for batches of fewer than two rows.
double vicreg_covariance_term(std::span<const double> embeddings, std::size_t rows,
                              std::size_t dim);

/// Encoder (affine -> rectifier -> affine) into an embedding space shared
/// with six learned class targets; an affine predictor maps the encoding to
/// its predicted embedding. energy(x, c) = squared distance to target c.
/// Probabilities are the normalized exponential of negative energies.
class JepaModel final : public Model {
public:
    struct Structure {
        std::size_t input = 0;
        std::size_t hidden = 64;
        std::size_t embed = 32;
        double lambda_inv = 25.0;
        double mu_var = 25.0;
        double nu_cov = 1.0;
        double gamma = 1.0;
    };

    JepaModel(std::string schema_id, const Structure& s);

    std::string kind() const override { return "jepa"; }
    Probs predict_row(std::span<const double> x) const override;

    const Structure& structure() const { return structure_; }

    /// Squared distances from the predicted embedding to each class target.
    Probs energies(std::span<const double> x) const;

    /// Flat view of (A1, c1, A2, c2, P, p0, targets), row-major.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> p);

    /// He-scaled encoder, identity predictor, unit gaussian targets.
    void init_weights(Rng& rng);

    /// Softmin contrastive term + lambda_inv * invariance + mu_var * variance
    /// hinge + nu_cov * covariance penalty over the rows. Gradient matches it.
    double batch_loss(const Dataset& ds, std::span<const std::size_t> rows) const;
    std::vector<double> batch_gradient(const Dataset& ds,
                                       std::span<const std::size_t> rows) const;

private:
    void encode(std::span<const double> x, std::vector<double>& hidden,
                std::vector<double>& embedding, std::vector<double>& predicted) const;

    Structure structure_;
    std::vector<double> a1_, c1_; // input -> hidden
    std::vector<double> a2_, c2_; // hidden -> embed
    std::vector<double> pr_, p0_; // predictor, embed -> embed
    std::vector<double> targets_; // kNumClasses x embed
};

std::pair<JepaModel, LearningCurve> train_jepa(const Dataset& train, const Dataset& val,
                                               const TrainConfig& cfg);

} // namespace triagekit
