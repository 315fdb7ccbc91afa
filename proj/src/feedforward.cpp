#include "triagekit/models/feedforward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace triagekit {

namespace {

void softmax6(const double* z, Probs& p) {
    double mx = z[0];
    for (int c = 1; c < kNumClasses; ++c) mx = std::max(mx, z[c]);
    double sum = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        p[static_cast<std::size_t>(c)] = std::exp(z[c] - mx);
        sum += p[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < kNumClasses; ++c) p[static_cast<std::size_t>(c)] /= sum;
}

// y = W x + b, W is rows x cols row-major
void affine(const std::vector<double>& w, const std::vector<double>& b, std::size_t rows,
            std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b[r];
        const double* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

} // namespace

FeedForwardModel::FeedForwardModel(std::string schema_id, const Structure& s)
    : Model(std::move(schema_id), s.input), structure_(s) {
    if (s.input == 0) throw ConfigError("feedforward input dimension must be positive");
    w1_.assign(s.hidden1 * s.input, 0.0);
    b1_.assign(s.hidden1, 0.0);
    w2_.assign(s.hidden2 * s.hidden1, 0.0);
    b2_.assign(s.hidden2, 0.0);
    w3_.assign(static_cast<std::size_t>(kNumClasses) * s.hidden2, 0.0);
    b3_.assign(static_cast<std::size_t>(kNumClasses), 0.0);
}

void FeedForwardModel::init_weights(Rng& rng) {
    const double s1 = std::sqrt(2.0 / static_cast<double>(structure_.input));
    for (double& w : w1_) w = rng.gaussian() * s1;
    const double s2 = std::sqrt(2.0 / static_cast<double>(structure_.hidden1));
    for (double& w : w2_) w = rng.gaussian() * s2;
    // w3_, biases stay zero
}

void FeedForwardModel::forward(std::span<const double> x, std::vector<double>& a1,
                               std::vector<double>& a2, Probs& p) const {
    a1.resize(structure_.hidden1);
    a2.resize(structure_.hidden2);
    affine(w1_, b1_, structure_.hidden1, structure_.input, x.data(), a1.data());
    for (double& v : a1) v = std::max(0.0, v);
    affine(w2_, b2_, structure_.hidden2, structure_.hidden1, a1.data(), a2.data());
    for (double& v : a2) v = std::max(0.0, v);
    double z[kNumClasses];
    affine(w3_, b3_, kNumClasses, structure_.hidden2, a2.data(), z);
    softmax6(z, p);
}

Probs FeedForwardModel::predict_row(std::span<const double> x) const {
    check_length(x.size());
    std::vector<double> a1, a2;
    Probs p;
    forward(x, a1, a2, p);
    return p;
}

std::vector<double> FeedForwardModel::parameters() const {
    std::vector<double> out;
    out.reserve(w1_.size() + b1_.size() + w2_.size() + b2_.size() + w3_.size() + b3_.size());
    for (const auto* v : {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}) {
        out.insert(out.end(), v->begin(), v->end());
    }
    return out;
}

void FeedForwardModel::set_parameters(std::span<const double> p) {
    std::size_t want = w1_.size() + b1_.size() + w2_.size() + b2_.size() + w3_.size() + b3_.size();
    if (p.size() != want) throw SchemaMismatch("parameter vector length mismatch");
    std::size_t pos = 0;
    for (auto* v : {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}) {
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(pos),
                  p.begin() + static_cast<std::ptrdiff_t>(pos + v->size()), v->begin());
        pos += v->size();
    }
}

double FeedForwardModel::batch_loss(const Dataset& ds, std::span<const std::size_t> rows) const {
    double ce = 0;
    std::vector<double> a1, a2;
    Probs p;
    for (std::size_t i : rows) {
        forward(ds.row(i), a1, a2, p);
        ce += -std::log(p[static_cast<std::size_t>(ds.labels[i])]);
    }
    ce /= static_cast<double>(rows.size());
    double penalty = 0;
    for (const auto* w : {&w1_, &w2_, &w3_}) {
        for (double v : *w) penalty += v * v;
    }
    return ce + structure_.l2 * penalty;
}

std::vector<double> FeedForwardModel::batch_gradient(const Dataset& ds,
                                                     std::span<const std::size_t> rows) const {
    return gradient_impl(ds, rows, nullptr);
}

// Backprop of mean cross-entropy + l2 * sum w^2. When dropout_rng is set,
// inverted dropout masks the hidden activations (the training path).
std::vector<double> FeedForwardModel::gradient_impl(const Dataset& ds,
                                                    std::span<const std::size_t> rows,
                                                    Rng* dropout_rng) const {
    const auto& s = structure_;
    std::vector<double> gw1(w1_.size(), 0.0), gb1(b1_.size(), 0.0);
    std::vector<double> gw2(w2_.size(), 0.0), gb2(b2_.size(), 0.0);
    std::vector<double> gw3(w3_.size(), 0.0), gb3(b3_.size(), 0.0);

    const double inv_n = 1.0 / static_cast<double>(rows.size());
    const double keep = 1.0 - s.dropout;

    std::vector<double> z1(s.hidden1), a1(s.hidden1), z2(s.hidden2), a2(s.hidden2);
    std::vector<double> d1(s.hidden1), d2(s.hidden2);
    std::vector<double> m1(s.hidden1, 1.0), m2(s.hidden2, 1.0);

    for (std::size_t i : rows) {
        const auto x = ds.row(i);
        affine(w1_, b1_, s.hidden1, s.input, x.data(), z1.data());
        for (std::size_t k = 0; k < s.hidden1; ++k) a1[k] = std::max(0.0, z1[k]);
        if (dropout_rng && s.dropout > 0.0) {
            for (std::size_t k = 0; k < s.hidden1; ++k) {
                m1[k] = dropout_rng->uniform() < s.dropout ? 0.0 : 1.0 / keep;
                a1[k] *= m1[k];
            }
        }
        affine(w2_, b2_, s.hidden2, s.hidden1, a1.data(), z2.data());
        for (std::size_t k = 0; k < s.hidden2; ++k) a2[k] = std::max(0.0, z2[k]);
        if (dropout_rng && s.dropout > 0.0) {
            for (std::size_t k = 0; k < s.hidden2; ++k) {
                m2[k] = dropout_rng->uniform() < s.dropout ? 0.0 : 1.0 / keep;
                a2[k] *= m2[k];
            }
        }
        double z3[kNumClasses];
        affine(w3_, b3_, kNumClasses, s.hidden2, a2.data(), z3);
        Probs p;
        softmax6(z3, p);

        double d3[kNumClasses];
        for (int c = 0; c < kNumClasses; ++c) {
            d3[c] = (p[static_cast<std::size_t>(c)] -
                     (c == ds.labels[i] ? 1.0 : 0.0)) * inv_n;
        }
        for (int c = 0; c < kNumClasses; ++c) {
            double* g = gw3.data() + static_cast<std::size_t>(c) * s.hidden2;
            for (std::size_t k = 0; k < s.hidden2; ++k) g[k] += d3[c] * a2[k];
            gb3[static_cast<std::size_t>(c)] += d3[c];
        }
        for (std::size_t k = 0; k < s.hidden2; ++k) {
            double acc = 0;
            for (int c = 0; c < kNumClasses; ++c) {
                acc += w3_[static_cast<std::size_t>(c) * s.hidden2 + k] * d3[c];
            }
            if (dropout_rng && s.dropout > 0.0) acc *= m2[k];
            d2[k] = z2[k] > 0.0 ? acc : 0.0;
        }
        for (std::size_t k = 0; k < s.hidden2; ++k) {
            double* g = gw2.data() + k * s.hidden1;
            for (std::size_t j = 0; j < s.hidden1; ++j) g[j] += d2[k] * a1[j];
            gb2[k] += d2[k];
        }
        for (std::size_t j = 0; j < s.hidden1; ++j) {
            double acc = 0;
            for (std::size_t k = 0; k < s.hidden2; ++k) acc += w2_[k * s.hidden1 + j] * d2[k];
            if (dropout_rng && s.dropout > 0.0) acc *= m1[j];
            d1[j] = z1[j] > 0.0 ? acc : 0.0;
        }
        for (std::size_t j = 0; j < s.hidden1; ++j) {
            double* g = gw1.data() + j * s.input;
            for (std::size_t c = 0; c < s.input; ++c) g[c] += d1[j] * x[c];
            gb1[j] += d1[j];
        }
    }

    const double reg = 2.0 * s.l2;
    for (std::size_t i = 0; i < w1_.size(); ++i) gw1[i] += reg * w1_[i];
    for (std::size_t i = 0; i < w2_.size(); ++i) gw2[i] += reg * w2_[i];
    for (std::size_t i = 0; i < w3_.size(); ++i) gw3[i] += reg * w3_[i];

    std::vector<double> out;
    out.reserve(gw1.size() + gb1.size() + gw2.size() + gb2.size() + gw3.size() + gb3.size());
    for (const auto* v : {&gw1, &gb1, &gw2, &gb2, &gw3, &gb3}) {
        out.insert(out.end(), v->begin(), v->end());
    }
    return out;
}

std::pair<FeedForwardModel, LearningCurve> train_feedforward(const Dataset& train,
                                                             const Dataset& val,
                                                             const TrainConfig& cfg) {
    cfg.validate();
    if (train.rows() == 0) throw DataError("training set is empty");
    if (val.dim != train.dim || val.schema_id != train.schema_id) {
        throw SchemaMismatch("train and validation sets disagree on schema");
    }

    FeedForwardModel::Structure s;
    s.input = train.dim;
    s.hidden1 = cfg.hidden1;
    s.hidden2 = cfg.hidden2;
    s.dropout = cfg.dropout;
    s.l2 = cfg.l2;
    FeedForwardModel model(train.schema_id, s);

    Rng rng(cfg.seed);
    model.init_weights(rng);

    std::vector<std::size_t> order(train.rows());
    std::iota(order.begin(), order.end(), 0);

    LearningCurve curve;
    curve.reserve(cfg.epochs);
    std::vector<double> params = model.parameters();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            const std::span<const std::size_t> rows(order.data() + start, len);
            const std::vector<double> grad = model.gradient_impl(train, rows, &rng);
            for (std::size_t i = 0; i < params.size(); ++i) {
                params[i] -= cfg.learning_rate * grad[i];
            }
            model.set_parameters(params);
        }

        CurvePoint pt;
        const auto train_probs = model.predict_dataset(train);
        const auto val_probs = model.predict_dataset(val);
        pt.train_accuracy = exact_agreement(train_probs, train.labels);
        pt.train_logloss = mean_logloss(train_probs, train.labels);
        pt.val_accuracy = exact_agreement(val_probs, val.labels);
        pt.val_logloss = mean_logloss(val_probs, val.labels);
        if (!std::isfinite(pt.train_logloss) || !std::isfinite(pt.val_logloss)) {
            throw NonFiniteLoss(epoch + 1);
        }
        curve.push_back(pt);
    }
    return {std::move(model), std::move(curve)};
}

} // namespace triagekit
