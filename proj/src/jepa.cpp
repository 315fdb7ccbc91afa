#include "triagekit/models/jepa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace triagekit {

namespace {

void affine(const std::vector<double>& w, const std::vector<double>& b, std::size_t rows,
            std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b[r];
        const double* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

void column_means(std::span<const double> e, std::size_t rows, std::size_t dim,
                  std::vector<double>& mu) {
    mu.assign(dim, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < dim; ++j) mu[j] += e[i * dim + j];
    }
    for (double& m : mu) m /= static_cast<double>(rows);
}

} // namespace

double vicreg_variance_term(std::span<const double> embeddings, std::size_t rows,
                            std::size_t dim, double gamma) {
    if (rows == 0 || dim == 0) return 0.0;
    double term = 0;
    for (std::size_t j = 0; j < dim; ++j) {
        double lo = embeddings[j], hi = embeddings[j];
        for (std::size_t i = 1; i < rows; ++i) {
            lo = std::min(lo, embeddings[i * dim + j]);
            hi = std::max(hi, embeddings[i * dim + j]);
        }
        // a constant column has zero spread by definition; the mean-subtraction
        // path would leave rounding residue and miss the exact hinge value
        double sd = 0.0;
        if (lo < hi) {
            double mean = 0;
            for (std::size_t i = 0; i < rows; ++i) mean += embeddings[i * dim + j];
            mean /= static_cast<double>(rows);
            double v = 0;
            for (std::size_t i = 0; i < rows; ++i) {
                const double u = embeddings[i * dim + j] - mean;
                v += u * u;
            }
            sd = std::sqrt(v / static_cast<double>(rows));
        }
        term += std::max(0.0, gamma - sd);
    }
    return term / static_cast<double>(dim);
}

double vicreg_covariance_term(std::span<const double> embeddings, std::size_t rows,
                              std::size_t dim) {
    if (rows < 2 || dim == 0) return 0.0;
    std::vector<double> mu;
    column_means(embeddings, rows, dim, mu);
    double term = 0;
    for (std::size_t j = 0; j < dim; ++j) {
        for (std::size_t k = j + 1; k < dim; ++k) {
            double c = 0;
            for (std::size_t i = 0; i < rows; ++i) {
                c += (embeddings[i * dim + j] - mu[j]) * (embeddings[i * dim + k] - mu[k]);
            }
            c /= static_cast<double>(rows - 1);
            term += 2.0 * c * c; // both (j,k) and (k,j)
        }
    }
    return term / static_cast<double>(dim);
}

JepaModel::JepaModel(std::string schema_id, const Structure& s)
    : Model(std::move(schema_id), s.input), structure_(s) {
    if (s.input == 0) throw ConfigError("jepa input dimension must be positive");
    a1_.assign(s.hidden * s.input, 0.0);
    c1_.assign(s.hidden, 0.0);
    a2_.assign(s.embed * s.hidden, 0.0);
    c2_.assign(s.embed, 0.0);
    pr_.assign(s.embed * s.embed, 0.0);
    p0_.assign(s.embed, 0.0);
    targets_.assign(static_cast<std::size_t>(kNumClasses) * s.embed, 0.0);
}

void JepaModel::init_weights(Rng& rng) {
    const double s1 = std::sqrt(2.0 / static_cast<double>(structure_.input));
    for (double& w : a1_) w = rng.gaussian() * s1;
    const double s2 = std::sqrt(1.0 / static_cast<double>(structure_.hidden));
    for (double& w : a2_) w = rng.gaussian() * s2;
    for (std::size_t j = 0; j < structure_.embed; ++j) {
        pr_[j * structure_.embed + j] = 1.0;
    }
    for (double& t : targets_) t = rng.gaussian();
}

void JepaModel::encode(std::span<const double> x, std::vector<double>& hidden,
                       std::vector<double>& embedding, std::vector<double>& predicted) const {
    hidden.resize(structure_.hidden);
    embedding.resize(structure_.embed);
    predicted.resize(structure_.embed);
    affine(a1_, c1_, structure_.hidden, structure_.input, x.data(), hidden.data());
    for (double& v : hidden) v = std::max(0.0, v);
    affine(a2_, c2_, structure_.embed, structure_.hidden, hidden.data(), embedding.data());
    affine(pr_, p0_, structure_.embed, structure_.embed, embedding.data(), predicted.data());
}

Probs JepaModel::energies(std::span<const double> x) const {
    check_length(x.size());
    std::vector<double> h, z, zp;
    encode(x, h, z, zp);
    Probs e;
    for (int c = 0; c < kNumClasses; ++c) {
        const double* t = targets_.data() + static_cast<std::size_t>(c) * structure_.embed;
        double d2 = 0;
        for (std::size_t j = 0; j < structure_.embed; ++j) {
            const double d = zp[j] - t[j];
            d2 += d * d;
        }
        e[static_cast<std::size_t>(c)] = d2;
    }
    return e;
}

Probs JepaModel::predict_row(std::span<const double> x) const {
    const Probs e = energies(x);
    Probs p;
    double mn = e[0];
    for (int c = 1; c < kNumClasses; ++c) mn = std::min(mn, e[static_cast<std::size_t>(c)]);
    double sum = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        p[static_cast<std::size_t>(c)] = std::exp(mn - e[static_cast<std::size_t>(c)]);
        sum += p[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < kNumClasses; ++c) p[static_cast<std::size_t>(c)] /= sum;
    return p;
}

std::vector<double> JepaModel::parameters() const {
    std::vector<double> out;
    out.reserve(a1_.size() + c1_.size() + a2_.size() + c2_.size() + pr_.size() + p0_.size() +
                targets_.size());
    for (const auto* v : {&a1_, &c1_, &a2_, &c2_, &pr_, &p0_, &targets_}) {
        out.insert(out.end(), v->begin(), v->end());
    }
    return out;
}

void JepaModel::set_parameters(std::span<const double> p) {
    std::size_t want = a1_.size() + c1_.size() + a2_.size() + c2_.size() + pr_.size() +
                       p0_.size() + targets_.size();
    if (p.size() != want) throw SchemaMismatch("parameter vector length mismatch");
    std::size_t pos = 0;
    for (auto* v : {&a1_, &c1_, &a2_, &c2_, &pr_, &p0_, &targets_}) {
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(pos),
                  p.begin() + static_cast<std::ptrdiff_t>(pos + v->size()), v->begin());
        pos += v->size();
    }
}

double JepaModel::batch_loss(const Dataset& ds, std::span<const std::size_t> rows) const {
    const std::size_t m = rows.size();
    const std::size_t d = structure_.embed;
    if (m == 0) return 0.0;

    std::vector<double> zp(m * d);
    std::vector<double> h, z, pred;
    double contrast = 0, invariance = 0;
    for (std::size_t i = 0; i < m; ++i) {
        encode(ds.row(rows[i]), h, z, pred);
        std::copy(pred.begin(), pred.end(), zp.begin() + static_cast<std::ptrdiff_t>(i * d));

        Probs e;
        for (int c = 0; c < kNumClasses; ++c) {
            const double* t = targets_.data() + static_cast<std::size_t>(c) * d;
            double d2 = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = pred[j] - t[j];
                d2 += diff * diff;
            }
            e[static_cast<std::size_t>(c)] = d2;
        }
        double mn = e[0];
        for (int c = 1; c < kNumClasses; ++c) mn = std::min(mn, e[static_cast<std::size_t>(c)]);
        double lse = 0;
        for (int c = 0; c < kNumClasses; ++c) lse += std::exp(mn - e[static_cast<std::size_t>(c)]);
        const double ey = e[static_cast<std::size_t>(ds.labels[rows[i]])];
        contrast += ey + (std::log(lse) - mn);
        invariance += ey;
    }
    contrast /= static_cast<double>(m);
    invariance /= static_cast<double>(m);

    return contrast + structure_.lambda_inv * invariance +
           structure_.mu_var * vicreg_variance_term(zp, m, d, structure_.gamma) +
           structure_.nu_cov * vicreg_covariance_term(zp, m, d);
}

std::vector<double> JepaModel::batch_gradient(const Dataset& ds,
                                              std::span<const std::size_t> rows) const {
    const auto& s = structure_;
    const std::size_t m = rows.size();
    const std::size_t d = s.embed;

    std::vector<double> ga1(a1_.size(), 0.0), gc1(c1_.size(), 0.0);
    std::vector<double> ga2(a2_.size(), 0.0), gc2(c2_.size(), 0.0);
    std::vector<double> gpr(pr_.size(), 0.0), gp0(p0_.size(), 0.0);
    std::vector<double> gt(targets_.size(), 0.0);

    // forward pass, cached for the batch-level terms
    std::vector<double> pre1(m * s.hidden), act1(m * s.hidden), emb(m * d), zp(m * d);
    {
        std::vector<double> h(s.hidden), z(d), pred(d);
        for (std::size_t i = 0; i < m; ++i) {
            const auto x = ds.row(rows[i]);
            affine(a1_, c1_, s.hidden, s.input, x.data(), h.data());
            std::copy(h.begin(), h.end(), pre1.begin() + static_cast<std::ptrdiff_t>(i * s.hidden));
            for (double& v : h) v = std::max(0.0, v);
            std::copy(h.begin(), h.end(), act1.begin() + static_cast<std::ptrdiff_t>(i * s.hidden));
            affine(a2_, c2_, d, s.hidden, h.data(), z.data());
            std::copy(z.begin(), z.end(), emb.begin() + static_cast<std::ptrdiff_t>(i * d));
            affine(pr_, p0_, d, d, z.data(), pred.data());
            std::copy(pred.begin(), pred.end(), zp.begin() + static_cast<std::ptrdiff_t>(i * d));
        }
    }

    // dL/dzp from the energy terms
    std::vector<double> dzp(m * d, 0.0);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* p = zp.data() + i * d;
        Probs e;
        for (int c = 0; c < kNumClasses; ++c) {
            const double* t = targets_.data() + static_cast<std::size_t>(c) * d;
            double d2 = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = p[j] - t[j];
                d2 += diff * diff;
            }
            e[static_cast<std::size_t>(c)] = d2;
        }
        double mn = e[0];
        for (int c = 1; c < kNumClasses; ++c) mn = std::min(mn, e[static_cast<std::size_t>(c)]);
        Probs q;
        double sum = 0;
        for (int c = 0; c < kNumClasses; ++c) {
            q[static_cast<std::size_t>(c)] = std::exp(mn - e[static_cast<std::size_t>(c)]);
            sum += q[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < kNumClasses; ++c) q[static_cast<std::size_t>(c)] /= sum;

        const int y = ds.labels[rows[i]];
        for (int c = 0; c < kNumClasses; ++c) {
            const double de = inv_m * ((c == y ? 1.0 + s.lambda_inv : 0.0) -
                                       q[static_cast<std::size_t>(c)]);
            const double* t = targets_.data() + static_cast<std::size_t>(c) * d;
            double* gtc = gt.data() + static_cast<std::size_t>(c) * d;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = p[j] - t[j];
                dzp[i * d + j] += de * 2.0 * diff;
                gtc[j] -= de * 2.0 * diff;
            }
        }
    }

    // batch-level VICReg contributions to dL/dzp
    std::vector<double> mu;
    column_means(zp, m, d, mu);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = zp[j], hi = zp[j];
        for (std::size_t i = 1; i < m; ++i) {
            lo = std::min(lo, zp[i * d + j]);
            hi = std::max(hi, zp[i * d + j]);
        }
        if (!(lo < hi)) continue; // constant column: the hinge sits flat at sd = 0
        double v = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const double u = zp[i * d + j] - mu[j];
            v += u * u;
        }
        const double sd = std::sqrt(v / static_cast<double>(m));
        if (sd > 0.0 && sd < s.gamma) {
            const double coef = -s.mu_var / (static_cast<double>(d) * static_cast<double>(m) * sd);
            for (std::size_t i = 0; i < m; ++i) {
                dzp[i * d + j] += coef * (zp[i * d + j] - mu[j]);
            }
        }
    }
    if (m >= 2) {
        std::vector<double> cov(d * d, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* p = zp.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) {
                const double uj = p[j] - mu[j];
                for (std::size_t k = j + 1; k < d; ++k) {
                    cov[j * d + k] += uj * (p[k] - mu[k]);
                }
            }
        }
        const double norm = 1.0 / static_cast<double>(m - 1);
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = j + 1; k < d; ++k) {
                cov[j * d + k] *= norm;
                cov[k * d + j] = cov[j * d + k];
            }
        }
        const double coef = 4.0 * s.nu_cov / (static_cast<double>(d) * static_cast<double>(m - 1));
        for (std::size_t i = 0; i < m; ++i) {
            const double* p = zp.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0;
                for (std::size_t k = 0; k < d; ++k) {
                    if (k == j) continue;
                    acc += cov[j * d + k] * (p[k] - mu[k]);
                }
                dzp[i * d + j] += coef * acc;
            }
        }
    }

    // backprop through predictor and encoder
    std::vector<double> dz(d), dh(s.hidden);
    for (std::size_t i = 0; i < m; ++i) {
        const double* dzpi = dzp.data() + i * d;
        const double* zi = emb.data() + i * d;
        const double* hi = act1.data() + i * s.hidden;
        const double* prei = pre1.data() + i * s.hidden;
        const auto x = ds.row(rows[i]);

        for (std::size_t r = 0; r < d; ++r) {
            double* g = gpr.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) g[c] += dzpi[r] * zi[c];
            gp0[r] += dzpi[r];
        }
        for (std::size_t c = 0; c < d; ++c) {
            double acc = 0;
            for (std::size_t r = 0; r < d; ++r) acc += pr_[r * d + c] * dzpi[r];
            dz[c] = acc;
        }
        for (std::size_t r = 0; r < d; ++r) {
            double* g = ga2.data() + r * s.hidden;
            for (std::size_t c = 0; c < s.hidden; ++c) g[c] += dz[r] * hi[c];
            gc2[r] += dz[r];
        }
        for (std::size_t c = 0; c < s.hidden; ++c) {
            double acc = 0;
            for (std::size_t r = 0; r < d; ++r) acc += a2_[r * s.hidden + c] * dz[r];
            dh[c] = prei[c] > 0.0 ? acc : 0.0;
        }
        for (std::size_t r = 0; r < s.hidden; ++r) {
            double* g = ga1.data() + r * s.input;
            for (std::size_t c = 0; c < s.input; ++c) g[c] += dh[r] * x[c];
            gc1[r] += dh[r];
        }
    }

    std::vector<double> out;
    out.reserve(ga1.size() + gc1.size() + ga2.size() + gc2.size() + gpr.size() + gp0.size() +
                gt.size());
    for (const auto* v : {&ga1, &gc1, &ga2, &gc2, &gpr, &gp0, &gt}) {
        out.insert(out.end(), v->begin(), v->end());
    }
    return out;
}

std::pair<JepaModel, LearningCurve> train_jepa(const Dataset& train, const Dataset& val,
                                               const TrainConfig& cfg) {
    cfg.validate();
    if (train.rows() == 0) throw DataError("training set is empty");
    if (val.dim != train.dim || val.schema_id != train.schema_id) {
        throw SchemaMismatch("train and validation sets disagree on schema");
    }

    JepaModel::Structure s;
    s.input = train.dim;
    s.hidden = cfg.encoder_hidden;
    s.embed = cfg.embed_dim;
    s.lambda_inv = cfg.lambda_inv;
    s.mu_var = cfg.mu_var;
    s.nu_cov = cfg.nu_cov;
    s.gamma = cfg.gamma;
    JepaModel model(train.schema_id, s);

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
            const std::vector<double> grad = model.batch_gradient(train, rows);
            for (std::size_t i = 0; i < params.size(); ++i) {
                params[i] -= cfg.jepa_learning_rate * grad[i];
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
