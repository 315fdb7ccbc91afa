#include "triagekit/models/boosted.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace triagekit {

namespace {

// ln of a zero prior; below the smallest representable positive double's ln
// so exp() of it vanishes against any live class.
constexpr double kZeroPriorLog = -745.0;

void softmax_scores(const double* z, Probs& p) {
    double mx = z[0];
    for (int c = 1; c < kNumClasses; ++c) mx = std::max(mx, z[c]);
    double sum = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        p[static_cast<std::size_t>(c)] = std::exp(z[c] - mx);
        sum += p[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < kNumClasses; ++c) p[static_cast<std::size_t>(c)] /= sum;
}

struct TreeFit {
    RegressionTree tree;
    std::vector<double> train_contribution; // leaf value per training row
};

// Breadth-first SSE fit to the residuals with Newton leaf values. One pass
// per (depth, feature) over presorted index lists keeps the search O(d * n)
// per level.
TreeFit fit_tree(const Dataset& ds, const std::vector<std::vector<std::size_t>>& sorted_idx,
                 const std::vector<double>& residual, const std::vector<double>& hess,
                 const TrainConfig& cfg) {
    const std::size_t n = ds.rows();
    RegressionTree tree;
    auto add_node = [&tree]() {
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.value.push_back(0.0);
        return static_cast<int>(tree.feature.size()) - 1;
    };

    std::vector<int> node_of(n, add_node());
    std::vector<int> frontier{0};

    struct NodeStat {
        double sum = 0;
        std::size_t cnt = 0;
        double best_gain = 0;
        int best_feature = -1;
        double best_threshold = 0;
    };

    for (std::size_t depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
        // frontier slot lookup by node id
        std::vector<int> slot(tree.feature.size(), -1);
        for (std::size_t s = 0; s < frontier.size(); ++s) {
            slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
        }

        std::vector<NodeStat> stats(frontier.size());
        for (std::size_t i = 0; i < n; ++i) {
            const int sl = slot[static_cast<std::size_t>(node_of[i])];
            if (sl < 0) continue;
            stats[static_cast<std::size_t>(sl)].sum += residual[i];
            stats[static_cast<std::size_t>(sl)].cnt += 1;
        }

        std::vector<double> left_sum(frontier.size());
        std::vector<std::size_t> left_cnt(frontier.size());
        std::vector<double> last_value(frontier.size());
        for (std::size_t f = 0; f < ds.dim; ++f) {
            std::fill(left_sum.begin(), left_sum.end(), 0.0);
            std::fill(left_cnt.begin(), left_cnt.end(), 0);
            std::fill(last_value.begin(), last_value.end(),
                      std::numeric_limits<double>::quiet_NaN());
            for (std::size_t i : sorted_idx[f]) {
                const int sl = slot[static_cast<std::size_t>(node_of[i])];
                if (sl < 0) continue;
                auto& st = stats[static_cast<std::size_t>(sl)];
                const double v = ds.row(i)[f];
                const std::size_t lc = left_cnt[static_cast<std::size_t>(sl)];
                const double lv = last_value[static_cast<std::size_t>(sl)];
                if (lc >= cfg.min_leaf && st.cnt - lc >= cfg.min_leaf && v > lv) {
                    const double ls = left_sum[static_cast<std::size_t>(sl)];
                    const double rs = st.sum - ls;
                    const auto nl = static_cast<double>(lc);
                    const auto nr = static_cast<double>(st.cnt - lc);
                    const double gain = ls * ls / nl + rs * rs / nr -
                                        st.sum * st.sum / static_cast<double>(st.cnt);
                    if (gain > st.best_gain + 1e-12) {
                        st.best_gain = gain;
                        st.best_feature = static_cast<int>(f);
                        st.best_threshold = (lv + v) / 2.0;
                    }
                }
                left_sum[static_cast<std::size_t>(sl)] += residual[i];
                left_cnt[static_cast<std::size_t>(sl)] += 1;
                last_value[static_cast<std::size_t>(sl)] = v;
            }
        }

        std::vector<int> next_frontier;
        for (std::size_t s = 0; s < frontier.size(); ++s) {
            const int node = frontier[s];
            if (stats[s].best_feature < 0) continue; // stays a leaf
            const int l = add_node();
            const int r = add_node();
            tree.feature[static_cast<std::size_t>(node)] = stats[s].best_feature;
            tree.threshold[static_cast<std::size_t>(node)] = stats[s].best_threshold;
            tree.left[static_cast<std::size_t>(node)] = l;
            tree.right[static_cast<std::size_t>(node)] = r;
            next_frontier.push_back(l);
            next_frontier.push_back(r);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const int node = node_of[i];
            if (tree.feature[static_cast<std::size_t>(node)] < 0) continue;
            const auto f = static_cast<std::size_t>(tree.feature[static_cast<std::size_t>(node)]);
            node_of[i] = ds.row(i)[f] < tree.threshold[static_cast<std::size_t>(node)]
                             ? tree.left[static_cast<std::size_t>(node)]
                             : tree.right[static_cast<std::size_t>(node)];
        }
        frontier = std::move(next_frontier);
    }

    // Newton leaf values: sum r / (sum h + leaf_l2)
    std::vector<double> leaf_r(tree.feature.size(), 0.0);
    std::vector<double> leaf_h(tree.feature.size(), 0.0);
    std::vector<std::size_t> leaf_n(tree.feature.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto node = static_cast<std::size_t>(node_of[i]);
        leaf_r[node] += residual[i];
        leaf_h[node] += hess[i];
        leaf_n[node] += 1;
    }
    for (std::size_t node = 0; node < tree.feature.size(); ++node) {
        if (tree.feature[node] >= 0) continue;
        // the min_leaf rule guarantees every leaf received rows
        if (leaf_n[node] == 0) throw EmptyLeafSplit();
        tree.value[node] = leaf_r[node] / (leaf_h[node] + cfg.leaf_l2);
    }

    TreeFit fit;
    fit.train_contribution.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        fit.train_contribution[i] = tree.value[static_cast<std::size_t>(node_of[i])];
    }
    fit.tree = std::move(tree);
    return fit;
}

} // namespace

BoostedEnsemble::BoostedEnsemble(std::string schema_id, std::size_t dim, Probs log_priors,
                                 double shrinkage)
    : Model(std::move(schema_id), dim), log_priors_(log_priors), shrinkage_(shrinkage) {}

Probs BoostedEnsemble::predict_row(std::span<const double> x) const {
    check_length(x.size());
    double z[kNumClasses];
    for (int c = 0; c < kNumClasses; ++c) z[c] = log_priors_[static_cast<std::size_t>(c)];
    for (const auto& round : trees_) {
        for (int c = 0; c < kNumClasses; ++c) {
            z[c] += shrinkage_ * round[static_cast<std::size_t>(c)].score(x);
        }
    }
    Probs p;
    softmax_scores(z, p);
    return p;
}

void BoostedEnsemble::add_round(std::array<RegressionTree, kNumClasses> round) {
    trees_.push_back(std::move(round));
}

std::pair<BoostedEnsemble, LearningCurve> train_boosted(const Dataset& train, const Dataset& val,
                                                        const TrainConfig& cfg) {
    cfg.validate();
    if (train.rows() == 0) throw DataError("training set is empty");
    if (val.dim != train.dim || val.schema_id != train.schema_id) {
        throw SchemaMismatch("train and validation sets disagree on schema");
    }

    const std::size_t n = train.rows();
    Probs log_priors;
    {
        std::array<std::size_t, kNumClasses> counts{};
        for (int y : train.labels) ++counts[static_cast<std::size_t>(y)];
        for (int c = 0; c < kNumClasses; ++c) {
            const auto k = counts[static_cast<std::size_t>(c)];
            log_priors[static_cast<std::size_t>(c)] =
                k == 0 ? kZeroPriorLog
                       : std::log(static_cast<double>(k) / static_cast<double>(n));
        }
    }
    BoostedEnsemble model(train.schema_id, train.dim, log_priors, cfg.shrinkage);

    std::vector<std::vector<std::size_t>> sorted_idx(train.dim);
    for (std::size_t f = 0; f < train.dim; ++f) {
        auto& idx = sorted_idx[f];
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return train.row(a)[f] < train.row(b)[f];
        });
    }

    // cached additive scores; updated per round so curves are O(1) per case
    std::vector<std::array<double, kNumClasses>> train_scores(n);
    for (auto& z : train_scores) {
        for (int c = 0; c < kNumClasses; ++c) z[static_cast<std::size_t>(c)] = log_priors[static_cast<std::size_t>(c)];
    }
    std::vector<std::array<double, kNumClasses>> val_scores(val.rows());
    for (auto& z : val_scores) {
        for (int c = 0; c < kNumClasses; ++c) z[static_cast<std::size_t>(c)] = log_priors[static_cast<std::size_t>(c)];
    }

    auto curve_metrics = [](const std::vector<std::array<double, kNumClasses>>& scores,
                            const std::vector<int>& labels, double& acc, double& ll) {
        if (scores.empty()) {
            acc = 0;
            ll = 0;
            return;
        }
        std::size_t hits = 0;
        double sum = 0;
        Probs p;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            softmax_scores(scores[i].data(), p);
            if (argmax_rank(p) - 1 == labels[i]) ++hits;
            sum += -std::log(p[static_cast<std::size_t>(labels[i])]);
        }
        acc = static_cast<double>(hits) / static_cast<double>(scores.size());
        ll = sum / static_cast<double>(scores.size());
    };

    LearningCurve curve;
    curve.reserve(cfg.rounds);
    std::vector<double> residual(n), hess(n);
    std::vector<Probs> prob(n);

    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) softmax_scores(train_scores[i].data(), prob[i]);
        std::array<RegressionTree, kNumClasses> round_trees;
        std::vector<std::vector<double>> contributions(kNumClasses);
        for (int c = 0; c < kNumClasses; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const double pc = prob[i][static_cast<std::size_t>(c)];
                residual[i] = (train.labels[i] == c ? 1.0 : 0.0) - pc;
                hess[i] = pc * (1.0 - pc);
            }
            TreeFit fit = fit_tree(train, sorted_idx, residual, hess, cfg);
            round_trees[static_cast<std::size_t>(c)] = std::move(fit.tree);
            contributions[static_cast<std::size_t>(c)] = std::move(fit.train_contribution);
        }
        for (int c = 0; c < kNumClasses; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                train_scores[i][static_cast<std::size_t>(c)] +=
                    cfg.shrinkage * contributions[static_cast<std::size_t>(c)][i];
            }
            for (std::size_t i = 0; i < val.rows(); ++i) {
                val_scores[i][static_cast<std::size_t>(c)] +=
                    cfg.shrinkage * round_trees[static_cast<std::size_t>(c)].score(val.row(i));
            }
        }
        model.add_round(std::move(round_trees));

        CurvePoint pt;
        curve_metrics(train_scores, train.labels, pt.train_accuracy, pt.train_logloss);
        curve_metrics(val_scores, val.labels, pt.val_accuracy, pt.val_logloss);
        curve.push_back(pt);
    }
    return {std::move(model), std::move(curve)};
}

} // namespace triagekit
