#pragma once

// Deliberately naive reference implementations the suites compare against.

#include <cstddef>
#include <vector>

namespace oracle {

/// AUC as the fraction of (positive, negative) score pairs won, ties half.
inline double pair_count_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    double wins = 0;
    for (double p : pos) {
        for (double n : neg) {
            if (p > n) wins += 1.0;
            else if (p == n) wins += 0.5;
        }
    }
    return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Weighted kappa straight from the dense confusion matrix.
inline double dense_weighted_kappa(const std::vector<int>& pred, const std::vector<int>& gold,
                                   int num_classes, bool quadratic) {
    const auto k = static_cast<std::size_t>(num_classes);
    std::vector<std::vector<double>> counts(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        counts[static_cast<std::size_t>(gold[i] - 1)][static_cast<std::size_t>(pred[i] - 1)] +=
            1.0;
    }
    std::vector<double> rows(k, 0.0), cols(k, 0.0);
    double n = 0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            rows[i] += counts[i][j];
            cols[j] += counts[i][j];
            n += counts[i][j];
        }
    }
    double num = 0, den = 0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double d = (static_cast<double>(i) - static_cast<double>(j)) /
                             static_cast<double>(k - 1);
            const double w = quadratic ? d * d : (d < 0 ? -d : d);
            num += w * counts[i][j];
            den += w * rows[i] * cols[j] / n;
        }
    }
    return 1.0 - num / den;
}

/// Central finite differences of a scalar function of a parameter vector.
template <typename F>
std::vector<double> central_difference(F&& loss, std::vector<double> params, double step) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double up = loss(params);
        params[i] = saved - step;
        const double down = loss(params);
        params[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

} // namespace oracle
