#include "triagekit/agreement.hpp"

#include <cmath>

#include "triagekit/stats.hpp"

namespace triagekit {

namespace {

void check_ranks(const std::vector<int>& pred, const std::vector<int>& gold) {
    if (pred.size() != gold.size()) throw LengthMismatch(pred.size(), gold.size());
    if (pred.empty()) throw EmptyInput();
    for (const auto* v : {&pred, &gold}) {
        for (int r : *v) {
            if (r < 1 || r > kNumClasses) {
                throw DataError("rank out of range: " + std::to_string(r));
            }
        }
    }
}

} // namespace

ConfusionMatrix confusion(const std::vector<int>& pred_ranks, const std::vector<int>& gold_ranks) {
    check_ranks(pred_ranks, gold_ranks);
    ConfusionMatrix m;
    for (std::size_t i = 0; i < pred_ranks.size(); ++i) {
        const auto g = static_cast<std::size_t>(gold_ranks[i] - 1);
        const auto p = static_cast<std::size_t>(pred_ranks[i] - 1);
        ++m.counts[g][p];
        ++m.total;
    }
    return m;
}

BlandAltmanSummary bland_altman(const std::vector<int>& pred_ranks,
                                const std::vector<int>& gold_ranks) {
    check_ranks(pred_ranks, gold_ranks);
    BlandAltmanSummary s;
    std::vector<double> diffs(pred_ranks.size());
    s.pairs.reserve(pred_ranks.size());
    for (std::size_t i = 0; i < pred_ranks.size(); ++i) {
        diffs[i] = static_cast<double>(pred_ranks[i] - gold_ranks[i]);
        s.pairs.emplace_back((pred_ranks[i] + gold_ranks[i]) / 2.0, diffs[i]);
    }
    s.bias = mean_of(diffs);
    if (diffs.size() > 1) {
        s.limits_defined = true;
        s.sd = sample_sd(diffs);
        s.lower = s.bias - 1.96 * s.sd;
        s.upper = s.bias + 1.96 * s.sd;
    }
    return s;
}

std::array<std::size_t, 11> error_histogram(const std::vector<int>& pred_ranks,
                                            const std::vector<int>& gold_ranks) {
    check_ranks(pred_ranks, gold_ranks);
    std::array<std::size_t, 11> counts{};
    for (std::size_t i = 0; i < pred_ranks.size(); ++i) {
        ++counts[static_cast<std::size_t>(pred_ranks[i] - gold_ranks[i] + 5)];
    }
    return counts;
}

} // namespace triagekit
