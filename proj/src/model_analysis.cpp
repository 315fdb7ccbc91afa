#include "triagekit/models/analysis.hpp"

#include <algorithm>
#include <numeric>

#include "triagekit/rng.hpp"

namespace triagekit {

ThresholdReport tune_thresholds(const std::vector<Probs>& probs,
                                const std::vector<int>& labels) {
    if (probs.size() != labels.size()) throw DataError("probs and labels differ in length");
    ThresholdReport report;

    const std::size_t n = probs.size();
    std::vector<std::pair<double, bool>> scored(n); // (probability, is positive)
    for (int c = 0; c < kNumClasses; ++c) {
        std::size_t positives = 0;
        for (std::size_t i = 0; i < n; ++i) {
            scored[i] = {probs[i][static_cast<std::size_t>(c)], labels[i] == c};
            positives += labels[i] == c;
        }
        auto& entry = report[static_cast<std::size_t>(c)];
        if (positives == 0) continue; // stays undefined

        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });

        // sweep thresholds from the largest candidate down; ties between F1
        // maxima resolve toward the smaller threshold
        double best_f1 = -1.0, best_threshold = 0.0;
        std::size_t tp = 0, fp = 0;
        std::size_t i = 0;
        while (i < n) {
            const double t = scored[i].first;
            while (i < n && scored[i].first == t) {
                if (scored[i].second) ++tp;
                else ++fp;
                ++i;
            }
            const std::size_t fn = positives - tp;
            const double denom = static_cast<double>(tp) +
                                 static_cast<double>(fp + fn) / 2.0;
            const double f1 = denom == 0.0 ? 0.0 : static_cast<double>(tp) / denom;
            if (f1 >= best_f1) {
                best_f1 = f1;
                best_threshold = t;
            }
        }
        entry.defined = true;
        entry.threshold = best_threshold;
        entry.f1 = best_f1;
    }
    return report;
}

std::vector<GroupImportance> permutation_importance(const Model& model, const Dataset& val,
                                                    std::size_t repeats, std::uint64_t seed) {
    if (val.rows() == 0) throw DataError("validation set is empty");
    if (repeats == 0) throw ConfigError("permutation repeats must be positive");

    const double baseline = exact_agreement(model.predict_dataset(val), val.labels);

    Dataset work = val;
    Rng rng(seed);
    std::vector<std::size_t> perm(val.rows());

    std::vector<GroupImportance> result;
    result.reserve(val.groups.size());
    for (const auto& g : val.groups) {
        double total_drop = 0;
        for (std::size_t rep = 0; rep < repeats; ++rep) {
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            for (std::size_t i = 0; i < val.rows(); ++i) {
                const double* src = val.values.data() + perm[i] * val.dim + g.offset;
                double* dst = work.values.data() + i * val.dim + g.offset;
                std::copy(src, src + g.size, dst);
            }
            total_drop += baseline - exact_agreement(model.predict_dataset(work), val.labels);
        }
        // restore the block before moving on
        for (std::size_t i = 0; i < val.rows(); ++i) {
            const double* src = val.values.data() + i * val.dim + g.offset;
            double* dst = work.values.data() + i * val.dim + g.offset;
            std::copy(src, src + g.size, dst);
        }
        result.push_back({g.name, total_drop / static_cast<double>(repeats)});
    }
    std::stable_sort(result.begin(), result.end(),
                     [](const GroupImportance& a, const GroupImportance& b) {
                         return a.importance > b.importance;
                     });
    return result;
}

} // namespace triagekit
