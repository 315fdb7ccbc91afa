// Release gate: each check prints exactly one PASS/FAIL line and the binary
// exits with the number of failures. Tolerances are pinned here, not shared
// with the unit suites.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "triagekit/agreement.hpp"
#include "triagekit/calibration.hpp"
#include "triagekit/cohort.hpp"
#include "triagekit/features.hpp"
#include "triagekit/metrics.hpp"
#include "triagekit/models/boosted.hpp"
#include "triagekit/models/feedforward.hpp"
#include "triagekit/models/jepa.hpp"
#include "triagekit/report.hpp"
#include "triagekit/rng.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

using namespace triagekit;
namespace fs = std::filesystem;

namespace {

void require(bool ok, const std::string& detail) {
    if (!ok) throw std::runtime_error(detail);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// -----------------------------------------------------------------------
// 1. composite ranking fixture and zero-sum invariant
// -----------------------------------------------------------------------

void check_composite_fixture() {
    // reference scores reported for one four-process comparison plus the
    // perfect row; they must cancel and their order must be reproducible
    // from the rounded per-process metrics alone
    const std::vector<double> reference = {4.902, 2.514, 0.438, -3.511, -4.343};
    double ref_sum = 0;
    for (double v : reference) ref_sum += v;
    require(std::abs(ref_sum) < 1e-9, "reference composites sum to " + fmt(ref_sum));

    const std::vector<ProcessMetricsRow> rows = {
        {"llm", 0.228, 0.790, 0.800, 0.802},
        {"jepa", 0.401, 0.979, 0.560, 0.602},
        {"nlp", 0.637, 1.180, 0.370, 0.005},
        {"nurse", 1.393, 1.834, 0.080, 0.024},
    };
    const auto entries = composite_ranking(rows, true);
    const std::vector<std::string> want = {"gold", "llm", "jepa", "nlp", "nurse"};
    require(entries.size() == want.size(), "ranking size " + std::to_string(entries.size()));
    for (std::size_t i = 0; i < want.size(); ++i) {
        require(entries[i].process == want[i],
                "position " + std::to_string(i + 1) + " is " + entries[i].process +
                    ", want " + want[i]);
    }
    double sum = 0;
    for (const auto& e : entries) sum += e.composite;
    require(std::abs(sum) < 1e-9, "fixture composites sum to " + fmt(sum));

    // zero-sum must hold on any normalization set
    Rng rng(1211);
    for (int t = 0; t < 25; ++t) {
        const std::size_t k = 2 + rng.below(7);
        std::vector<ProcessMetricsRow> random_rows;
        for (std::size_t i = 0; i < k; ++i) {
            random_rows.push_back({"p" + std::to_string(i), 2.0 * rng.uniform(),
                                   2.0 * rng.uniform(), 2.0 * rng.uniform() - 1.0,
                                   2.0 * rng.uniform() - 1.0});
        }
        const auto es = composite_ranking(random_rows, t % 2 == 0);
        double s = 0;
        for (const auto& e : es) s += e.composite;
        require(std::abs(s) < 1e-9, "random composites sum to " + fmt(s));
        for (std::size_t i = 1; i < es.size(); ++i) {
            require(es[i - 1].composite >= es[i].composite, "ranking not descending");
        }
    }
}

// -----------------------------------------------------------------------
// 2. auc and kappa match naive oracles
// -----------------------------------------------------------------------

void check_oracle_agreement() {
    Rng rng(414243);
    for (int t = 0; t < 200; ++t) {
        // tie-corrected AUC against pair counting, on a coarse grid of scores
        const std::size_t n_pos = 1 + rng.below(25);
        const std::size_t n_neg = 1 + rng.below(25);
        std::vector<double> pos(n_pos), neg(n_neg), scores;
        std::vector<bool> flags;
        for (auto& v : pos) v = static_cast<double>(rng.below(9)) / 8.0;
        for (auto& v : neg) v = static_cast<double>(rng.below(9)) / 8.0;
        for (double v : pos) { scores.push_back(v); flags.push_back(true); }
        for (double v : neg) { scores.push_back(v); flags.push_back(false); }
        const double got = auc_delong(scores, flags).auc;
        const double want = oracle::pair_count_auc(pos, neg);
        require(std::abs(got - want) <= 1e-12,
                "auc " + fmt(got) + " vs oracle " + fmt(want) + " at t=" + std::to_string(t));

        // weighted kappa against the dense confusion-matrix formula
        const std::size_t m = 2 + rng.below(49);
        std::vector<int> pred(m), gold(m);
        for (auto& r : pred) r = 1 + static_cast<int>(rng.below(6));
        for (auto& r : gold) r = 1 + static_cast<int>(rng.below(6));
        for (bool quadratic : {true, false}) {
            const double oracle_k =
                oracle::dense_weighted_kappa(pred, gold, kNumClasses, quadratic);
            const auto weighting =
                quadratic ? KappaWeighting::Quadratic : KappaWeighting::Linear;
            if (std::isnan(oracle_k)) {
                try {
                    weighted_kappa(pred, gold, weighting);
                    require(false, "kappa accepted degenerate marginals at t=" +
                                       std::to_string(t));
                } catch (const DegenerateMarginals&) {
                }
            } else {
                const double got_k = weighted_kappa(pred, gold, weighting);
                require(std::abs(got_k - oracle_k) <= 1e-12,
                        "kappa " + fmt(got_k) + " vs oracle " + fmt(oracle_k) + " at t=" +
                            std::to_string(t));
            }
        }
    }
}

// -----------------------------------------------------------------------
// 3. perfect predictor hits exact metric anchors
// -----------------------------------------------------------------------

void check_perfect_predictor() {
    std::vector<int> gold;
    for (int i = 0; i < 24; ++i) gold.push_back(i % kNumClasses + 1);
    Rng rng(3);
    rng.shuffle(gold);

    std::vector<std::string> ids;
    for (std::size_t i = 0; i < gold.size(); ++i) ids.push_back("A" + std::to_string(i));
    const PredictionSet set = make_hard_prediction_set("perfect", ids, gold);

    const auto [mae, rmse] = ordinal_error(gold, gold);
    require(mae == 0.0 && rmse == 0.0, "error (" + fmt(mae) + ", " + fmt(rmse) + ")");
    require(weighted_kappa(gold, gold, KappaWeighting::Quadratic) == 1.0, "quadratic kappa");
    require(weighted_kappa(gold, gold, KappaWeighting::Linear) == 1.0, "linear kappa");
    require(rank_correlation(gold, gold) == 1.0, "spearman");

    const F1Result f1 = f1_suite(gold, gold);
    require(f1.micro == 1.0 && f1.macro == 1.0, "f1 micro/macro");
    for (int c = 0; c < kNumClasses; ++c) {
        require(f1.per_class[static_cast<std::size_t>(c)] == 1.0 &&
                    f1.in_macro[static_cast<std::size_t>(c)],
                "f1 class " + std::to_string(c + 1));
    }

    const auto [exact, near] = agreement_rates(gold, gold);
    require(exact == 1.0 && near == 1.0, "agreement rates");
    require(brier(set, gold, BrierVariant::SumOverClasses) == 0.0, "brier");

    const RocAnalysis roc = roc_analysis(set, gold);
    for (int c = 0; c < kNumClasses; ++c) {
        const auto& cls = roc.per_class[static_cast<std::size_t>(c)];
        require(cls.computable && cls.auc.auc == 1.0, "auc class " + std::to_string(c + 1));
    }

    const ProbabilitySurfaces surfaces = probability_surfaces(set, gold);
    for (int t = 0; t < kNumClasses; ++t) {
        require(surfaces.defined[static_cast<std::size_t>(t)],
                "heatmap row " + std::to_string(t + 1));
        for (int p = 0; p < kNumClasses; ++p) {
            const double v =
                surfaces.heatmap[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
            require(v == (t == p ? 1.0 : 0.0), "heatmap cell (" + std::to_string(t + 1) + "," +
                                                   std::to_string(p + 1) + ") = " + fmt(v));
        }
    }
}

// -----------------------------------------------------------------------
// 4. uniform and degenerate closed forms
// -----------------------------------------------------------------------

void check_closed_forms() {
    const std::size_t n = 18;
    std::vector<int> gold;
    std::vector<std::string> ids;
    std::vector<Probs> uniform(n);
    std::vector<int> labels0(n);
    for (std::size_t i = 0; i < n; ++i) {
        gold.push_back(static_cast<int>(i % kNumClasses) + 1);
        labels0[i] = static_cast<int>(i % kNumClasses);
        ids.push_back("U" + std::to_string(i));
        uniform[i].fill(1.0 / kNumClasses);
    }
    const PredictionSet set = make_prediction_set("uniform", ids, uniform);

    const double b = brier(set, gold, BrierVariant::SumOverClasses);
    require(std::abs(b - 5.0 / 6.0) <= 1e-12, "uniform brier " + fmt(b));

    const double ll = mean_logloss(uniform, labels0);
    require(std::abs(ll - std::log(6.0)) <= 1e-12, "uniform logloss " + fmt(ll));

    for (double gamma : {1.0, 2.5}) {
        const std::vector<double> batch(4 * 3, 0.7); // four identical embeddings
        const double v = vicreg_variance_term(batch, 4, 3, gamma);
        require(std::abs(v - gamma) <= 1e-12,
                "variance hinge " + fmt(v) + " for gamma " + fmt(gamma));
    }
}

// -----------------------------------------------------------------------
// 5. analytic gradients match central differences
// -----------------------------------------------------------------------

template <typename ModelT, typename Structure>
void check_gradient(const Structure& structure, const Dataset& ds, std::uint64_t seed,
                    const char* label) {
    ModelT model(ds.schema_id, structure);
    Rng rng(seed);
    std::vector<double> params = model.parameters();
    for (auto& p : params) p = 0.3 * rng.gaussian();
    model.set_parameters(params);

    std::vector<std::size_t> rows(ds.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;

    const std::vector<double> analytic = model.batch_gradient(ds, rows);
    const std::vector<double> numeric = oracle::central_difference(
        [&](const std::vector<double>& p) {
            ModelT probe(ds.schema_id, structure);
            probe.set_parameters(p);
            return probe.batch_loss(ds, rows);
        },
        params, 1e-5);

    require(analytic.size() == numeric.size(), std::string(label) + ": gradient size");
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double rel =
            std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(analytic[i]));
        require(rel <= 1e-4, std::string(label) + ": parameter " + std::to_string(i) +
                                 " analytic " + fmt(analytic[i]) + " numeric " +
                                 fmt(numeric[i]));
    }
}

void check_gradients() {
    const Dataset ds = support::make_dataset(10, 5, 99, 2.0);

    FeedForwardModel::Structure ff;
    ff.input = ds.dim;
    ff.hidden1 = 8;
    ff.hidden2 = 6;
    ff.dropout = 0.0;
    ff.l2 = 1e-4;
    check_gradient<FeedForwardModel>(ff, ds, 17, "feedforward");

    JepaModel::Structure je;
    je.input = ds.dim;
    je.hidden = 7;
    je.embed = 4;
    je.lambda_inv = 2.0;
    je.mu_var = 3.0;
    je.nu_cov = 1.5;
    je.gamma = 1.0;
    check_gradient<JepaModel>(je, ds, 19, "jepa");
}

// -----------------------------------------------------------------------
// 6. small cohorts overfit with a clear generalization gap
// -----------------------------------------------------------------------

void check_overfit_gap() {
    MarginalSpec spec = default_marginal_spec();
    spec.noise_sd = 4.0; // drown the label link so memorization cannot generalize
    const Cohort cohort = synthesize_cohort(spec, 128, 606);
    const SplitResult split = stratified_split(cohort, 0.5, LabelSelector::GoldTriage, 606);
    require(split.train.records.size() == 64 && split.validation.records.size() == 64,
            "split sizes " + std::to_string(split.train.records.size()) + "/" +
                std::to_string(split.validation.records.size()));

    const EncoderSchema schema = fit_schema(split.train, 64, 606);
    const Dataset train =
        build_dataset(split.train, schema, LabelSelector::GoldTriage, InputVariant::Both);
    const Dataset val =
        build_dataset(split.validation, schema, LabelSelector::GoldTriage, InputVariant::Both);

    const auto gap_check = [&](const Model& model, const char* label) {
        const double train_acc = exact_agreement(model.predict_dataset(train), train.labels);
        const double val_acc = exact_agreement(model.predict_dataset(val), val.labels);
        require(train_acc >= 0.95, std::string(label) + " train accuracy " + fmt(train_acc));
        require(val_acc <= train_acc - 0.15,
                std::string(label) + " gap: train " + fmt(train_acc) + " val " + fmt(val_acc));
    };

    TrainConfig ff;
    ff.seed = 1;
    ff.epochs = 400;
    ff.batch_size = 16;
    ff.hidden1 = 64;
    ff.hidden2 = 32;
    ff.learning_rate = 0.25;
    ff.dropout = 0.0;
    ff.l2 = 0.0;
    gap_check(train_feedforward(train, val, ff).first, "feedforward");

    TrainConfig bo;
    bo.seed = 1;
    bo.rounds = 250;
    bo.max_depth = 5;
    bo.min_leaf = 1;
    bo.shrinkage = 0.3;
    bo.leaf_l2 = 0.1;
    gap_check(train_boosted(train, val, bo).first, "boosted");
}

// -----------------------------------------------------------------------
// 7. stratified split hits exact sizes
// -----------------------------------------------------------------------

void check_split_sizes() {
    const Cohort cohort = synthesize_cohort(default_marginal_spec(), 657, 424242);
    const SplitResult split = stratified_split(cohort, 0.8, LabelSelector::GoldTriage, 99);
    require(split.train.records.size() == 526,
            "train size " + std::to_string(split.train.records.size()));
    require(split.validation.records.size() == 131,
            "validation size " + std::to_string(split.validation.records.size()));

    std::array<double, kNumClasses> total{}, in_train{};
    for (const auto& rec : cohort.records) {
        total[static_cast<std::size_t>(*selected_rank(rec, LabelSelector::GoldTriage) - 1)] += 1;
    }
    for (const auto& rec : split.train.records) {
        in_train[static_cast<std::size_t>(*selected_rank(rec, LabelSelector::GoldTriage) - 1)] +=
            1;
    }
    for (int c = 0; c < kNumClasses; ++c) {
        const auto i = static_cast<std::size_t>(c);
        const double deviation = std::abs(in_train[i] - 0.8 * total[i]);
        require(deviation <= 1.0 + 1e-9, "class " + std::to_string(c + 1) + " deviation " +
                                             fmt(deviation) + " (" + fmt(in_train[i]) + " of " +
                                             fmt(total[i]) + ")");
    }
}

// -----------------------------------------------------------------------
// 8. calibration bins conserve counts and prevalence
// -----------------------------------------------------------------------

void check_calibration_bookkeeping() {
    Rng rng(888);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = 50 + rng.below(400);
        std::vector<Probs> probs(n);
        std::vector<int> gold(n);
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0;
            for (auto& v : probs[i]) { v = rng.uniform_pos(); sum += v; }
            for (auto& v : probs[i]) v /= sum;
            gold[i] = 1 + static_cast<int>(rng.below(6));
            ids.push_back("K" + std::to_string(i));
        }
        const PredictionSet set = make_prediction_set("random", ids, probs);

        for (int rank = 1; rank <= kNumClasses; ++rank) {
            std::size_t prevalence = 0;
            for (int g : gold) prevalence += g == rank ? 1 : 0;
            const auto bins = calibration_table(set, gold, rank, 10);
            std::size_t count_sum = 0, positive_sum = 0;
            for (const auto& bin : bins) {
                count_sum += bin.count;
                positive_sum += bin.positives;
            }
            require(count_sum == n, "bin counts cover " + std::to_string(count_sum) + " of " +
                                        std::to_string(n));
            require(positive_sum == prevalence,
                    "bin positives " + std::to_string(positive_sum) + " vs prevalence " +
                        std::to_string(prevalence));
            // identical integer ratios: the count-weighted mean of the
            // observed frequencies is the prevalence, with no rounding slack
            const double weighted_mean =
                static_cast<double>(positive_sum) / static_cast<double>(count_sum);
            const double prevalence_rate =
                static_cast<double>(prevalence) / static_cast<double>(n);
            require(weighted_mean == prevalence_rate, "weighted mean " + fmt(weighted_mean) +
                                                          " vs prevalence rate " +
                                                          fmt(prevalence_rate));
        }
    }

    // a well-calibrated source lands every bin near the diagonal
    const std::size_t n = 10000;
    std::vector<Probs> probs(n);
    std::vector<int> gold(n);
    std::vector<std::string> ids;
    Rng brng(20240606);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = brng.uniform();
        probs[i] = {p, 1.0 - p, 0.0, 0.0, 0.0, 0.0};
        gold[i] = brng.uniform() < p ? 1 : 2;
        ids.push_back("B" + std::to_string(i));
    }
    const PredictionSet set = make_prediction_set("bernoulli", ids, probs);
    const auto bins = calibration_table(set, gold, 1, 10);
    require(bins.size() == 10, "bernoulli bins " + std::to_string(bins.size()));
    for (const auto& bin : bins) {
        require(std::abs(bin.gap) < 0.05,
                "bin " + std::to_string(bin.bin) + " gap " + fmt(bin.gap));
    }
}

// -----------------------------------------------------------------------
// 9. auc interval coverage near nominal
// -----------------------------------------------------------------------

void check_interval_coverage() {
    // positives ~ N(1,1), negatives ~ N(0,1): the true separation is
    // Phi(1/sqrt(2)), and the 95% interval should cover it about 95% of
    // the time
    const double true_auc = 0.5 * std::erfc(-0.5);
    Rng rng(20260814);
    const int replicates = 500;
    int covered = 0;
    for (int t = 0; t < replicates; ++t) {
        std::vector<double> scores;
        std::vector<bool> flags;
        for (int i = 0; i < 100; ++i) {
            scores.push_back(1.0 + rng.gaussian());
            flags.push_back(true);
        }
        for (int i = 0; i < 100; ++i) {
            scores.push_back(rng.gaussian());
            flags.push_back(false);
        }
        const AucEstimate est = auc_delong(scores, flags, 0.05);
        if (est.ci_lower <= true_auc && true_auc <= est.ci_upper) ++covered;
    }
    const double coverage = static_cast<double>(covered) / replicates;
    require(coverage >= 0.92 && coverage <= 0.98, "coverage " + fmt(coverage));
}

// -----------------------------------------------------------------------
// 10. identical runs produce identical bytes
// -----------------------------------------------------------------------

void check_run_determinism() {
    const auto configure = [](const std::string& out_dir) {
        RunConfig cfg;
        cfg.cases = 90;
        cfg.train_fraction = 0.7;
        cfg.seed = 42;
        cfg.out_dir = out_dir;
        cfg.text_dim = 16;
        cfg.bins = 5;
        cfg.importance_repeats = 2;
        // enough optimization that no model degenerates to a single
        // predicted rank, which would leave rank correlation undefined
        cfg.train.epochs = 20;
        cfg.train.batch_size = 16;
        cfg.train.hidden1 = 8;
        cfg.train.hidden2 = 6;
        cfg.train.rounds = 20;
        cfg.train.max_depth = 2;
        cfg.train.min_leaf = 5;
        cfg.train.encoder_hidden = 6;
        cfg.train.embed_dim = 4;
        return cfg;
    };

    const fs::path dir_a = "acceptance_run_a";
    const fs::path dir_b = "acceptance_run_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    const RunArtifacts a = evaluate_run(configure(dir_a.string()));
    const RunArtifacts b = evaluate_run(configure(dir_b.string()));

    std::map<std::string, std::string> sums_b;
    for (const auto& art : b.artifacts) sums_b[art.name] = art.checksum;
    require(a.artifacts.size() == sums_b.size(),
            "artifact counts " + std::to_string(a.artifacts.size()) + " vs " +
                std::to_string(sums_b.size()));

    const auto slurp = [](const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    for (const auto& art : a.artifacts) {
        if (art.name == "manifest.json") continue; // carries a wall-clock stamp
        require(sums_b.count(art.name) == 1, art.name + " missing from the second run");
        require(sums_b.at(art.name) == art.checksum, art.name + " differs between runs");
        require(slurp(dir_a / art.name) == slurp(dir_b / art.name),
                art.name + " bytes differ between runs");
    }

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

// -----------------------------------------------------------------------

struct Criterion {
    const char* name;
    double budget_seconds; // 0 = untimed
    std::function<void()> body;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"composite ranking fixture and zero-sum invariant", 1.0, check_composite_fixture},
        {"auc and kappa match naive oracles", 10.0, check_oracle_agreement},
        {"perfect predictor hits exact metric anchors", 0.0, check_perfect_predictor},
        {"uniform and degenerate closed forms", 0.0, check_closed_forms},
        {"analytic gradients match central differences", 30.0, check_gradients},
        {"small cohorts overfit with a clear generalization gap", 120.0, check_overfit_gap},
        {"stratified split hits exact sizes", 0.0, check_split_sizes},
        {"calibration bins conserve counts and prevalence", 30.0,
         check_calibration_bookkeeping},
        {"auc interval coverage near nominal", 120.0, check_interval_coverage},
        {"identical runs produce identical bytes", 120.0, check_run_determinism},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        try {
            c.body();
        } catch (const std::exception& e) {
            detail = e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (detail.empty() && c.budget_seconds > 0 && elapsed > c.budget_seconds) {
            detail = "took " + fmt(elapsed) + "s, budget " + fmt(c.budget_seconds) + "s";
        }
        if (detail.empty()) {
            std::printf("PASS %2zu. %s (%.2fs)\n", i + 1, c.name, elapsed);
        } else {
            std::printf("FAIL %2zu. %s — %s (%.2fs)\n", i + 1, c.name, detail.c_str(), elapsed);
            ++failures;
        }
    }
    return failures;
}
