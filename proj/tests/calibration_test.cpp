#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_support.hpp"
#include "triagekit/calibration.hpp"
#include "triagekit/rng.hpp"

using namespace triagekit;

namespace {

PredictionSet constant_set(const Probs& row, std::size_t n, const std::string& name = "m") {
    std::vector<Probs> probs(n, row);
    return make_prediction_set(name, support::case_ids(n), std::move(probs));
}

} // namespace

TEST_SUITE("calibration") {

TEST_CASE("brier score anchor points") {
    const std::vector<int> gold{1, 2, 3, 4, 5, 6};
    const auto perfect = make_hard_prediction_set("m", support::case_ids(6), gold);
    CHECK(brier(perfect, gold) == 0.0);

    const auto wrong = make_hard_prediction_set("m", support::case_ids(6), {2, 1, 4, 3, 6, 5});
    CHECK(brier(wrong, gold) == 2.0);

    const Probs uniform{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
    const auto flat = constant_set(uniform, 6);
    CHECK(std::abs(brier(flat, gold) - 5.0 / 6.0) < 1e-12);
    CHECK(std::abs(brier(flat, gold, BrierVariant::PerComponentMean) - 5.0 / 36.0) < 1e-12);

    CHECK_THROWS_AS(brier(perfect, {1, 2}), LengthMismatch);
    CHECK(brier_variant_from_token("sum") == BrierVariant::SumOverClasses);
    CHECK(brier_variant_token(BrierVariant::PerComponentMean) == "mean");
    CHECK_THROWS_AS(brier_variant_from_token("median"), ConfigError);
}

TEST_CASE("predicting the prevalence beats predicting uniform") {
    // skewed gold: class 1 dominates
    const std::vector<int> gold{1, 1, 1, 1, 1, 1, 2, 2, 3, 6};
    Probs prevalence{};
    for (int g : gold) prevalence[static_cast<std::size_t>(g - 1)] += 1.0 / gold.size();
    const Probs uniform{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};

    const double b_prev = brier(constant_set(prevalence, gold.size()), gold);
    const double b_flat = brier(constant_set(uniform, gold.size()), gold);
    CHECK(b_prev < b_flat);
}

TEST_CASE("a constant predictor collapses to one calibration bin") {
    const std::vector<int> gold{1, 1, 2, 3, 1, 4};
    const auto set = constant_set(support::soft_probs(1, 0.4), gold.size());
    const auto table = calibration_table(set, gold, 1, 10);
    REQUIRE(table.size() == 1);
    CHECK(table[0].bin == 0);
    CHECK(table[0].count == gold.size());
    CHECK(table[0].positives == 3);
    CHECK(table[0].observed == 0.5);
    CHECK(table[0].mean_predicted == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(table[0].gap == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("one requested bin reports the class prevalence") {
    Rng rng(4);
    std::vector<int> gold;
    std::vector<Probs> probs;
    for (int i = 0; i < 25; ++i) {
        gold.push_back(1 + static_cast<int>(rng.uniform() * 6));
        Probs p{};
        for (double& v : p) v = rng.uniform() + 0.01;
        probs.push_back(p);
    }
    const auto set = make_prediction_set("m", support::case_ids(gold.size()), probs);
    const auto table = calibration_table(set, gold, 3, 1);
    REQUIRE(table.size() == 1);
    std::size_t want = 0;
    for (int g : gold) want += g == 3 ? 1 : 0;
    CHECK(table[0].positives == want);
    CHECK(table[0].observed ==
          static_cast<double>(want) / static_cast<double>(gold.size()));
}

TEST_CASE("bin bookkeeping holds on random inputs") {
    Rng rng(29);
    for (int it = 0; it < 20; ++it) {
        const std::size_t n = 5 + static_cast<std::size_t>(rng.uniform() * 120);
        std::vector<int> gold(n);
        std::vector<Probs> probs(n);
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = 1 + static_cast<int>(rng.uniform() * 6);
            for (double& v : probs[i]) v = rng.uniform() + 1e-3;
        }
        const auto set = make_prediction_set("m", support::case_ids(n), probs);
        const int rank = 1 + static_cast<int>(rng.uniform() * 6);
        const auto table = calibration_table(set, gold, rank, 10);

        REQUIRE(!table.empty());
        CHECK(table.size() <= 10);
        std::size_t count_sum = 0, pos_sum = 0;
        for (std::size_t b = 0; b < table.size(); ++b) {
            CHECK(table[b].bin == static_cast<int>(b));
            CHECK(table[b].count > 0);
            count_sum += table[b].count;
            pos_sum += table[b].positives;
            CHECK(table[b].observed ==
                  static_cast<double>(table[b].positives) / static_cast<double>(table[b].count));
            CHECK(table[b].gap == table[b].observed - table[b].mean_predicted);
            if (b > 0) CHECK(table[b].mean_predicted >= table[b - 1].mean_predicted);
        }
        CHECK(count_sum == n);

        // count-weighted observed frequency is exactly the class prevalence
        std::size_t prevalence_count = 0;
        for (int g : gold) prevalence_count += g == rank ? 1 : 0;
        CHECK(pos_sum == prevalence_count);
        CHECK(static_cast<double>(pos_sum) / static_cast<double>(n) ==
              static_cast<double>(prevalence_count) / static_cast<double>(n));
    }
}

TEST_CASE("ties never straddle a bin boundary") {
    // two distinct probability values split 7 / 5 across twelve cases
    std::vector<Probs> probs;
    std::vector<int> gold;
    for (int i = 0; i < 12; ++i) {
        probs.push_back(support::soft_probs(1, i < 7 ? 0.2 : 0.8));
        gold.push_back(i % 2 == 0 ? 1 : 2);
    }
    const auto set = make_prediction_set("m", support::case_ids(12), probs);
    const auto table = calibration_table(set, gold, 1, 10);
    REQUIRE(table.size() == 2);
    CHECK(table[0].count == 7);
    CHECK(table[1].count == 5);
    CHECK(table[0].mean_predicted == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(table[1].mean_predicted == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("well-calibrated scores show small gaps") {
    Rng rng(611);
    const std::size_t n = 2000;
    std::vector<int> gold(n);
    std::vector<Probs> probs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = rng.uniform();
        gold[i] = rng.uniform() < p ? 1 : 2;
        probs[i] = Probs{p, 1.0 - p, 0, 0, 0, 0};
    }
    const auto set = make_prediction_set("m", support::case_ids(n), probs);
    for (const auto& bin : calibration_table(set, gold, 1, 10)) {
        if (bin.count < 50) continue;
        CHECK(std::abs(bin.gap) < 0.1);
    }
}

TEST_CASE("calibration argument errors") {
    const std::vector<int> gold{1, 2};
    const auto set = make_hard_prediction_set("m", support::case_ids(2), {1, 2});
    CHECK_THROWS_AS(calibration_table(set, gold, 0, 10), DataError);
    CHECK_THROWS_AS(calibration_table(set, gold, 7, 10), DataError);
    CHECK_THROWS_AS(calibration_table(set, gold, 1, 0), ConfigError);
    CHECK_THROWS_AS(calibration_table(set, {1}, 1, 10), LengthMismatch);
}

TEST_CASE("probability surfaces on hard predictions mirror the confusion rows") {
    const std::vector<int> gold{1, 1, 1, 2, 2, 3};
    const auto set = make_hard_prediction_set("m", support::case_ids(6), {1, 1, 2, 2, 2, 3});
    const auto s = probability_surfaces(set, gold);

    CHECK(s.defined[0]);
    CHECK(s.heatmap[0][0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(s.heatmap[0][1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(s.heatmap[1][1] == 1.0);
    CHECK(s.heatmap[2][2] == 1.0);

    for (int t = 3; t < kNumClasses; ++t) {
        CHECK(!s.defined[static_cast<std::size_t>(t)]);
        for (double v : s.heatmap[static_cast<std::size_t>(t)]) CHECK(std::isnan(v));
    }

    // ridge lists carry the raw one-hot probabilities
    CHECK(s.ridge[0][0] == std::vector<double>{1, 1, 0});
    CHECK(s.ridge[0][1] == std::vector<double>{0, 0, 1});
    CHECK(s.ridge[3][0].empty());
}

TEST_CASE("defined heatmap rows sum to one") {
    Rng rng(17);
    const std::size_t n = 40;
    std::vector<int> gold(n);
    std::vector<Probs> probs(n);
    for (std::size_t i = 0; i < n; ++i) {
        gold[i] = 1 + static_cast<int>(rng.uniform() * 6);
        for (double& v : probs[i]) v = rng.uniform() + 1e-3;
    }
    const auto set = make_prediction_set("m", support::case_ids(n), probs);
    const auto s = probability_surfaces(set, gold);
    for (int t = 0; t < kNumClasses; ++t) {
        if (!s.defined[static_cast<std::size_t>(t)]) continue;
        double sum = 0;
        for (double v : s.heatmap[static_cast<std::size_t>(t)]) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("a perfect predictor yields the identity heatmap") {
    const std::vector<int> gold{1, 2, 3, 4, 5, 6, 3, 5};
    const auto set = make_hard_prediction_set("m", support::case_ids(8), gold);
    const auto s = probability_surfaces(set, gold);
    for (int t = 0; t < kNumClasses; ++t) {
        REQUIRE(s.defined[static_cast<std::size_t>(t)]);
        for (int p = 0; p < kNumClasses; ++p) {
            CHECK(s.heatmap[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] ==
                  (t == p ? 1.0 : 0.0));
        }
    }
}

} // TEST_SUITE
