#include <doctest.h>

#include <vector>

#include "test_support.hpp"
#include "triagekit/models/analysis.hpp"
#include "triagekit/models/boosted.hpp"

using namespace triagekit;

namespace {

Probs binary_row(double p0) { return Probs{p0, 1.0 - p0, 0, 0, 0, 0}; }

} // namespace

TEST_SUITE("analysis") {

TEST_CASE("threshold sweep picks the f1-maximizing cut") {
    const std::vector<Probs> probs{binary_row(0.9), binary_row(0.8), binary_row(0.2)};
    const ThresholdReport report = tune_thresholds(probs, {0, 0, 1});
    REQUIRE(report[0].defined);
    CHECK(report[0].threshold == 0.8);
    CHECK(report[0].f1 == 1.0);
    REQUIRE(report[1].defined);
    CHECK(report[1].threshold == 0.8);
    CHECK(report[1].f1 == 1.0);
    for (int c = 2; c < kNumClasses; ++c) CHECK(!report[static_cast<std::size_t>(c)].defined);
}

TEST_CASE("an inverted score still yields the best available cut") {
    // the positive case carries the lower probability
    const std::vector<Probs> probs{binary_row(0.6), binary_row(0.4)};
    const ThresholdReport report = tune_thresholds(probs, {1, 0});
    REQUIRE(report[0].defined);
    CHECK(report[0].threshold == 0.4);
    CHECK(report[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("equal maxima resolve toward the smaller threshold") {
    const std::vector<Probs> probs{binary_row(0.9), binary_row(0.5), binary_row(0.3),
                                   binary_row(0.1)};
    // f1 is 2/3 at cuts 0.9 and 0.1, lower in between
    const ThresholdReport report = tune_thresholds(probs, {0, 1, 1, 0});
    REQUIRE(report[0].defined);
    CHECK(report[0].threshold == 0.1);
    CHECK(report[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("threshold errors") {
    CHECK_THROWS_AS(tune_thresholds({binary_row(0.5)}, {0, 1}), DataError);
}

TEST_CASE("permuting the signal feature hurts the most") {
    const Dataset train = support::make_dataset(120, 5, 31, 3.0);
    const Dataset val = support::make_dataset(60, 5, 32, 3.0);
    TrainConfig cfg;
    cfg.rounds = 40;
    cfg.min_leaf = 5;
    const auto [model, curve] = train_boosted(train, val, cfg);

    const auto ranked = permutation_importance(model, val, 5, 7);
    REQUIRE(ranked.size() == val.groups.size());
    CHECK(ranked[0].name == "f0");
    CHECK(ranked[0].importance > 0.1);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        CHECK(ranked[i].importance <= ranked[0].importance);
        CHECK(ranked[i - 1].importance >= ranked[i].importance);
    }

    // the measurement is seeded
    const auto again = permutation_importance(model, val, 5, 7);
    REQUIRE(again.size() == ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        CHECK(again[i].name == ranked[i].name);
        CHECK(again[i].importance == ranked[i].importance);
    }
}

TEST_CASE("permutation importance argument errors") {
    const Dataset val = support::make_dataset(12, 3, 1);
    TrainConfig cfg;
    cfg.rounds = 1;
    const auto [model, curve] = train_boosted(val, val, cfg);
    CHECK_THROWS_AS(permutation_importance(model, val, 0, 1), ConfigError);
    Dataset empty;
    empty.schema_id = val.schema_id;
    empty.dim = val.dim;
    CHECK_THROWS_AS(permutation_importance(model, empty, 3, 1), DataError);
}

} // TEST_SUITE
