#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_support.hpp"
#include "triagekit/models/boosted.hpp"

using namespace triagekit;

namespace {

TrainConfig boosted_config(std::size_t rounds) {
    TrainConfig cfg;
    cfg.rounds = rounds;
    cfg.max_depth = 3;
    cfg.min_leaf = 5;
    cfg.shrinkage = 0.1;
    cfg.leaf_l2 = 1.0;
    return cfg;
}

// one feature, two point masses: five rows at 0 labeled rank 1, five at 1
// labeled rank 2
Dataset two_cluster_dataset() {
    Dataset ds;
    ds.schema_id = "test-schema";
    ds.dim = 1;
    for (int i = 0; i < 10; ++i) {
        ds.values.push_back(i < 5 ? 0.0 : 1.0);
        ds.labels.push_back(i < 5 ? 0 : 1);
        ds.case_ids.push_back("R" + std::to_string(i));
    }
    ds.groups.push_back({"f0", 0, 1});
    return ds;
}

} // namespace

TEST_SUITE("boosted") {

TEST_CASE("with no rounds the model is the class prior") {
    const Dataset ds = support::make_dataset(12, 3, 4); // perfectly balanced labels
    const auto [model, curve] = train_boosted(ds, ds, boosted_config(0));
    CHECK(curve.empty());
    const Probs p = model.predict_row(ds.row(0));
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("classes absent from training receive zero probability") {
    Dataset ds = two_cluster_dataset();
    const auto [model, curve] = train_boosted(ds, ds, boosted_config(0));
    const Probs p = model.predict_row(std::vector<double>{0.5});
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
    for (int c = 2; c < kNumClasses; ++c) CHECK(p[static_cast<std::size_t>(c)] == 0.0);
}

TEST_CASE("a clean two-cluster feature splits at the midpoint") {
    const Dataset ds = two_cluster_dataset();
    auto cfg = boosted_config(1);
    cfg.max_depth = 1;
    const auto [model, curve] = train_boosted(ds, ds, cfg);
    REQUIRE(model.trees().size() == 1);
    const RegressionTree& t = model.trees()[0][0];
    REQUIRE(t.feature[0] == 0);
    CHECK(t.threshold[0] == 0.5);
    // the split sends each cluster toward its own class
    CHECK(argmax_rank(model.predict_row(std::vector<double>{0.0})) == 1);
    CHECK(argmax_rank(model.predict_row(std::vector<double>{1.0})) == 2);
}

TEST_CASE("training loss never increases under a modest step") {
    for (std::uint64_t seed : {3ULL, 8ULL, 21ULL}) {
        const Dataset train = support::make_dataset(90, 4, seed);
        const Dataset val = support::make_dataset(30, 4, seed + 100);
        const auto [model, curve] = train_boosted(train, val, boosted_config(25));
        REQUIRE(curve.size() == 25);
        for (std::size_t i = 1; i < curve.size(); ++i) {
            CHECK(curve[i].train_logloss <= curve[i - 1].train_logloss + 1e-9);
        }
        CHECK(curve.back().train_accuracy > 0.8);
        CHECK(model.kind() == "boosted");
    }
}

TEST_CASE("training is deterministic") {
    const Dataset train = support::make_dataset(60, 3, 7);
    const Dataset val = support::make_dataset(24, 3, 8);
    const auto [a, curve_a] = train_boosted(train, val, boosted_config(10));
    const auto [b, curve_b] = train_boosted(train, val, boosted_config(10));
    const auto pa = a.predict_dataset(val);
    const auto pb = b.predict_dataset(val);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
    REQUIRE(curve_a.size() == curve_b.size());
    for (std::size_t i = 0; i < curve_a.size(); ++i) {
        CHECK(curve_a[i].train_logloss == curve_b[i].train_logloss);
        CHECK(curve_a[i].val_logloss == curve_b[i].val_logloss);
    }
}

TEST_CASE("schema and shape violations are rejected") {
    const Dataset train = support::make_dataset(24, 3, 1);
    Dataset val = support::make_dataset(12, 3, 2);
    val.schema_id = "different";
    CHECK_THROWS_AS(train_boosted(train, val, boosted_config(2)), SchemaMismatch);

    const auto [model, curve] = train_boosted(train, train, boosted_config(2));
    CHECK_THROWS_AS(model.predict_row(std::vector<double>{1.0, 2.0}), SchemaMismatch);
}

} // TEST_SUITE
