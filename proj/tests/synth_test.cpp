#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "triagekit/cohort.hpp"

using namespace triagekit;

namespace {

std::string serialized(const Cohort& c) {
    std::ostringstream out;
    serialize_cohort(c, out, CohortFormat::DelimitedTable);
    return out.str();
}

} // namespace

TEST_SUITE("synth") {

TEST_CASE("reference cohort matches the published marginals") {
    const MarginalSpec spec = default_marginal_spec();
    const Cohort cohort = synthesize_cohort(spec, 657, 20240801);
    REQUIRE(cohort.records.size() == 657);
    CHECK(cohort.provenance == Provenance::Synthetic);

    // the nurse label moves at most two steps along the ranks the spec can
    // actually produce
    std::map<int, int> live_pos;
    for (int r = 1; r <= 6; ++r) {
        if (spec.triage_probs[static_cast<std::size_t>(r - 1)] > 0.0) {
            const int pos = static_cast<int>(live_pos.size());
            live_pos[r] = pos;
        }
    }

    double age_sum = 0;
    std::size_t t3b = 0, unspecified = 0, nurse_match = 0;
    std::map<std::string, int> ids;
    for (const auto& rec : cohort.records) {
        REQUIRE(rec.gold_triage.has_value());
        REQUIRE(rec.nurse_triage.has_value());
        REQUIRE(rec.history_text.has_value());
        CHECK(!rec.history_text->empty());
        CHECK(rec.age >= 18);
        CHECK(rec.age <= 105);
        CHECK(rec.vitals.dbp >= 30.0);
        CHECK(rec.vitals.spo2 <= 100.0);
        CHECK(rec.vitals.eva >= 0.0);
        CHECK(rec.vitals.eva <= 10.0);
        CHECK(rec.vitals.eva == std::floor(rec.vitals.eva)); // pain scored in whole points
        age_sum += rec.age;
        t3b += rec.gold_triage == TriageLevel::T3B;
        unspecified += rec.gemsa == GemsaCode::Unspecified;
        nurse_match += rec.nurse_triage == rec.gold_triage;
        ++ids[rec.case_id];
        REQUIRE(live_pos.count(triage_rank(*rec.nurse_triage)) == 1);
        REQUIRE(live_pos.count(triage_rank(*rec.gold_triage)) == 1);
        CHECK(std::abs(live_pos.at(triage_rank(*rec.nurse_triage)) -
                       live_pos.at(triage_rank(*rec.gold_triage))) <= 2);
    }
    CHECK(ids.size() == 657);
    CHECK(cohort.records.front().case_id == "P000001");
    CHECK(age_sum / 657.0 == doctest::Approx(42.6).epsilon(2.0 / 42.6));
    CHECK(std::abs(static_cast<double>(t3b) / 657.0 - 0.5388) < 0.04);
    // 18/657 unspecified pathway codes in expectation
    CHECK(static_cast<double>(unspecified) / 657.0 < 0.08);
    // the nurse kernel keeps the gold rank with the largest single weight
    CHECK(static_cast<double>(nurse_match) / 657.0 > 0.30);
}

TEST_CASE("labels correlate with the vitals that drive the latent score") {
    const Cohort cohort = synthesize_cohort(default_marginal_spec(), 657, 7);
    double hr_acute = 0, hr_mild = 0;
    std::size_t n_acute = 0, n_mild = 0;
    for (const auto& rec : cohort.records) {
        const int rank = triage_rank(*rec.gold_triage);
        if (rank <= 3) {
            hr_acute += rec.vitals.hr;
            ++n_acute;
        } else if (rank >= 5) {
            hr_mild += rec.vitals.hr;
            ++n_mild;
        }
    }
    REQUIRE(n_acute > 20);
    REQUIRE(n_mild > 20);
    CHECK(hr_acute / n_acute > hr_mild / n_mild + 2.0);
}

TEST_CASE("generation is deterministic in the seed") {
    const MarginalSpec spec = default_marginal_spec();
    CHECK(serialized(synthesize_cohort(spec, 120, 5)) ==
          serialized(synthesize_cohort(spec, 120, 5)));
    CHECK(serialized(synthesize_cohort(spec, 120, 5)) !=
          serialized(synthesize_cohort(spec, 120, 6)));
}

TEST_CASE("invalid specs are rejected with a reason") {
    MarginalSpec spec = default_marginal_spec();
    SUBCASE("negative sd") {
        spec.hr.sd = -1;
        CHECK_THROWS_AS(spec.validate(), InvalidSpec);
    }
    SUBCASE("proportions must sum to one") {
        spec.triage_probs[3] += 0.1;
        CHECK_THROWS_AS(spec.validate(), InvalidSpec);
    }
    SUBCASE("adult age floor") {
        spec.age.lower = 10;
        CHECK_THROWS_AS(spec.validate(), InvalidSpec);
    }
    SUBCASE("kernel must be a distribution") {
        spec.nurse_kernel[2] = 0.9;
        CHECK_THROWS_AS(spec.validate(), InvalidSpec);
    }
}

TEST_CASE("marginal spec json round-trips and accepts partial overrides") {
    const MarginalSpec spec = default_marginal_spec();
    std::ostringstream out;
    marginal_spec_to_json(spec, out);
    std::istringstream in(out.str());
    const MarginalSpec back = marginal_spec_from_json(in);
    CHECK(serialized(synthesize_cohort(back, 80, 3)) ==
          serialized(synthesize_cohort(spec, 80, 3)));

    std::istringstream partial("{\"noise_sd\": 2.5, \"cases_ignore\": 0}");
    CHECK_THROWS_AS(marginal_spec_from_json(partial), ConfigError);

    std::istringstream ok("{\"noise_sd\": 2.5}");
    const MarginalSpec overridden = marginal_spec_from_json(ok);
    CHECK(overridden.noise_sd == 2.5);
    CHECK(overridden.age.mean == spec.age.mean);

    std::istringstream garbage("{not json");
    CHECK_THROWS_AS(marginal_spec_from_json(garbage), ConfigError);
}

} // TEST_SUITE
