#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "test_support.hpp"
#include "triagekit/gold_standard.hpp"
#include "triagekit/rng.hpp"

using namespace triagekit;

TEST_SUITE("gold") {

TEST_CASE("consensus is the modal label") {
    const std::vector<ReviewerLabel> labels = {
        {"A", "r1", TriageLevel::T2}, {"A", "r2", TriageLevel::T2},
        {"A", "r3", TriageLevel::T4}, {"B", "r1", TriageLevel::T5},
    };
    const auto by_case = consensus(labels);
    CHECK(by_case.at("A") == TriageLevel::T2);
    CHECK(by_case.at("B") == TriageLevel::T5);
}

TEST_CASE("ties resolve to the most acute level") {
    const std::vector<ReviewerLabel> labels = {
        {"A", "r1", TriageLevel::T3B}, {"A", "r2", TriageLevel::T2},
        {"A", "r3", TriageLevel::T3B}, {"A", "r4", TriageLevel::T2},
    };
    CHECK(consensus(labels).at("A") == TriageLevel::T2);
}

TEST_CASE("reviewer order never changes the result") {
    std::vector<ReviewerLabel> labels;
    Rng rng(13);
    for (int c = 0; c < 10; ++c) {
        const int reviewers = 1 + static_cast<int>(rng.below(5));
        for (int r = 0; r < reviewers; ++r) {
            labels.push_back({"C" + std::to_string(c), "r" + std::to_string(r),
                              triage_from_rank(1 + static_cast<int>(rng.below(6)))});
        }
    }
    const auto base = consensus(labels);
    for (int trial = 0; trial < 20; ++trial) {
        rng.shuffle(labels);
        CHECK(consensus(labels) == base);
    }
}

TEST_CASE("duplicate reviewer votes are rejected") {
    const std::vector<ReviewerLabel> labels = {
        {"A", "r1", TriageLevel::T2}, {"A", "r1", TriageLevel::T3A}};
    CHECK_THROWS_AS(consensus(labels), DataError);
}

TEST_CASE("reviewer file parses and applies") {
    std::istringstream in(
        "case_id,reviewer_id,label\n"
        "C0,alice,3A\n"
        "C0,bob,3A\n"
        "C1,alice,1\n");
    const auto labels = ingest_reviewer_labels(in);
    REQUIRE(labels.size() == 3);
    CHECK(labels[0].label == TriageLevel::T3A);

    Cohort cohort = support::make_cohort({5, 5});
    apply_consensus(cohort, labels);
    CHECK(cohort.records[0].gold_triage == TriageLevel::T3A);
    CHECK(cohort.records[1].gold_triage == TriageLevel::T1);
}

TEST_CASE("uncovered records raise NoLabels") {
    Cohort cohort = support::make_cohort({5, 5});
    const std::vector<ReviewerLabel> labels = {{"C0", "alice", TriageLevel::T2}};
    CHECK_THROWS_AS(apply_consensus(cohort, labels), NoLabels);
}

TEST_CASE("malformed reviewer rows are rejected") {
    std::istringstream bad_header("case,reviewer,label\nC0,a,1\n");
    CHECK_THROWS_AS(ingest_reviewer_labels(bad_header), MalformedRow);
    std::istringstream bad_label("case_id,reviewer_id,label\nC0,a,9\n");
    CHECK_THROWS_AS(ingest_reviewer_labels(bad_label), MalformedRow);
    std::istringstream empty("case_id,reviewer_id,label\n");
    CHECK_THROWS_AS(ingest_reviewer_labels(empty), EmptySource);
}

} // TEST_SUITE
