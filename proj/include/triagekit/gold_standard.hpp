#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "triagekit/cohort.hpp"

namespace triagekit {

/// One reviewer's triage call for one case.
struct ReviewerLabel {
    std::string case_id;
    std::string reviewer_id;
    TriageLevel label = TriageLevel::T5;
};

struct NoLabels : DataError {
    explicit NoLabels(const std::string& id);
    std::string case_id;
};

/// Modal label per case; ties resolve toward the most acute (lowest rank)
/// tied label. Reviewer order never matters. (case_id, reviewer_id) pairs
/// must be unique.
std::map<std::string, TriageLevel> consensus(const std::vector<ReviewerLabel>& labels);

/// Delimited table with header case_id,reviewer_id,label.
std::vector<ReviewerLabel> ingest_reviewer_labels(std::istream& in);
std::vector<ReviewerLabel> ingest_reviewer_labels_file(const std::string& path);

/// Overwrite gold_triage on every record from the reviewers' consensus.
/// Throws NoLabels for a record no reviewer covered.
void apply_consensus(Cohort& cohort, const std::vector<ReviewerLabel>& labels);

} // namespace triagekit
