#include "triagekit/gold_standard.hpp"

#include <array>
#include <fstream>
#include <set>

#include "triagekit/detail/csv.hpp"

namespace triagekit {

NoLabels::NoLabels(const std::string& id)
    : DataError("no reviewer labels for case: " + id), case_id(id) {}

std::map<std::string, TriageLevel> consensus(const std::vector<ReviewerLabel>& labels) {
    std::set<std::pair<std::string, std::string>> seen;
    std::map<std::string, std::array<int, kNumClasses>> counts;
    for (const auto& l : labels) {
        if (!seen.emplace(l.case_id, l.reviewer_id).second) {
            throw DataError("duplicate reviewer label: " + l.case_id + "/" + l.reviewer_id);
        }
        auto& c = counts.try_emplace(l.case_id).first->second;
        ++c[static_cast<std::size_t>(triage_rank(l.label) - 1)];
    }

    std::map<std::string, TriageLevel> result;
    for (const auto& [case_id, c] : counts) {
        int best = 0;
        for (int k = 1; k < kNumClasses; ++k) {
            if (c[static_cast<std::size_t>(k)] > c[static_cast<std::size_t>(best)]) best = k;
        }
        result.emplace(case_id, triage_from_rank(best + 1));
    }
    return result;
}

std::vector<ReviewerLabel> ingest_reviewer_labels(std::istream& in) {
    std::string line;
    if (!detail::read_csv_record(in, line)) throw EmptySource();
    std::size_t line_no = 1;
    const auto header = detail::split_csv_line(line);
    if (header != std::vector<std::string>{"case_id", "reviewer_id", "label"}) {
        throw MalformedRow(line_no, "header does not match the reviewer-label schema");
    }

    std::vector<ReviewerLabel> labels;
    while (detail::read_csv_record(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 3) throw MalformedRow(line_no, "expected 3 fields");
        if (fields[0].empty()) throw MalformedRow(line_no, "empty case_id");
        if (fields[1].empty()) throw MalformedRow(line_no, "empty reviewer_id");
        ReviewerLabel l;
        l.case_id = fields[0];
        l.reviewer_id = fields[1];
        try {
            l.label = triage_from_token(fields[2]);
        } catch (const DataError& e) {
            throw MalformedRow(line_no, e.what());
        }
        labels.push_back(std::move(l));
    }
    if (labels.empty()) throw EmptySource();
    return labels;
}

std::vector<ReviewerLabel> ingest_reviewer_labels_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open reviewer-label file: " + path);
    return ingest_reviewer_labels(in);
}

void apply_consensus(Cohort& cohort, const std::vector<ReviewerLabel>& labels) {
    const auto by_case = consensus(labels);
    for (auto& r : cohort.records) {
        const auto it = by_case.find(r.case_id);
        if (it == by_case.end()) throw NoLabels(r.case_id);
        r.gold_triage = it->second;
    }
}

} // namespace triagekit
