#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "triagekit/errors.hpp"

namespace triagekit {

// ---------------------------------------------------------------------------
// Label scales
// ---------------------------------------------------------------------------

/// Six-level urgency scale, most acute first. Ranks run 1..6 with 3A=3, 3B=4.
enum class TriageLevel { T1, T2, T3A, T3B, T4, T5 };

constexpr int kNumClasses = 6;

int triage_rank(TriageLevel level);
TriageLevel triage_from_rank(int rank);
std::string triage_token(TriageLevel level);                   // "1","2","3A","3B","4","5"
TriageLevel triage_from_token(const std::string& token);

/// Post-visit pathway code. Unspecified is excluded from every metric
/// computation and from label-supervised training.
enum class GemsaCode { G1, G2, G3, G4, G5, G6, Unspecified };

int gemsa_rank(GemsaCode code); // 1..6; throws on Unspecified
GemsaCode gemsa_from_rank(int rank);
std::string gemsa_token(GemsaCode code);                       // "1".."6", "" for Unspecified
GemsaCode gemsa_from_token(const std::string& token);

// ---------------------------------------------------------------------------
// Patient data
// ---------------------------------------------------------------------------

enum class Sex { M, F };
enum class AdmissionWindow { Night, Morning, Afternoon }; // 21-06, 06-14, 14-21

enum class Recourse {
    Abdo, Cardio, Various, Gu, GynOb, Infect, Poison, Neuro,
    Ophth, EntStoma, Derm, Psy, Pulm, Rheum, Trauma
};
constexpr int kNumRecourse = 15;

std::string sex_token(Sex s);
Sex sex_from_token(const std::string& token);
std::string window_token(AdmissionWindow w);
AdmissionWindow window_from_token(const std::string& token);
std::string recourse_token(Recourse r);
Recourse recourse_from_token(const std::string& token);

struct Vitals {
    double sbp = 0;  // mmHg
    double dbp = 0;  // mmHg
    double hr = 0;   // beats/min
    double temp = 0; // °C
    double eva = 0;  // pain score 0-10
    double spo2 = 0; // percent
    double o2 = 0;   // L/min

    bool operator==(const Vitals&) const = default;
};

struct PatientRecord {
    std::string case_id;
    int age = 0; // adult population: >= 18
    Sex sex = Sex::M;
    AdmissionWindow admission_window = AdmissionWindow::Night;
    Recourse recourse = Recourse::Various;
    bool comorbidity_any = false;
    bool comorbidity_vascular = false;
    Vitals vitals;
    std::optional<std::string> history_text;
    std::optional<TriageLevel> nurse_triage;
    std::optional<TriageLevel> gold_triage;
    GemsaCode gemsa = GemsaCode::Unspecified;

    bool operator==(const PatientRecord&) const = default;
};

enum class Provenance { Ingested, Synthetic };

struct Cohort {
    std::vector<PatientRecord> records;
    Provenance provenance = Provenance::Ingested;
};

// ---------------------------------------------------------------------------
// Ingestion / serialization
// ---------------------------------------------------------------------------

enum class CohortFormat { DelimitedTable, RecordPerLine };

struct MalformedRow : DataError {
    MalformedRow(std::size_t line, const std::string& reason);
    std::size_t line;
};

struct DuplicateCaseId : DataError {
    explicit DuplicateCaseId(const std::string& id);
    std::string case_id;
};

struct EmptySource : DataError {
    EmptySource();
};

Cohort ingest_cohort(std::istream& source, CohortFormat format);
Cohort ingest_cohort_file(const std::string& path);          // format by extension
void serialize_cohort(const Cohort& cohort, std::ostream& out, CohortFormat format);
void serialize_cohort_file(const Cohort& cohort, const std::string& path);

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

enum class LabelSelector { GoldTriage, NurseTriage, Gemsa };

/// Rank 1..6 of the selected label, or nullopt when the record lacks it.
std::optional<int> selected_rank(const PatientRecord& record, LabelSelector selector);

struct MissingStratumLabel : DataError {
    explicit MissingStratumLabel(const std::string& id);
    std::string case_id;
};

struct SplitResult {
    Cohort train;
    Cohort validation;
};

/// Per-stratum floor allocation with largest-remainder correction, so the
/// train size equals round(fraction * n) exactly. Membership is drawn with
/// the seed; record order within each part follows the input cohort.
SplitResult stratified_split(const Cohort& cohort, double train_fraction,
                             LabelSelector strata, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

struct InvalidSpec : DataError {
    explicit InvalidSpec(const std::string& reason);
};

struct ContinuousMarginal {
    double mean = 0, sd = 1, lower = 0, upper = 1;
};

/// Marginal distributions plus the latent-acuity link that ties labels to
/// features. Categorical vectors follow the corresponding enum order.
struct MarginalSpec {
    ContinuousMarginal age, sbp, dbp, hr, temp, eva, spo2, o2;

    std::vector<double> sex_probs;        // 2
    std::vector<double> window_probs;     // 3
    std::vector<double> recourse_probs;   // 15
    double comorbidity_any_prob = 0;
    double vascular_given_any_prob = 0;
    std::vector<double> triage_probs;     // 6, slice widths for the gold label
    std::vector<double> gemsa_probs;      // 6, over specified codes
    double gemsa_unspecified_prob = 0;

    // latent acuity link: weighted standardized deviations + offsets + noise
    double weight_sbp = -0.3;
    double weight_hr = 0.8;
    double weight_temp = 0.4;
    double weight_eva = 0.5;
    double weight_spo2 = -0.6;
    double weight_o2 = 0.9;
    double weight_age = 0.3;
    std::vector<double> recourse_offsets; // 15
    double comorbidity_bonus = 0.5;
    double vascular_bonus = 0.4;
    double noise_sd = 0.8;

    // nurse label: ordinal perturbation kernel over rank offsets -2..+2
    std::array<double, 5> nurse_kernel{0.075, 0.20, 0.45, 0.20, 0.075};
    // second latent for the pathway code
    double gemsa_noise_sd = 1.0;

    void validate() const; // throws InvalidSpec
};

/// Marginals and link coefficients for the desk-scale reference cohort.
MarginalSpec default_marginal_spec();

MarginalSpec marginal_spec_from_json(std::istream& in);
void marginal_spec_to_json(const MarginalSpec& spec, std::ostream& out);

Cohort synthesize_cohort(const MarginalSpec& spec, std::size_t n, std::uint64_t seed);

} // namespace triagekit
