#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "triagekit/calibration.hpp"
#include "triagekit/cohort.hpp"
#include "triagekit/features.hpp"
#include "triagekit/metrics.hpp"
#include "triagekit/models/common.hpp"

namespace triagekit {

inline constexpr const char* kToolName = "triagekit";
inline constexpr const char* kToolVersion = "0.1.0";

/// Run configuration parsed from a plain `key = value` file. Every random
/// draw in a run flows from `seed`; there are no wall-clock defaults.
struct RunConfig {
    std::string cohort_path;      // load this cohort; empty -> synthesize
    std::string spec_path;        // marginal overrides for synthesis
    std::string reviewers_path;   // reviewer labels; consensus overwrites gold
    std::string predictions_path; // external prediction sets to evaluate
    CohortFormat cohort_format = CohortFormat::DelimitedTable;

    std::size_t cases = 657;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    std::string out_dir = "run";

    LabelSelector label_system = LabelSelector::GoldTriage; // french | gemsa
    InputVariant input_variant = InputVariant::Both;
    std::vector<std::string> processes; // empty -> defaults for the label system
    bool include_gold_row = true;

    std::size_t text_dim = 256;
    TrainConfig train;

    KappaWeighting weighting = KappaWeighting::Quadratic;
    BrierVariant brier_variant = BrierVariant::SumOverClasses;
    int bins = 10;
    double ci_level = 0.95;
    std::size_t importance_repeats = 5;

    std::vector<std::string> effective_processes() const;
    void validate() const; // throws ConfigError
};

RunConfig parse_run_config(std::istream& in);
RunConfig parse_run_config_file(const std::string& path);

std::string label_system_token(LabelSelector selector);
LabelSelector label_system_from_token(const std::string& token);

struct Artifact {
    std::string name;     // file name inside the output directory
    std::string checksum; // 64-bit FNV-1a of the content, hex
};

struct RunArtifacts {
    std::string out_dir;
    std::vector<Artifact> artifacts;
};

// Standalone stages. Each re-derives what it needs from the seed, so they
// compose into the same results as the all-in-one run.
RunArtifacts run_generate(const RunConfig& config);  // cohort file
RunArtifacts run_split(const RunConfig& config);     // train/val files
RunArtifacts run_train(const RunConfig& config);     // models, curves, importances
RunArtifacts run_predict(const RunConfig& config);   // predictions per model
RunArtifacts run_evaluate(const RunConfig& config);  // metric report + agreement tables
RunArtifacts run_calibrate(const RunConfig& config); // calibration tables + surfaces
RunArtifacts run_rank(const RunConfig& config);      // composite ranking table

/// All-in-one run: cohort through ranking plus a manifest. Reruns with the
/// same config and seed are byte-identical except the manifest timestamp
/// and stage times.
RunArtifacts evaluate_run(const RunConfig& config);

} // namespace triagekit
