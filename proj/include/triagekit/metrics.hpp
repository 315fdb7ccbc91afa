#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "triagekit/models/common.hpp"

namespace triagekit {

struct LengthMismatch : DataError {
    LengthMismatch(std::size_t a, std::size_t b);
};
struct EmptyInput : DataError {
    EmptyInput();
};
struct DegenerateMarginals : NumericError {
    DegenerateMarginals();
};
struct ConstantInput : NumericError {
    explicit ConstantInput(const std::string& side_name);
    std::string side;
};
struct ZeroSpread : NumericError {
    explicit ZeroSpread(const std::string& metric_name);
    std::string metric;
};
struct ClassNotComputable : NumericError {
    explicit ClassNotComputable(int rank_no);
    int rank;
};

// ---------------------------------------------------------------------------
// Prediction sets
// ---------------------------------------------------------------------------

/// One process's per-case predictions, normalized to distributions. Hard
/// labels become one-hot vectors and mark the whole set degenerate for ROC.
struct PredictionSet {
    std::string process;
    std::vector<std::string> case_ids;
    std::vector<Probs> probs;
    bool hard_labels = false;
};

PredictionSet make_prediction_set(std::string process, std::vector<std::string> case_ids,
                                  std::vector<Probs> raw);
PredictionSet make_hard_prediction_set(std::string process, std::vector<std::string> case_ids,
                                       const std::vector<int>& ranks);

/// Record-per-line: {"case_id","process","probs"} or {"case_id","process","label"}.
/// Sets come back in first-appearance order of process names.
std::vector<PredictionSet> ingest_predictions(std::istream& in);
void serialize_predictions(const PredictionSet& set, std::ostream& out,
                           LabelSelector label_tokens = LabelSelector::GoldTriage);

struct AlignedPredictions {
    std::vector<std::string> case_ids;
    std::vector<Probs> probs;
    std::vector<int> gold; // 1-based ranks
};

/// Reorder a prediction set to follow the gold list; every gold case must be
/// covered.
AlignedPredictions align_predictions(const PredictionSet& set,
                                     const std::vector<std::pair<std::string, int>>& gold);

// ---------------------------------------------------------------------------
// Scalar metrics over 1-based rank lists
// ---------------------------------------------------------------------------

std::pair<double, double> ordinal_error(const std::vector<int>& pred_ranks,
                                        const std::vector<int>& gold_ranks);

enum class KappaWeighting { Quadratic, Linear };

double weighted_kappa(const std::vector<int>& pred_ranks, const std::vector<int>& gold_ranks,
                      KappaWeighting weighting = KappaWeighting::Quadratic);

/// Pearson correlation of midranks (ties share averaged ranks).
double rank_correlation(const std::vector<int>& pred_ranks, const std::vector<int>& gold_ranks);

struct F1Result {
    double micro = 0;
    double macro = 0;
    std::array<double, kNumClasses> per_class{};
    std::array<bool, kNumClasses> in_macro{}; // class present in pred or gold
};

F1Result f1_suite(const std::vector<int>& pred_ranks, const std::vector<int>& gold_ranks);

/// (exact, within one rank)
std::pair<double, double> agreement_rates(const std::vector<int>& pred_ranks,
                                          const std::vector<int>& gold_ranks);

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

struct AucEstimate {
    double auc = 0;
    double variance = 0;
    double ci_lower = 0;
    double ci_upper = 0;
};

/// Tie-corrected Mann-Whitney AUC with the placement-value variance and a
/// Wald interval clipped to [0,1]. Throws ClassNotComputable(0) when either
/// side is empty.
AucEstimate auc_delong(const std::vector<double>& scores, const std::vector<bool>& positive,
                       double alpha = 0.05);

struct RocPoint {
    double fpr = 0;
    double tpr = 0;
};

struct ClassRoc {
    bool computable = false;
    AucEstimate auc;
    std::vector<RocPoint> curve;
};

struct RocAnalysis {
    std::array<ClassRoc, kNumClasses> per_class;
    bool macro_computable = false;
    double macro_auc = 0;             // unweighted mean over computable classes
    std::vector<RocPoint> mean_curve; // vertical average on a 101-point grid
    bool degenerate = false;          // scores came from hard labels
    double alpha = 0.05;
};

RocAnalysis roc_analysis(const PredictionSet& set, const std::vector<int>& gold_ranks,
                         double alpha = 0.05);

// ---------------------------------------------------------------------------
// Bundled report and composite ranking
// ---------------------------------------------------------------------------

struct MetricReport {
    double mae = 0;
    double rmse = 0;
    double kappa = 0;
    double spearman = 0;
    double f1_micro = 0;
    double f1_macro = 0;
    std::array<double, kNumClasses> per_class_f1{};
    std::array<bool, kNumClasses> f1_in_macro{};
    double exact_agreement = 0;
    double near_agreement = 0;
    RocAnalysis roc;
    std::optional<double> composite; // filled by composite_ranking
};

MetricReport compute_metric_report(const PredictionSet& set, const std::vector<int>& gold_ranks,
                                   KappaWeighting weighting = KappaWeighting::Quadratic,
                                   double alpha = 0.05);

struct ProcessMetricsRow {
    std::string process;
    double mae = 0;
    double rmse = 0;
    double kappa = 0;
    double spearman = 0;
};

struct CompositeEntry {
    std::string process;
    double composite = 0;
};

/// Sum of population z-scores of (-mae, -rmse, kappa, spearman). With
/// include_gold_row a perfect row named "gold" joins the normalization set
/// and the output. Sorted by descending composite; composites sum to 0.
std::vector<CompositeEntry> composite_ranking(std::vector<ProcessMetricsRow> rows,
                                              bool include_gold_row = true);

} // namespace triagekit
