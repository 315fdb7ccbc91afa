#include "triagekit/report.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "triagekit/agreement.hpp"
#include "triagekit/detail/csv.hpp"
#include "triagekit/detail/hash.hpp"
#include "triagekit/gold_standard.hpp"
#include "triagekit/models/analysis.hpp"
#include "triagekit/models/boosted.hpp"
#include "triagekit/models/feedforward.hpp"
#include "triagekit/models/io.hpp"
#include "triagekit/models/jepa.hpp"

namespace fs = std::filesystem;

namespace triagekit {

using detail::format_double;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

std::string label_system_token(LabelSelector selector) {
    switch (selector) {
    case LabelSelector::GoldTriage: return "french";
    case LabelSelector::Gemsa: return "gemsa";
    default: throw ConfigError("selector is not a label system");
    }
}

LabelSelector label_system_from_token(const std::string& token) {
    if (token == "french") return LabelSelector::GoldTriage;
    if (token == "gemsa") return LabelSelector::Gemsa;
    throw ConfigError("unknown label system: " + token);
}

namespace {

const std::vector<std::string> kModelKinds = {"feedforward", "boosted", "jepa"};

bool is_model_kind(const std::string& name) {
    return std::find(kModelKinds.begin(), kModelKinds.end(), name) != kModelKinds.end();
}

std::string trimmed(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double_value(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": " + value);
    }
}

std::uint64_t parse_u64_value(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": " + value);
    }
}

bool parse_bool_value(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("bad boolean value for " + key + ": " + value);
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        item = trimmed(item);
        if (item.empty()) throw ConfigError("empty entry in " + key);
        out.push_back(item);
    }
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

} // namespace

std::vector<std::string> RunConfig::effective_processes() const {
    if (!processes.empty()) return processes;
    std::vector<std::string> out = kModelKinds;
    if (label_system == LabelSelector::GoldTriage) out.push_back("nurse");
    return out;
}

void RunConfig::validate() const {
    if (cases == 0) throw ConfigError("cases must be positive");
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie in (0, 1)");
    }
    if (out_dir.empty()) throw ConfigError("output directory must be set");
    if (bins < 1) throw ConfigError("bins must be positive");
    if (!(ci_level > 0.0) || !(ci_level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
    if (text_dim == 0) throw ConfigError("text_dim must be positive");
    if (importance_repeats == 0) throw ConfigError("importance_repeats must be positive");
    train.validate();

    const auto names = effective_processes();
    for (std::size_t i = 0; i < names.size(); ++i) {
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            if (names[i] == names[j]) throw ConfigError("duplicate process: " + names[i]);
        }
    }
    for (const auto& name : names) {
        if (!is_model_kind(name) && name != "nurse") {
            throw ConfigError("unknown process: " + name);
        }
    }
    if (label_system == LabelSelector::Gemsa) {
        for (const auto& name : names) {
            if (name == "nurse") {
                throw ConfigError("the nurse process is not defined for the gemsa label system");
            }
        }
    }
}

RunConfig parse_run_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trimmed(line);
        if (text.empty() || text[0] == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + " lacks '='");
        }
        const std::string key = trimmed(text.substr(0, eq));
        const std::string value = trimmed(text.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + " lacks a key");

        if (key == "cohort") cfg.cohort_path = value;
        else if (key == "spec") cfg.spec_path = value;
        else if (key == "reviewers") cfg.reviewers_path = value;
        else if (key == "predictions") cfg.predictions_path = value;
        else if (key == "cohort_format") {
            if (value == "csv") cfg.cohort_format = CohortFormat::DelimitedTable;
            else if (value == "jsonl") cfg.cohort_format = CohortFormat::RecordPerLine;
            else throw ConfigError("unknown cohort format: " + value);
        } else if (key == "cases") cfg.cases = parse_u64_value(key, value);
        else if (key == "train_fraction") cfg.train_fraction = parse_double_value(key, value);
        else if (key == "seed") cfg.seed = parse_u64_value(key, value);
        else if (key == "out") cfg.out_dir = value;
        else if (key == "label_system") cfg.label_system = label_system_from_token(value);
        else if (key == "input_variant") cfg.input_variant = input_variant_from_token(value);
        else if (key == "processes") cfg.processes = split_list(key, value);
        else if (key == "include_gold_row") cfg.include_gold_row = parse_bool_value(key, value);
        else if (key == "text_dim") cfg.text_dim = parse_u64_value(key, value);
        else if (key == "epochs") cfg.train.epochs = parse_u64_value(key, value);
        else if (key == "batch_size") cfg.train.batch_size = parse_u64_value(key, value);
        else if (key == "hidden1") cfg.train.hidden1 = parse_u64_value(key, value);
        else if (key == "hidden2") cfg.train.hidden2 = parse_u64_value(key, value);
        else if (key == "learning_rate") cfg.train.learning_rate = parse_double_value(key, value);
        else if (key == "dropout") cfg.train.dropout = parse_double_value(key, value);
        else if (key == "l2") cfg.train.l2 = parse_double_value(key, value);
        else if (key == "rounds") cfg.train.rounds = parse_u64_value(key, value);
        else if (key == "max_depth") cfg.train.max_depth = parse_u64_value(key, value);
        else if (key == "min_leaf") cfg.train.min_leaf = parse_u64_value(key, value);
        else if (key == "shrinkage") cfg.train.shrinkage = parse_double_value(key, value);
        else if (key == "leaf_l2") cfg.train.leaf_l2 = parse_double_value(key, value);
        else if (key == "embed_dim") cfg.train.embed_dim = parse_u64_value(key, value);
        else if (key == "encoder_hidden") cfg.train.encoder_hidden = parse_u64_value(key, value);
        else if (key == "jepa_learning_rate") {
            cfg.train.jepa_learning_rate = parse_double_value(key, value);
        } else if (key == "lambda_inv") cfg.train.lambda_inv = parse_double_value(key, value);
        else if (key == "mu_var") cfg.train.mu_var = parse_double_value(key, value);
        else if (key == "nu_cov") cfg.train.nu_cov = parse_double_value(key, value);
        else if (key == "gamma") cfg.train.gamma = parse_double_value(key, value);
        else if (key == "kappa_weighting") {
            if (value == "quadratic") cfg.weighting = KappaWeighting::Quadratic;
            else if (value == "linear") cfg.weighting = KappaWeighting::Linear;
            else throw ConfigError("unknown kappa weighting: " + value);
        } else if (key == "brier_variant") cfg.brier_variant = brier_variant_from_token(value);
        else if (key == "bins") cfg.bins = static_cast<int>(parse_u64_value(key, value));
        else if (key == "ci_level") cfg.ci_level = parse_double_value(key, value);
        else if (key == "importance_repeats") {
            cfg.importance_repeats = parse_u64_value(key, value);
        } else {
            throw ConfigError("unknown config key: " + key);
        }
    }
    cfg.train.seed = cfg.seed;
    return cfg;
}

RunConfig parse_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_run_config(in);
}

// ---------------------------------------------------------------------------
// Stage plumbing
// ---------------------------------------------------------------------------

namespace {

template <typename F>
auto with_stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(name) + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(std::string(name) + ": " + e.what());
    }
}

struct StageClock {
    std::vector<std::pair<std::string, long long>> ms;

    template <typename F>
    auto run(const char* name, F&& fn) -> decltype(fn()) {
        const auto start = std::chrono::steady_clock::now();
        struct Stop {
            StageClock* clock;
            const char* name;
            std::chrono::steady_clock::time_point start;
            ~Stop() {
                const auto stop = std::chrono::steady_clock::now();
                clock->ms.emplace_back(
                    name, std::chrono::duration_cast<std::chrono::milliseconds>(stop - start)
                              .count());
            }
        } stop{this, name, start};
        return with_stage(name, std::forward<F>(fn));
    }
};

struct ArtifactWriter {
    fs::path dir;
    std::vector<Artifact> artifacts;

    explicit ArtifactWriter(const std::string& out_dir) : dir(out_dir) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw ConfigError("cannot create output directory " + out_dir);
    }

    void emit(const std::string& name, const std::string& content) {
        const fs::path target = dir / name;
        const fs::path tmp = dir / (name + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw ConfigError("cannot write " + tmp.string());
            out << content;
            out.flush();
            if (!out) throw ConfigError("write failed for " + tmp.string());
        }
        std::error_code ec;
        fs::rename(tmp, target, ec);
        if (ec) throw ConfigError("cannot move " + tmp.string() + " into place");
        artifacts.push_back({name, detail::hex64(detail::fnv1a64(content))});
    }
};

// ---------------------------------------------------------------------------
// Pipeline pieces
// ---------------------------------------------------------------------------

Cohort synthesize_from_config(const RunConfig& cfg) {
    MarginalSpec spec = default_marginal_spec();
    if (!cfg.spec_path.empty()) {
        std::ifstream in(cfg.spec_path);
        if (!in) throw ConfigError("cannot open marginal spec: " + cfg.spec_path);
        spec = marginal_spec_from_json(in);
    }
    return synthesize_cohort(spec, cfg.cases, cfg.seed);
}

void apply_reviewers(const RunConfig& cfg, Cohort& cohort) {
    if (cfg.reviewers_path.empty()) return;
    apply_consensus(cohort, ingest_reviewer_labels_file(cfg.reviewers_path));
}

Cohort load_cohort(const RunConfig& cfg) {
    Cohort cohort = cfg.cohort_path.empty() ? synthesize_from_config(cfg)
                                            : ingest_cohort_file(cfg.cohort_path);
    apply_reviewers(cfg, cohort);
    return cohort;
}

/// Records carrying the run's label; the evaluation universe.
Cohort labeled_subset(const Cohort& cohort, LabelSelector selector) {
    Cohort out;
    out.provenance = cohort.provenance;
    for (const auto& rec : cohort.records) {
        if (selected_rank(rec, selector)) out.records.push_back(rec);
    }
    if (out.records.empty()) throw DataError("no records carry the selected label");
    return out;
}

SplitResult make_split(const RunConfig& cfg, const Cohort& cohort) {
    return stratified_split(labeled_subset(cohort, cfg.label_system), cfg.train_fraction,
                            cfg.label_system, cfg.seed);
}

struct FeatureStage {
    EncoderSchema schema;
    Dataset train;
    Dataset val;
};

FeatureStage build_features(const RunConfig& cfg, const SplitResult& split) {
    FeatureStage out;
    out.schema = fit_schema(split.train, cfg.text_dim, cfg.seed);
    out.train = build_dataset(split.train, out.schema, cfg.label_system, cfg.input_variant);
    out.val = build_dataset(split.validation, out.schema, cfg.label_system, cfg.input_variant);
    return out;
}

struct TrainedModel {
    std::string name;
    std::unique_ptr<Model> model;
    LearningCurve curve;
};

std::vector<TrainedModel> train_models(const RunConfig& cfg, const Dataset& train,
                                       const Dataset& val) {
    std::vector<TrainedModel> out;
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    for (const auto& name : cfg.effective_processes()) {
        if (!is_model_kind(name)) continue;
        TrainedModel tm;
        tm.name = name;
        if (name == "feedforward") {
            auto [model, curve] = train_feedforward(train, val, tc);
            tm.model = std::make_unique<FeedForwardModel>(std::move(model));
            tm.curve = std::move(curve);
        } else if (name == "boosted") {
            auto [model, curve] = train_boosted(train, val, tc);
            tm.model = std::make_unique<BoostedEnsemble>(std::move(model));
            tm.curve = std::move(curve);
        } else {
            auto [model, curve] = train_jepa(train, val, tc);
            tm.model = std::make_unique<JepaModel>(std::move(model));
            tm.curve = std::move(curve);
        }
        out.push_back(std::move(tm));
    }
    return out;
}

std::vector<std::pair<std::string, int>> gold_pairs(const RunConfig& cfg,
                                                    const Cohort& validation) {
    std::vector<std::pair<std::string, int>> out;
    out.reserve(validation.records.size());
    for (const auto& rec : validation.records) {
        out.emplace_back(rec.case_id, *selected_rank(rec, cfg.label_system));
    }
    return out;
}

PredictionSet nurse_prediction_set(const Cohort& validation) {
    std::vector<std::string> ids;
    std::vector<int> ranks;
    for (const auto& rec : validation.records) {
        const auto rank = selected_rank(rec, LabelSelector::NurseTriage);
        if (!rank) throw DataError("record " + rec.case_id + " lacks a nurse triage label");
        ids.push_back(rec.case_id);
        ranks.push_back(*rank);
    }
    return make_hard_prediction_set("nurse", std::move(ids), ranks);
}

std::vector<PredictionSet> external_prediction_sets(const RunConfig& cfg) {
    if (cfg.predictions_path.empty()) return {};
    std::ifstream in(cfg.predictions_path);
    if (!in) throw DataError("cannot open predictions file: " + cfg.predictions_path);
    return ingest_predictions(in);
}

PredictionSet model_prediction_set(const std::string& name, const Model& model,
                                   const Dataset& val) {
    return make_prediction_set(name, val.case_ids, model.predict_dataset(val));
}

/// Prediction sets for the requested processes, in request order. Model
/// processes come from `models` when given, otherwise from predictions files
/// under the output directory. Other names resolve to the external file.
std::vector<PredictionSet> assemble_sets(const RunConfig& cfg,
                                         const std::vector<TrainedModel>* models,
                                         const Dataset* ds_val, const Cohort& validation) {
    const auto externals = external_prediction_sets(cfg);
    std::vector<PredictionSet> out;
    for (const auto& name : cfg.effective_processes()) {
        if (is_model_kind(name)) {
            if (models != nullptr) {
                const auto it =
                    std::find_if(models->begin(), models->end(),
                                 [&](const TrainedModel& tm) { return tm.name == name; });
                if (it == models->end()) throw DataError("model " + name + " was not trained");
                out.push_back(model_prediction_set(name, *it->model, *ds_val));
            } else {
                const fs::path path = fs::path(cfg.out_dir) / ("predictions_" + name + ".jsonl");
                std::ifstream in(path, std::ios::binary);
                if (!in) {
                    throw DataError("missing predictions file " + path.string() +
                                    " (run predict first)");
                }
                auto sets = ingest_predictions(in);
                const auto it = std::find_if(
                    sets.begin(), sets.end(),
                    [&](const PredictionSet& s) { return s.process == name; });
                if (it == sets.end()) {
                    throw DataError(path.string() + " holds no process named " + name);
                }
                out.push_back(std::move(*it));
            }
        } else if (name == "nurse") {
            out.push_back(nurse_prediction_set(validation));
        } else {
            const auto it = std::find_if(
                externals.begin(), externals.end(),
                [&](const PredictionSet& s) { return s.process == name; });
            if (it == externals.end()) {
                throw DataError("no prediction source for process " + name);
            }
            out.push_back(*it);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-process evaluation
// ---------------------------------------------------------------------------

struct ProcessEvaluation {
    PredictionSet aligned; // probs in gold-case order
    std::vector<int> gold;
    std::vector<int> pred_ranks;
    MetricReport metrics;
    double brier_score = 0;
    ConfusionMatrix conf;
    BlandAltmanSummary ba;
    std::array<std::size_t, 11> hist{};
    ThresholdReport thresholds;
    std::array<std::vector<CalibrationBin>, kNumClasses> calib;
    ProbabilitySurfaces surfaces;
};

ProcessEvaluation evaluate_process(const RunConfig& cfg, const PredictionSet& set,
                                   const std::vector<std::pair<std::string, int>>& gold) {
    ProcessEvaluation ev;
    AlignedPredictions ap = align_predictions(set, gold);
    ev.aligned.process = set.process;
    ev.aligned.hard_labels = set.hard_labels;
    ev.aligned.case_ids = std::move(ap.case_ids);
    ev.aligned.probs = std::move(ap.probs);
    ev.gold = std::move(ap.gold);

    const double alpha = 1.0 - cfg.ci_level;
    ev.metrics = compute_metric_report(ev.aligned, ev.gold, cfg.weighting, alpha);
    ev.brier_score = brier(ev.aligned, ev.gold, cfg.brier_variant);

    ev.pred_ranks.resize(ev.aligned.probs.size());
    std::vector<int> labels0(ev.aligned.probs.size());
    for (std::size_t i = 0; i < ev.aligned.probs.size(); ++i) {
        ev.pred_ranks[i] = argmax_rank(ev.aligned.probs[i]);
        labels0[i] = ev.gold[i] - 1;
    }
    ev.conf = confusion(ev.pred_ranks, ev.gold);
    ev.ba = bland_altman(ev.pred_ranks, ev.gold);
    ev.hist = error_histogram(ev.pred_ranks, ev.gold);
    ev.thresholds = tune_thresholds(ev.aligned.probs, labels0);
    for (int r = 1; r <= kNumClasses; ++r) {
        ev.calib[static_cast<std::size_t>(r - 1)] =
            calibration_table(ev.aligned, ev.gold, r, cfg.bins);
    }
    ev.surfaces = probability_surfaces(ev.aligned, ev.gold);
    return ev;
}

std::vector<ProcessEvaluation> evaluate_sets(const RunConfig& cfg,
                                             const std::vector<PredictionSet>& sets,
                                             const std::vector<std::pair<std::string, int>>& gold) {
    std::vector<ProcessEvaluation> out;
    out.reserve(sets.size());
    for (const auto& set : sets) out.push_back(evaluate_process(cfg, set, gold));
    return out;
}

// ---------------------------------------------------------------------------
// Artifact content builders
// ---------------------------------------------------------------------------

std::string class_label(const RunConfig& cfg, int rank) {
    if (cfg.label_system == LabelSelector::Gemsa) return std::to_string(rank);
    return triage_token(triage_from_rank(rank));
}

std::string cohort_file_name(const RunConfig& cfg) {
    return cfg.cohort_format == CohortFormat::RecordPerLine ? "cohort.jsonl" : "cohort.csv";
}

std::string serialized_cohort(const Cohort& cohort, CohortFormat format) {
    std::ostringstream out;
    serialize_cohort(cohort, out, format);
    return out.str();
}

std::string report_text(const RunConfig& cfg, const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "tool = " << kToolName << ' ' << kToolVersion << '\n';
    out << "label_system = " << label_system_token(cfg.label_system) << '\n';
    out << "input_variant = " << input_variant_token(cfg.input_variant) << '\n';
    out << "kappa_weighting = "
        << (cfg.weighting == KappaWeighting::Quadratic ? "quadratic" : "linear") << '\n';
    out << "brier_variant = " << brier_variant_token(cfg.brier_variant) << '\n';
    out << "ci_level = " << format_double(cfg.ci_level) << '\n';
    out << "bins = " << cfg.bins << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "evaluated_cases = " << (evals.empty() ? 0 : evals.front().gold.size()) << '\n';
    out << "processes =";
    for (std::size_t i = 0; i < evals.size(); ++i) {
        out << (i == 0 ? " " : ",") << evals[i].aligned.process;
    }
    out << '\n';

    for (const auto& ev : evals) {
        const MetricReport& m = ev.metrics;
        out << '\n' << "[process " << ev.aligned.process << "]\n";
        out << "hard_labels = " << (ev.aligned.hard_labels ? 1 : 0) << '\n';
        out << "mae = " << format_double(m.mae) << '\n';
        out << "rmse = " << format_double(m.rmse) << '\n';
        out << "kappa = " << format_double(m.kappa) << '\n';
        out << "spearman = " << format_double(m.spearman) << '\n';
        out << "f1_micro = " << format_double(m.f1_micro) << '\n';
        out << "f1_macro = " << format_double(m.f1_macro) << '\n';
        for (int r = 1; r <= kNumClasses; ++r) {
            out << "f1_class_" << class_label(cfg, r) << " = "
                << format_double(m.per_class_f1[static_cast<std::size_t>(r - 1)]) << '\n';
        }
        out << "f1_macro_classes =";
        bool first = true;
        for (int r = 1; r <= kNumClasses; ++r) {
            if (!m.f1_in_macro[static_cast<std::size_t>(r - 1)]) continue;
            out << (first ? " " : ",") << class_label(cfg, r);
            first = false;
        }
        out << '\n';
        out << "exact_agreement = " << format_double(m.exact_agreement) << '\n';
        out << "near_agreement = " << format_double(m.near_agreement) << '\n';
        out << "brier = " << format_double(ev.brier_score) << '\n';
        out << "auc_degenerate = " << (m.roc.degenerate ? 1 : 0) << '\n';
        out << "auc_macro = "
            << (m.roc.macro_computable ? format_double(m.roc.macro_auc) : "NA") << '\n';
        for (int r = 1; r <= kNumClasses; ++r) {
            const auto& cls = m.roc.per_class[static_cast<std::size_t>(r - 1)];
            const std::string tok = class_label(cfg, r);
            if (cls.computable) {
                out << "auc_class_" << tok << " = " << format_double(cls.auc.auc) << '\n';
                out << "auc_class_" << tok << "_ci = " << format_double(cls.auc.ci_lower) << ','
                    << format_double(cls.auc.ci_upper) << '\n';
            } else {
                out << "auc_class_" << tok << " = NA\n";
                out << "auc_class_" << tok << "_ci = NA\n";
            }
        }
    }
    return out.str();
}

std::string ranking_tsv(const RunConfig& cfg, const std::vector<ProcessEvaluation>& evals) {
    std::vector<ProcessMetricsRow> rows;
    rows.reserve(evals.size());
    for (const auto& ev : evals) {
        rows.push_back({ev.aligned.process, ev.metrics.mae, ev.metrics.rmse, ev.metrics.kappa,
                        ev.metrics.spearman});
    }
    const auto entries = composite_ranking(rows, cfg.include_gold_row);
    if (cfg.include_gold_row) rows.push_back({"gold", 0.0, 0.0, 1.0, 1.0});

    std::ostringstream out;
    out << "position\tprocess\tmae\trmse\tkappa\tspearman\tcomposite\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto row = std::find_if(rows.begin(), rows.end(), [&](const ProcessMetricsRow& r) {
            return r.process == entries[i].process;
        });
        out << (i + 1) << '\t' << entries[i].process << '\t' << format_double(row->mae) << '\t'
            << format_double(row->rmse) << '\t' << format_double(row->kappa) << '\t'
            << format_double(row->spearman) << '\t' << format_double(entries[i].composite)
            << '\n';
    }
    return out.str();
}

std::string confusion_tsv(const RunConfig& cfg, const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "process\tgold\tpred\tcount\n";
    for (const auto& ev : evals) {
        for (int g = 1; g <= kNumClasses; ++g) {
            for (int p = 1; p <= kNumClasses; ++p) {
                out << ev.aligned.process << '\t' << class_label(cfg, g) << '\t'
                    << class_label(cfg, p) << '\t'
                    << ev.conf.counts[static_cast<std::size_t>(g - 1)]
                                     [static_cast<std::size_t>(p - 1)]
                    << '\n';
            }
        }
    }
    return out.str();
}

std::string bland_altman_tsv(const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "process\tbias\tsd\tlower\tupper\n";
    for (const auto& ev : evals) {
        out << ev.aligned.process << '\t' << format_double(ev.ba.bias) << '\t';
        if (ev.ba.limits_defined) {
            out << format_double(ev.ba.sd) << '\t' << format_double(ev.ba.lower) << '\t'
                << format_double(ev.ba.upper) << '\n';
        } else {
            out << "NA\tNA\tNA\n";
        }
    }
    return out.str();
}

std::string ba_pairs_tsv(const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "process\tmean\tdiff\n";
    for (const auto& ev : evals) {
        for (const auto& [mid, diff] : ev.ba.pairs) {
            out << ev.aligned.process << '\t' << format_double(mid) << '\t'
                << format_double(diff) << '\n';
        }
    }
    return out.str();
}

std::string error_hist_tsv(const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "process\tdiff\tcount\n";
    for (const auto& ev : evals) {
        for (int d = -5; d <= 5; ++d) {
            out << ev.aligned.process << '\t' << d << '\t'
                << ev.hist[static_cast<std::size_t>(d + 5)] << '\n';
        }
    }
    return out.str();
}

std::string roc_tsv(const RunConfig& cfg, const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "process\tclass\tfpr\ttpr\n";
    for (const auto& ev : evals) {
        for (int r = 1; r <= kNumClasses; ++r) {
            const auto& cls = ev.metrics.roc.per_class[static_cast<std::size_t>(r - 1)];
            if (!cls.computable) continue;
            for (const auto& pt : cls.curve) {
                out << ev.aligned.process << '\t' << class_label(cfg, r) << '\t'
                    << format_double(pt.fpr) << '\t' << format_double(pt.tpr) << '\n';
            }
        }
    }
    return out.str();
}

std::string roc_mean_tsv(const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "process\tfpr\ttpr\n";
    for (const auto& ev : evals) {
        if (!ev.metrics.roc.macro_computable) continue;
        for (const auto& pt : ev.metrics.roc.mean_curve) {
            out << ev.aligned.process << '\t' << format_double(pt.fpr) << '\t'
                << format_double(pt.tpr) << '\n';
        }
    }
    return out.str();
}

std::string thresholds_tsv(const RunConfig& cfg, const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "process\tclass\tthreshold\tf1\n";
    for (const auto& ev : evals) {
        for (int r = 1; r <= kNumClasses; ++r) {
            const auto& entry = ev.thresholds[static_cast<std::size_t>(r - 1)];
            out << ev.aligned.process << '\t' << class_label(cfg, r) << '\t';
            if (entry.defined) {
                out << format_double(entry.threshold) << '\t' << format_double(entry.f1) << '\n';
            } else {
                out << "NA\tNA\n";
            }
        }
    }
    return out.str();
}

std::string calibration_tsv(const RunConfig& cfg, const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "process\tclass\tbin\tcount\tpositives\tmean_predicted\tobserved\tgap\n";
    for (const auto& ev : evals) {
        for (int r = 1; r <= kNumClasses; ++r) {
            for (const auto& bin : ev.calib[static_cast<std::size_t>(r - 1)]) {
                out << ev.aligned.process << '\t' << class_label(cfg, r) << '\t' << bin.bin
                    << '\t' << bin.count << '\t' << bin.positives << '\t'
                    << format_double(bin.mean_predicted) << '\t' << format_double(bin.observed)
                    << '\t' << format_double(bin.gap) << '\n';
            }
        }
    }
    return out.str();
}

std::string heatmap_tsv(const RunConfig& cfg, const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "process\ttrue\tpred\tmean_probability\n";
    for (const auto& ev : evals) {
        for (int t = 1; t <= kNumClasses; ++t) {
            for (int p = 1; p <= kNumClasses; ++p) {
                out << ev.aligned.process << '\t' << class_label(cfg, t) << '\t'
                    << class_label(cfg, p) << '\t';
                if (ev.surfaces.defined[static_cast<std::size_t>(t - 1)]) {
                    out << format_double(ev.surfaces.heatmap[static_cast<std::size_t>(t - 1)]
                                                            [static_cast<std::size_t>(p - 1)]);
                } else {
                    out << "NA";
                }
                out << '\n';
            }
        }
    }
    return out.str();
}

std::string ridge_tsv(const RunConfig& cfg, const std::vector<ProcessEvaluation>& evals) {
    std::ostringstream out;
    out << "process\ttrue\tpred\tprobability\n";
    for (const auto& ev : evals) {
        for (int t = 1; t <= kNumClasses; ++t) {
            for (int p = 1; p <= kNumClasses; ++p) {
                const auto& samples = ev.surfaces.ridge[static_cast<std::size_t>(t - 1)]
                                                       [static_cast<std::size_t>(p - 1)];
                for (double v : samples) {
                    out << ev.aligned.process << '\t' << class_label(cfg, t) << '\t'
                        << class_label(cfg, p) << '\t' << format_double(v) << '\n';
                }
            }
        }
    }
    return out.str();
}

std::string curves_tsv(const std::vector<TrainedModel>& models) {
    std::ostringstream out;
    out << "process\tepoch\ttrain_accuracy\ttrain_logloss\tval_accuracy\tval_logloss\n";
    for (const auto& tm : models) {
        for (std::size_t e = 0; e < tm.curve.size(); ++e) {
            const auto& pt = tm.curve[e];
            out << tm.name << '\t' << (e + 1) << '\t' << format_double(pt.train_accuracy)
                << '\t' << format_double(pt.train_logloss) << '\t'
                << format_double(pt.val_accuracy) << '\t' << format_double(pt.val_logloss)
                << '\n';
        }
    }
    return out.str();
}

std::string importance_tsv(const RunConfig& cfg, const std::vector<TrainedModel>& models,
                           const Dataset& val) {
    std::ostringstream out;
    out << "process\tgroup\timportance\n";
    for (const auto& tm : models) {
        const auto groups =
            permutation_importance(*tm.model, val, cfg.importance_repeats, cfg.seed);
        for (const auto& g : groups) {
            out << tm.name << '\t' << g.name << '\t' << format_double(g.importance) << '\n';
        }
    }
    return out.str();
}

std::string serialized_model(const Model& model) {
    std::ostringstream out;
    save_model(model, out);
    return out.str();
}

std::string serialized_schema(const EncoderSchema& schema) {
    std::ostringstream out;
    schema_to_json(schema, out);
    return out.str();
}

std::string serialized_predictions(const RunConfig& cfg, const PredictionSet& set) {
    std::ostringstream out;
    serialize_predictions(set, out, cfg.label_system);
    return out.str();
}

json config_json(const RunConfig& cfg) {
    json t;
    t["epochs"] = cfg.train.epochs;
    t["batch_size"] = cfg.train.batch_size;
    t["hidden1"] = cfg.train.hidden1;
    t["hidden2"] = cfg.train.hidden2;
    t["learning_rate"] = cfg.train.learning_rate;
    t["dropout"] = cfg.train.dropout;
    t["l2"] = cfg.train.l2;
    t["rounds"] = cfg.train.rounds;
    t["max_depth"] = cfg.train.max_depth;
    t["min_leaf"] = cfg.train.min_leaf;
    t["shrinkage"] = cfg.train.shrinkage;
    t["leaf_l2"] = cfg.train.leaf_l2;
    t["embed_dim"] = cfg.train.embed_dim;
    t["encoder_hidden"] = cfg.train.encoder_hidden;
    t["jepa_learning_rate"] = cfg.train.jepa_learning_rate;
    t["lambda_inv"] = cfg.train.lambda_inv;
    t["mu_var"] = cfg.train.mu_var;
    t["nu_cov"] = cfg.train.nu_cov;
    t["gamma"] = cfg.train.gamma;

    json c;
    c["cohort"] = cfg.cohort_path;
    c["spec"] = cfg.spec_path;
    c["reviewers"] = cfg.reviewers_path;
    c["predictions"] = cfg.predictions_path;
    c["cohort_format"] =
        cfg.cohort_format == CohortFormat::RecordPerLine ? "jsonl" : "csv";
    c["cases"] = cfg.cases;
    c["train_fraction"] = cfg.train_fraction;
    c["seed"] = cfg.seed;
    c["out"] = cfg.out_dir;
    c["label_system"] = label_system_token(cfg.label_system);
    c["input_variant"] = input_variant_token(cfg.input_variant);
    {
        std::string joined;
        for (const auto& p : cfg.effective_processes()) {
            if (!joined.empty()) joined += ',';
            joined += p;
        }
        c["processes"] = joined;
    }
    c["include_gold_row"] = cfg.include_gold_row;
    c["text_dim"] = cfg.text_dim;
    c["kappa_weighting"] =
        cfg.weighting == KappaWeighting::Quadratic ? "quadratic" : "linear";
    c["brier_variant"] = brier_variant_token(cfg.brier_variant);
    c["bins"] = cfg.bins;
    c["ci_level"] = cfg.ci_level;
    c["importance_repeats"] = cfg.importance_repeats;
    c["train"] = t;
    return c;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string manifest_json(const RunConfig& cfg, const ArtifactWriter& writer,
                          const StageClock& clock) {
    json m;
    json arts = json::object();
    std::vector<Artifact> sorted = writer.artifacts;
    std::sort(sorted.begin(), sorted.end(),
              [](const Artifact& a, const Artifact& b) { return a.name < b.name; });
    for (const auto& a : sorted) arts[a.name] = a.checksum;
    m["artifacts"] = arts;
    m["config"] = config_json(cfg);
    json stages = json::object();
    for (const auto& [name, ms] : clock.ms) stages[name] = ms;
    m["stage_ms"] = stages;
    m["timestamp"] = utc_timestamp();
    m["tool"] = kToolName;
    m["version"] = kToolVersion;
    return m.dump(2) + "\n";
}

void emit_evaluation_artifacts(const RunConfig& cfg, ArtifactWriter& writer,
                               const std::vector<ProcessEvaluation>& evals) {
    writer.emit("report.txt", report_text(cfg, evals));
    writer.emit("confusion.tsv", confusion_tsv(cfg, evals));
    writer.emit("bland_altman.tsv", bland_altman_tsv(evals));
    writer.emit("ba_pairs.tsv", ba_pairs_tsv(evals));
    writer.emit("error_hist.tsv", error_hist_tsv(evals));
    writer.emit("roc.tsv", roc_tsv(cfg, evals));
    writer.emit("roc_mean.tsv", roc_mean_tsv(evals));
    writer.emit("thresholds.tsv", thresholds_tsv(cfg, evals));
}

void emit_calibration_artifacts(const RunConfig& cfg, ArtifactWriter& writer,
                                const std::vector<ProcessEvaluation>& evals) {
    writer.emit("calibration.tsv", calibration_tsv(cfg, evals));
    writer.emit("heatmap.tsv", heatmap_tsv(cfg, evals));
    writer.emit("ridge.tsv", ridge_tsv(cfg, evals));
}

std::string split_file_name(const RunConfig& cfg, const char* part) {
    return std::string(part) +
           (cfg.cohort_format == CohortFormat::RecordPerLine ? ".jsonl" : ".csv");
}

/// Shared front half of the file-backed stages: cohort -> split.
std::pair<Cohort, SplitResult> load_and_split(const RunConfig& cfg) {
    Cohort cohort = with_stage("cohort", [&] { return load_cohort(cfg); });
    SplitResult split = with_stage("split", [&] { return make_split(cfg, cohort); });
    return {std::move(cohort), std::move(split)};
}

std::vector<ProcessEvaluation> evaluations_from_files(const RunConfig& cfg) {
    auto [cohort, split] = load_and_split(cfg);
    const auto gold = gold_pairs(cfg, split.validation);
    const auto sets =
        with_stage("predictions", [&] { return assemble_sets(cfg, nullptr, nullptr,
                                                             split.validation); });
    return with_stage("evaluate", [&] { return evaluate_sets(cfg, sets, gold); });
}

} // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

RunArtifacts run_generate(const RunConfig& config) {
    config.validate();
    ArtifactWriter writer(config.out_dir);
    const Cohort cohort = with_stage("cohort", [&] {
        Cohort c = synthesize_from_config(config);
        apply_reviewers(config, c);
        return c;
    });
    writer.emit(cohort_file_name(config), serialized_cohort(cohort, config.cohort_format));
    return {config.out_dir, std::move(writer.artifacts)};
}

RunArtifacts run_split(const RunConfig& config) {
    config.validate();
    ArtifactWriter writer(config.out_dir);
    auto [cohort, split] = load_and_split(config);
    writer.emit(split_file_name(config, "train"),
                serialized_cohort(split.train, config.cohort_format));
    writer.emit(split_file_name(config, "val"),
                serialized_cohort(split.validation, config.cohort_format));
    return {config.out_dir, std::move(writer.artifacts)};
}

RunArtifacts run_train(const RunConfig& config) {
    config.validate();
    ArtifactWriter writer(config.out_dir);
    auto [cohort, split] = load_and_split(config);
    const FeatureStage features =
        with_stage("features", [&] { return build_features(config, split); });
    const auto models = with_stage(
        "train", [&] { return train_models(config, features.train, features.val); });
    if (models.empty()) throw ConfigError("train: no model process requested");

    writer.emit("schema.json", serialized_schema(features.schema));
    for (const auto& tm : models) {
        writer.emit("model_" + tm.name + ".txt", serialized_model(*tm.model));
    }
    writer.emit("curves.tsv", curves_tsv(models));
    writer.emit("importance.tsv", with_stage("importance", [&] {
                    return importance_tsv(config, models, features.val);
                }));
    return {config.out_dir, std::move(writer.artifacts)};
}

RunArtifacts run_predict(const RunConfig& config) {
    config.validate();
    ArtifactWriter writer(config.out_dir);
    auto [cohort, split] = load_and_split(config);
    const FeatureStage features =
        with_stage("features", [&] { return build_features(config, split); });

    bool any = false;
    for (const auto& name : config.effective_processes()) {
        if (is_model_kind(name)) {
            const auto set = with_stage("predict", [&] {
                const fs::path path = fs::path(config.out_dir) / ("model_" + name + ".txt");
                const auto model = load_model_file(path.string());
                return model_prediction_set(name, *model, features.val);
            });
            writer.emit("predictions_" + name + ".jsonl", serialized_predictions(config, set));
            any = true;
        } else if (name == "nurse") {
            const auto set =
                with_stage("predict", [&] { return nurse_prediction_set(split.validation); });
            writer.emit("predictions_nurse.jsonl", serialized_predictions(config, set));
            any = true;
        }
    }
    if (!any) throw ConfigError("predict: no predictable process requested");
    return {config.out_dir, std::move(writer.artifacts)};
}

RunArtifacts run_evaluate(const RunConfig& config) {
    config.validate();
    ArtifactWriter writer(config.out_dir);
    const auto evals = evaluations_from_files(config);
    emit_evaluation_artifacts(config, writer, evals);
    return {config.out_dir, std::move(writer.artifacts)};
}

RunArtifacts run_calibrate(const RunConfig& config) {
    config.validate();
    ArtifactWriter writer(config.out_dir);
    const auto evals = evaluations_from_files(config);
    emit_calibration_artifacts(config, writer, evals);
    return {config.out_dir, std::move(writer.artifacts)};
}

RunArtifacts run_rank(const RunConfig& config) {
    config.validate();
    ArtifactWriter writer(config.out_dir);
    const auto evals = evaluations_from_files(config);
    writer.emit("ranking.tsv", with_stage("rank", [&] { return ranking_tsv(config, evals); }));
    return {config.out_dir, std::move(writer.artifacts)};
}

RunArtifacts evaluate_run(const RunConfig& config) {
    config.validate();
    ArtifactWriter writer(config.out_dir);
    StageClock clock;

    const Cohort cohort = clock.run("cohort", [&] { return load_cohort(config); });
    const SplitResult split = clock.run("split", [&] { return make_split(config, cohort); });
    const FeatureStage features =
        clock.run("features", [&] { return build_features(config, split); });
    const auto models =
        clock.run("train", [&] { return train_models(config, features.train, features.val); });
    const auto sets = clock.run("predict", [&] {
        return assemble_sets(config, &models, &features.val, split.validation);
    });
    const auto gold = gold_pairs(config, split.validation);
    const auto evals = clock.run("evaluate", [&] { return evaluate_sets(config, sets, gold); });

    clock.run("write", [&] {
        writer.emit(cohort_file_name(config), serialized_cohort(cohort, config.cohort_format));
        writer.emit(split_file_name(config, "train"),
                    serialized_cohort(split.train, config.cohort_format));
        writer.emit(split_file_name(config, "val"),
                    serialized_cohort(split.validation, config.cohort_format));
        writer.emit("schema.json", serialized_schema(features.schema));
        for (const auto& tm : models) {
            writer.emit("model_" + tm.name + ".txt", serialized_model(*tm.model));
        }
        if (!models.empty()) {
            writer.emit("curves.tsv", curves_tsv(models));
            writer.emit("importance.tsv", importance_tsv(config, models, features.val));
        }
        for (const auto& ev : evals) {
            writer.emit("predictions_" + ev.aligned.process + ".jsonl",
                        serialized_predictions(config, ev.aligned));
        }
        emit_evaluation_artifacts(config, writer, evals);
        emit_calibration_artifacts(config, writer, evals);
        writer.emit("ranking.tsv", ranking_tsv(config, evals));
    });

    writer.emit("manifest.json", manifest_json(config, writer, clock));
    return {config.out_dir, std::move(writer.artifacts)};
}

} // namespace triagekit
