#include "triagekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

#include "triagekit/stats.hpp"

namespace triagekit {

using nlohmann::json;

LengthMismatch::LengthMismatch(std::size_t a, std::size_t b)
    : DataError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}

EmptyInput::EmptyInput() : DataError("metric input is empty") {}

DegenerateMarginals::DegenerateMarginals()
    : NumericError("weighted kappa undefined: all marginal mass in one agreeing cell") {}

ConstantInput::ConstantInput(const std::string& side_name)
    : NumericError("rank correlation undefined: constant " + side_name + " ranks"),
      side(side_name) {}

ZeroSpread::ZeroSpread(const std::string& metric_name)
    : NumericError("z-score undefined: zero spread in " + metric_name), metric(metric_name) {}

ClassNotComputable::ClassNotComputable(int rank_no)
    : NumericError("class " + std::to_string(rank_no) +
                   " has no positives or no negatives"),
      rank(rank_no) {}

// ---------------------------------------------------------------------------
// Prediction sets
// ---------------------------------------------------------------------------

namespace {

void normalize_probs(Probs& p) {
    double sum = 0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw DataError("prediction probabilities must be finite and non-negative");
        }
        sum += v;
    }
    if (!(sum > 0.0)) throw DataError("prediction probabilities sum to zero");
    // a sum already within rounding of one is left untouched so that
    // serialized streams round-trip bit-exactly
    if (std::abs(sum - 1.0) <= 1e-9) return;
    for (double& v : p) v /= sum;
}

void check_ranks(const std::vector<int>& pred, const std::vector<int>& gold) {
    if (pred.size() != gold.size()) throw LengthMismatch(pred.size(), gold.size());
    if (pred.empty()) throw EmptyInput();
    for (const auto* v : {&pred, &gold}) {
        for (int r : *v) {
            if (r < 1 || r > kNumClasses) {
                throw DataError("rank out of range: " + std::to_string(r));
            }
        }
    }
}

int rank_from_label_token(const json& value) {
    if (value.is_number_integer()) {
        const int r = value.get<int>();
        if (r >= 1 && r <= kNumClasses) return r;
        throw DataError("label rank out of range");
    }
    if (value.is_string()) {
        const std::string s = value.get<std::string>();
        try {
            return triage_rank(triage_from_token(s));
        } catch (const DataError&) {
            if (s.size() == 1 && s[0] >= '1' && s[0] <= '6') return s[0] - '0';
            throw;
        }
    }
    throw DataError("label must be a token or rank");
}

} // namespace

PredictionSet make_prediction_set(std::string process, std::vector<std::string> case_ids,
                                  std::vector<Probs> raw) {
    if (case_ids.size() != raw.size()) throw LengthMismatch(case_ids.size(), raw.size());
    for (auto& p : raw) normalize_probs(p);
    PredictionSet set;
    set.process = std::move(process);
    set.case_ids = std::move(case_ids);
    set.probs = std::move(raw);
    return set;
}

PredictionSet make_hard_prediction_set(std::string process, std::vector<std::string> case_ids,
                                       const std::vector<int>& ranks) {
    if (case_ids.size() != ranks.size()) throw LengthMismatch(case_ids.size(), ranks.size());
    std::vector<Probs> probs;
    probs.reserve(ranks.size());
    for (int r : ranks) {
        if (r < 1 || r > kNumClasses) throw DataError("rank out of range: " + std::to_string(r));
        Probs p{};
        p[static_cast<std::size_t>(r - 1)] = 1.0;
        probs.push_back(p);
    }
    PredictionSet set;
    set.process = std::move(process);
    set.case_ids = std::move(case_ids);
    set.probs = std::move(probs);
    set.hard_labels = true;
    return set;
}

std::vector<PredictionSet> ingest_predictions(std::istream& in) {
    struct Builder {
        PredictionSet set;
        std::set<std::string> seen;
        bool any_soft = false;
    };
    std::vector<Builder> builders;
    std::map<std::string, std::size_t> index;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedRow(line_no, std::string("invalid json: ") + e.what());
        }
        if (!j.is_object() || !j.contains("case_id") || !j.contains("process")) {
            throw MalformedRow(line_no, "expected case_id and process fields");
        }
        const std::string case_id = j["case_id"].get<std::string>();
        const std::string process = j["process"].get<std::string>();

        auto it = index.find(process);
        if (it == index.end()) {
            it = index.emplace(process, builders.size()).first;
            builders.emplace_back();
            builders.back().set.process = process;
        }
        Builder& b = builders[it->second];
        if (!b.seen.insert(case_id).second) {
            throw MalformedRow(line_no, "duplicate case " + case_id + " for process " + process);
        }

        Probs p{};
        try {
            if (j.contains("probs")) {
                const auto& arr = j["probs"];
                if (!arr.is_array() || arr.size() != static_cast<std::size_t>(kNumClasses)) {
                    throw DataError("probs must hold 6 numbers");
                }
                for (int c = 0; c < kNumClasses; ++c) {
                    p[static_cast<std::size_t>(c)] = arr[static_cast<std::size_t>(c)].get<double>();
                }
                normalize_probs(p);
                b.any_soft = true;
            } else if (j.contains("label")) {
                p[static_cast<std::size_t>(rank_from_label_token(j["label"]) - 1)] = 1.0;
            } else {
                throw DataError("expected probs or label");
            }
        } catch (const json::exception& e) {
            throw MalformedRow(line_no, e.what());
        } catch (const DataError& e) {
            throw MalformedRow(line_no, e.what());
        }
        b.set.case_ids.push_back(case_id);
        b.set.probs.push_back(p);
    }
    if (builders.empty()) throw EmptySource();

    std::vector<PredictionSet> out;
    out.reserve(builders.size());
    for (auto& b : builders) {
        b.set.hard_labels = !b.any_soft;
        out.push_back(std::move(b.set));
    }
    return out;
}

void serialize_predictions(const PredictionSet& set, std::ostream& out,
                           LabelSelector label_tokens) {
    for (std::size_t i = 0; i < set.case_ids.size(); ++i) {
        json j;
        j["case_id"] = set.case_ids[i];
        j["process"] = set.process;
        if (set.hard_labels) {
            const int rank = argmax_rank(set.probs[i]);
            if (label_tokens == LabelSelector::Gemsa) {
                j["label"] = std::to_string(rank);
            } else {
                j["label"] = triage_token(triage_from_rank(rank));
            }
        } else {
            j["probs"] = set.probs[i];
        }
        out << j.dump() << '\n';
    }
}

AlignedPredictions align_predictions(const PredictionSet& set,
                                     const std::vector<std::pair<std::string, int>>& gold) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < set.case_ids.size(); ++i) index.emplace(set.case_ids[i], i);

    AlignedPredictions out;
    out.case_ids.reserve(gold.size());
    out.probs.reserve(gold.size());
    out.gold.reserve(gold.size());
    for (const auto& [case_id, rank] : gold) {
        const auto it = index.find(case_id);
        if (it == index.end()) {
            throw DataError("process " + set.process + " lacks a prediction for case " + case_id);
        }
        out.case_ids.push_back(case_id);
        out.probs.push_back(set.probs[it->second]);
        out.gold.push_back(rank);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scalar metrics
// ---------------------------------------------------------------------------

std::pair<double, double> ordinal_error(const std::vector<int>& pred_ranks,
                                        const std::vector<int>& gold_ranks) {
    check_ranks(pred_ranks, gold_ranks);
    double abs_sum = 0, sq_sum = 0;
    for (std::size_t i = 0; i < pred_ranks.size(); ++i) {
        const double d = pred_ranks[i] - gold_ranks[i];
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const auto n = static_cast<double>(pred_ranks.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

double weighted_kappa(const std::vector<int>& pred_ranks, const std::vector<int>& gold_ranks,
                      KappaWeighting weighting) {
    check_ranks(pred_ranks, gold_ranks);
    const std::size_t K = kNumClasses;
    std::vector<double> joint(K * K, 0.0);
    std::vector<double> gold_marginal(K, 0.0), pred_marginal(K, 0.0);
    for (std::size_t i = 0; i < pred_ranks.size(); ++i) {
        const auto g = static_cast<std::size_t>(gold_ranks[i] - 1);
        const auto p = static_cast<std::size_t>(pred_ranks[i] - 1);
        joint[g * K + p] += 1.0;
        gold_marginal[g] += 1.0;
        pred_marginal[p] += 1.0;
    }
    const auto n = static_cast<double>(pred_ranks.size());

    double num = 0, den = 0;
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            const double diff = (static_cast<double>(i) - static_cast<double>(j)) /
                                static_cast<double>(K - 1);
            const double w =
                weighting == KappaWeighting::Quadratic ? diff * diff : std::abs(diff);
            num += w * joint[i * K + j];
            den += w * gold_marginal[i] * pred_marginal[j] / n;
        }
    }
    if (den == 0.0) throw DegenerateMarginals();
    return 1.0 - num / den;
}

namespace {

// 1-based ranks with ties averaged
std::vector<double> midranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

} // namespace

double rank_correlation(const std::vector<int>& pred_ranks, const std::vector<int>& gold_ranks) {
    check_ranks(pred_ranks, gold_ranks);
    const std::size_t n = pred_ranks.size();
    if (std::all_of(pred_ranks.begin(), pred_ranks.end(),
                    [&](int r) { return r == pred_ranks[0]; })) {
        throw ConstantInput("pred");
    }
    if (std::all_of(gold_ranks.begin(), gold_ranks.end(),
                    [&](int r) { return r == gold_ranks[0]; })) {
        throw ConstantInput("gold");
    }
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = static_cast<double>(pred_ranks[i]);
        b[i] = static_cast<double>(gold_ranks[i]);
    }
    const std::vector<double> ra = midranks(a), rb = midranks(b);
    const double ma = mean_of(ra), mb = mean_of(rb);
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

F1Result f1_suite(const std::vector<int>& pred_ranks, const std::vector<int>& gold_ranks) {
    check_ranks(pred_ranks, gold_ranks);
    std::array<double, kNumClasses> tp{}, fp{}, fn{};
    for (std::size_t i = 0; i < pred_ranks.size(); ++i) {
        const auto p = static_cast<std::size_t>(pred_ranks[i] - 1);
        const auto g = static_cast<std::size_t>(gold_ranks[i] - 1);
        if (p == g) {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn[g] += 1;
        }
    }
    F1Result r;
    double macro_sum = 0;
    std::size_t macro_n = 0;
    double tp_all = 0, fp_all = 0, fn_all = 0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(kNumClasses); ++c) {
        const double denom = tp[c] + (fp[c] + fn[c]) / 2.0;
        r.per_class[c] = denom == 0.0 ? 0.0 : tp[c] / denom;
        r.in_macro[c] = tp[c] + fp[c] + fn[c] > 0.0;
        if (r.in_macro[c]) {
            macro_sum += r.per_class[c];
            ++macro_n;
        }
        tp_all += tp[c];
        fp_all += fp[c];
        fn_all += fn[c];
    }
    r.macro = macro_n == 0 ? 0.0 : macro_sum / static_cast<double>(macro_n);
    const double micro_denom = tp_all + (fp_all + fn_all) / 2.0;
    r.micro = micro_denom == 0.0 ? 0.0 : tp_all / micro_denom;
    return r;
}

std::pair<double, double> agreement_rates(const std::vector<int>& pred_ranks,
                                          const std::vector<int>& gold_ranks) {
    check_ranks(pred_ranks, gold_ranks);
    std::size_t exact = 0, near = 0;
    for (std::size_t i = 0; i < pred_ranks.size(); ++i) {
        const int d = std::abs(pred_ranks[i] - gold_ranks[i]);
        if (d == 0) ++exact;
        if (d <= 1) ++near;
    }
    const auto n = static_cast<double>(pred_ranks.size());
    return {static_cast<double>(exact) / n, static_cast<double>(near) / n};
}

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

AucEstimate auc_delong(const std::vector<double>& scores, const std::vector<bool>& positive,
                       double alpha) {
    if (scores.size() != positive.size()) throw LengthMismatch(scores.size(), positive.size());
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        (positive[i] ? pos : neg).push_back(scores[i]);
    }
    if (pos.empty() || neg.empty()) throw ClassNotComputable(0);
    const auto m = static_cast<double>(pos.size());
    const auto n = static_cast<double>(neg.size());

    std::vector<double> combined = pos;
    combined.insert(combined.end(), neg.begin(), neg.end());
    const std::vector<double> r_all = midranks(combined);
    const std::vector<double> r_pos = midranks(pos);
    const std::vector<double> r_neg = midranks(neg);

    double sum_pos_ranks = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) sum_pos_ranks += r_all[i];
    const double auc = (sum_pos_ranks - m * (m + 1.0) / 2.0) / (m * n);

    // placement values
    double s10 = 0, s01 = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        const double v = (r_all[i] - r_pos[i]) / n;
        s10 += (v - auc) * (v - auc);
    }
    s10 = pos.size() > 1 ? s10 / (m - 1.0) : 0.0;
    for (std::size_t j = 0; j < neg.size(); ++j) {
        const double v = 1.0 - (r_all[pos.size() + j] - r_neg[j]) / m;
        s01 += (v - auc) * (v - auc);
    }
    s01 = neg.size() > 1 ? s01 / (n - 1.0) : 0.0;

    AucEstimate est;
    est.auc = auc;
    est.variance = s10 / m + s01 / n;
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const double half = z * std::sqrt(est.variance);
    est.ci_lower = std::max(0.0, auc - half);
    est.ci_upper = std::min(1.0, auc + half);
    return est;
}

namespace {

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<bool>& positive) {
    std::size_t m = 0, n = 0;
    for (bool b : positive) (b ? m : n) += 1;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> curve;
    curve.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (positive[order[i]]) ++tp;
            else ++fp;
            ++i;
        }
        curve.push_back({static_cast<double>(fp) / static_cast<double>(n),
                         static_cast<double>(tp) / static_cast<double>(m)});
    }
    return curve;
}

// tpr at the given fpr; vertical jumps resolve to their upper end
double interp_tpr(const std::vector<RocPoint>& curve, double fpr) {
    std::size_t last_le = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (curve[i].fpr <= fpr) last_le = i;
        else break;
    }
    if (curve[last_le].fpr == fpr || last_le + 1 == curve.size()) return curve[last_le].tpr;
    const RocPoint& a = curve[last_le];
    const RocPoint& b = curve[last_le + 1];
    const double t = (fpr - a.fpr) / (b.fpr - a.fpr);
    return a.tpr + t * (b.tpr - a.tpr);
}

} // namespace

RocAnalysis roc_analysis(const PredictionSet& set, const std::vector<int>& gold_ranks,
                         double alpha) {
    if (set.probs.size() != gold_ranks.size()) {
        throw LengthMismatch(set.probs.size(), gold_ranks.size());
    }
    if (set.probs.empty()) throw EmptyInput();

    RocAnalysis out;
    out.alpha = alpha;
    out.degenerate = set.hard_labels;

    const std::size_t n = set.probs.size();
    std::vector<double> scores(n);
    std::vector<bool> positive(n);

    double macro_sum = 0;
    std::size_t macro_n = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = set.probs[i][static_cast<std::size_t>(c)];
            positive[i] = gold_ranks[i] == c + 1;
        }
        auto& cls = out.per_class[static_cast<std::size_t>(c)];
        try {
            cls.auc = auc_delong(scores, positive, alpha);
        } catch (const ClassNotComputable&) {
            continue; // stays non-computable, excluded from the macro mean
        }
        cls.computable = true;
        cls.curve = roc_curve(scores, positive);
        macro_sum += cls.auc.auc;
        ++macro_n;
    }
    if (macro_n > 0) {
        out.macro_computable = true;
        out.macro_auc = macro_sum / static_cast<double>(macro_n);
        out.mean_curve.reserve(101);
        for (int k = 0; k <= 100; ++k) {
            const double fpr = static_cast<double>(k) / 100.0;
            double tpr_sum = 0;
            for (const auto& cls : out.per_class) {
                if (cls.computable) tpr_sum += interp_tpr(cls.curve, fpr);
            }
            out.mean_curve.push_back({fpr, tpr_sum / static_cast<double>(macro_n)});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bundled report and composite ranking
// ---------------------------------------------------------------------------

MetricReport compute_metric_report(const PredictionSet& set, const std::vector<int>& gold_ranks,
                                   KappaWeighting weighting, double alpha) {
    if (set.probs.size() != gold_ranks.size()) {
        throw LengthMismatch(set.probs.size(), gold_ranks.size());
    }
    std::vector<int> pred_ranks(set.probs.size());
    for (std::size_t i = 0; i < set.probs.size(); ++i) {
        pred_ranks[i] = argmax_rank(set.probs[i]);
    }

    MetricReport r;
    std::tie(r.mae, r.rmse) = ordinal_error(pred_ranks, gold_ranks);
    r.kappa = weighted_kappa(pred_ranks, gold_ranks, weighting);
    r.spearman = rank_correlation(pred_ranks, gold_ranks);
    const F1Result f1 = f1_suite(pred_ranks, gold_ranks);
    r.f1_micro = f1.micro;
    r.f1_macro = f1.macro;
    r.per_class_f1 = f1.per_class;
    r.f1_in_macro = f1.in_macro;
    std::tie(r.exact_agreement, r.near_agreement) = agreement_rates(pred_ranks, gold_ranks);
    r.roc = roc_analysis(set, gold_ranks, alpha);
    return r;
}

std::vector<CompositeEntry> composite_ranking(std::vector<ProcessMetricsRow> rows,
                                              bool include_gold_row) {
    if (include_gold_row) {
        for (const auto& r : rows) {
            if (r.process == "gold") {
                throw ConfigError("a process named gold collides with the reference row");
            }
        }
        rows.push_back({"gold", 0.0, 0.0, 1.0, 1.0});
    }
    if (rows.size() < 2) throw DataError("composite ranking needs at least two rows");
    for (const auto& r : rows) {
        for (double v : {r.mae, r.rmse, r.kappa, r.spearman}) {
            if (!std::isfinite(v)) throw DataError("non-finite metric for " + r.process);
        }
    }

    const char* names[4] = {"mae", "rmse", "kappa", "spearman"};
    std::vector<std::array<double, 4>> t(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        t[i] = {-rows[i].mae, -rows[i].rmse, rows[i].kappa, rows[i].spearman};
    }
    std::vector<CompositeEntry> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i].process = rows[i].process;

    std::vector<double> column(rows.size());
    for (std::size_t k = 0; k < 4; ++k) {
        for (std::size_t i = 0; i < rows.size(); ++i) column[i] = t[i][k];
        const double mean = mean_of(column);
        const double sd = population_sd(column);
        if (sd == 0.0) throw ZeroSpread(names[k]);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out[i].composite += (column[i] - mean) / sd;
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const CompositeEntry& a, const CompositeEntry& b) {
        return a.composite > b.composite;
    });
    return out;
}

} // namespace triagekit
