#include "triagekit/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "triagekit/detail/csv.hpp"
#include "triagekit/rng.hpp"

namespace triagekit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Label scales
// ---------------------------------------------------------------------------

int triage_rank(TriageLevel level) {
    return static_cast<int>(level) + 1;
}

TriageLevel triage_from_rank(int rank) {
    if (rank < 1 || rank > kNumClasses) {
        throw DataError("triage rank out of range: " + std::to_string(rank));
    }
    return static_cast<TriageLevel>(rank - 1);
}

std::string triage_token(TriageLevel level) {
    switch (level) {
        case TriageLevel::T1: return "1";
        case TriageLevel::T2: return "2";
        case TriageLevel::T3A: return "3A";
        case TriageLevel::T3B: return "3B";
        case TriageLevel::T4: return "4";
        case TriageLevel::T5: return "5";
    }
    throw DataError("invalid triage level");
}

TriageLevel triage_from_token(const std::string& token) {
    if (token == "1") return TriageLevel::T1;
    if (token == "2") return TriageLevel::T2;
    if (token == "3A") return TriageLevel::T3A;
    if (token == "3B") return TriageLevel::T3B;
    if (token == "4") return TriageLevel::T4;
    if (token == "5") return TriageLevel::T5;
    throw DataError("unknown triage token: \"" + token + "\"");
}

int gemsa_rank(GemsaCode code) {
    if (code == GemsaCode::Unspecified) {
        throw DataError("gemsa_rank: code is unspecified");
    }
    return static_cast<int>(code) + 1;
}

GemsaCode gemsa_from_rank(int rank) {
    if (rank < 1 || rank > kNumClasses) {
        throw DataError("gemsa rank out of range: " + std::to_string(rank));
    }
    return static_cast<GemsaCode>(rank - 1);
}

std::string gemsa_token(GemsaCode code) {
    if (code == GemsaCode::Unspecified) return "";
    return std::to_string(gemsa_rank(code));
}

GemsaCode gemsa_from_token(const std::string& token) {
    if (token.empty()) return GemsaCode::Unspecified;
    if (token.size() == 1 && token[0] >= '1' && token[0] <= '6') {
        return gemsa_from_rank(token[0] - '0');
    }
    throw DataError("unknown gemsa token: \"" + token + "\"");
}

// ---------------------------------------------------------------------------
// Tokens for the remaining enums
// ---------------------------------------------------------------------------

std::string sex_token(Sex s) {
    return s == Sex::M ? "M" : "F";
}

Sex sex_from_token(const std::string& token) {
    if (token == "M") return Sex::M;
    if (token == "F") return Sex::F;
    throw DataError("unknown sex token: \"" + token + "\"");
}

std::string window_token(AdmissionWindow w) {
    switch (w) {
        case AdmissionWindow::Night: return "21-06";
        case AdmissionWindow::Morning: return "06-14";
        case AdmissionWindow::Afternoon: return "14-21";
    }
    throw DataError("invalid admission window");
}

AdmissionWindow window_from_token(const std::string& token) {
    if (token == "21-06") return AdmissionWindow::Night;
    if (token == "06-14") return AdmissionWindow::Morning;
    if (token == "14-21") return AdmissionWindow::Afternoon;
    throw DataError("unknown admission window token: \"" + token + "\"");
}

namespace {

constexpr const char* kRecourseTokens[kNumRecourse] = {
    "ABDO", "CARDIO", "VARIOUS", "GU", "GYN_OB", "INFECT", "POISON", "NEURO",
    "OPHTH", "ENT_STOMA", "DERM", "PSY", "PULM", "RHEUM", "TRAUMA"};

} // namespace

std::string recourse_token(Recourse r) {
    return kRecourseTokens[static_cast<int>(r)];
}

Recourse recourse_from_token(const std::string& token) {
    for (int i = 0; i < kNumRecourse; ++i) {
        if (token == kRecourseTokens[i]) return static_cast<Recourse>(i);
    }
    throw DataError("unknown recourse token: \"" + token + "\"");
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

MalformedRow::MalformedRow(std::size_t line_no, const std::string& reason)
    : DataError("malformed row at line " + std::to_string(line_no) + ": " + reason),
      line(line_no) {}

DuplicateCaseId::DuplicateCaseId(const std::string& id)
    : DataError("duplicate case_id: " + id), case_id(id) {}

EmptySource::EmptySource() : DataError("source contains no records") {}

MissingStratumLabel::MissingStratumLabel(const std::string& id)
    : DataError("record lacks the stratum label: " + id), case_id(id) {}

InvalidSpec::InvalidSpec(const std::string& reason)
    : DataError("invalid marginal spec: " + reason) {}

// ---------------------------------------------------------------------------
// Record validation
// ---------------------------------------------------------------------------

namespace {

void validate_record(const PatientRecord& r, std::size_t line) {
    if (r.case_id.empty()) throw MalformedRow(line, "empty case_id");
    if (r.age < 18) throw MalformedRow(line, "age below the adult threshold");
    const Vitals& v = r.vitals;
    for (double x : {v.sbp, v.dbp, v.hr, v.temp, v.eva, v.spo2, v.o2}) {
        if (!std::isfinite(x)) throw MalformedRow(line, "non-finite vital sign");
    }
    if (v.spo2 < 0 || v.spo2 > 100) throw MalformedRow(line, "spo2 outside [0, 100]");
    if (v.eva < 0 || v.eva > 10) throw MalformedRow(line, "eva outside [0, 10]");
    if (v.o2 < 0) throw MalformedRow(line, "o2 below zero");
}

int parse_int(const std::string& s, std::size_t line, const char* what) {
    int value = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw MalformedRow(line, std::string("cannot parse ") + what + ": \"" + s + "\"");
    }
    return value;
}

double parse_double(const std::string& s, std::size_t line, const char* what) {
    try {
        std::size_t pos = 0;
        const double value = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return value;
    } catch (const std::exception&) {
        throw MalformedRow(line, std::string("cannot parse ") + what + ": \"" + s + "\"");
    }
}

bool parse_bool01(const std::string& s, std::size_t line, const char* what) {
    if (s == "0") return false;
    if (s == "1") return true;
    throw MalformedRow(line, std::string("expected 0/1 for ") + what + ": \"" + s + "\"");
}

const std::vector<std::string> kHeaderFields = {
    "case_id", "age", "sex", "admission_window", "recourse",
    "comorbidity_any", "comorbidity_vascular", "sbp", "dbp", "hr", "temp",
    "eva", "spo2", "o2", "history_text", "nurse_triage", "gold_triage", "gemsa"};

PatientRecord record_from_fields(const std::vector<std::string>& f, std::size_t line) {
    if (f.size() != kHeaderFields.size()) {
        throw MalformedRow(line, "expected " + std::to_string(kHeaderFields.size()) +
                                     " fields, got " + std::to_string(f.size()));
    }
    PatientRecord r;
    r.case_id = f[0];
    r.age = parse_int(f[1], line, "age");
    try {
        r.sex = sex_from_token(f[2]);
        r.admission_window = window_from_token(f[3]);
        r.recourse = recourse_from_token(f[4]);
        r.comorbidity_any = parse_bool01(f[5], line, "comorbidity_any");
        r.comorbidity_vascular = parse_bool01(f[6], line, "comorbidity_vascular");
        r.vitals.sbp = parse_double(f[7], line, "sbp");
        r.vitals.dbp = parse_double(f[8], line, "dbp");
        r.vitals.hr = parse_double(f[9], line, "hr");
        r.vitals.temp = parse_double(f[10], line, "temp");
        r.vitals.eva = parse_double(f[11], line, "eva");
        r.vitals.spo2 = parse_double(f[12], line, "spo2");
        r.vitals.o2 = parse_double(f[13], line, "o2");
        if (!f[14].empty()) r.history_text = f[14];
        if (!f[15].empty()) r.nurse_triage = triage_from_token(f[15]);
        if (!f[16].empty()) r.gold_triage = triage_from_token(f[16]);
        r.gemsa = gemsa_from_token(f[17]);
    } catch (const MalformedRow&) {
        throw;
    } catch (const DataError& e) {
        throw MalformedRow(line, e.what());
    }
    validate_record(r, line);
    return r;
}

PatientRecord record_from_json(const std::string& text, std::size_t line) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw MalformedRow(line, std::string("invalid json: ") + e.what());
    }
    if (!j.is_object()) throw MalformedRow(line, "expected a json object");

    auto str = [&](const char* key) -> std::string {
        if (!j.contains(key)) throw MalformedRow(line, std::string("missing field ") + key);
        if (!j[key].is_string()) throw MalformedRow(line, std::string("expected string for ") + key);
        return j[key].get<std::string>();
    };
    auto num = [&](const char* key) -> double {
        if (!j.contains(key) || !j[key].is_number()) {
            throw MalformedRow(line, std::string("missing numeric field ") + key);
        }
        return j[key].get<double>();
    };
    auto flag = [&](const char* key) -> bool {
        if (!j.contains(key) || !j[key].is_boolean()) {
            throw MalformedRow(line, std::string("missing boolean field ") + key);
        }
        return j[key].get<bool>();
    };
    auto opt_str = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        if (!j[key].is_string()) throw MalformedRow(line, std::string("expected string for ") + key);
        std::string s = j[key].get<std::string>();
        if (s.empty()) return std::nullopt;
        return s;
    };

    PatientRecord r;
    try {
        r.case_id = str("case_id");
        const double age = num("age");
        if (age != std::floor(age)) throw MalformedRow(line, "age must be an integer");
        r.age = static_cast<int>(age);
        r.sex = sex_from_token(str("sex"));
        r.admission_window = window_from_token(str("admission_window"));
        r.recourse = recourse_from_token(str("recourse"));
        r.comorbidity_any = flag("comorbidity_any");
        r.comorbidity_vascular = flag("comorbidity_vascular");
        r.vitals.sbp = num("sbp");
        r.vitals.dbp = num("dbp");
        r.vitals.hr = num("hr");
        r.vitals.temp = num("temp");
        r.vitals.eva = num("eva");
        r.vitals.spo2 = num("spo2");
        r.vitals.o2 = num("o2");
        r.history_text = opt_str("history_text");
        if (auto t = opt_str("nurse_triage")) r.nurse_triage = triage_from_token(*t);
        if (auto t = opt_str("gold_triage")) r.gold_triage = triage_from_token(*t);
        if (auto t = opt_str("gemsa")) r.gemsa = gemsa_from_token(*t);
    } catch (const MalformedRow&) {
        throw;
    } catch (const DataError& e) {
        throw MalformedRow(line, e.what());
    }
    validate_record(r, line);
    return r;
}

} // namespace

// ---------------------------------------------------------------------------
// Ingest / serialize
// ---------------------------------------------------------------------------

Cohort ingest_cohort(std::istream& source, CohortFormat format) {
    Cohort cohort;
    cohort.provenance = Provenance::Ingested;
    std::unordered_set<std::string> seen_ids;

    std::string line;
    std::size_t line_no = 0;

    const bool table = format == CohortFormat::DelimitedTable;
    const auto next_record = [&] {
        return table ? detail::read_csv_record(source, line)
                     : static_cast<bool>(std::getline(source, line));
    };

    if (table) {
        if (!next_record()) throw EmptySource();
        ++line_no;
        const auto header = detail::split_csv_line(line);
        if (header != kHeaderFields) {
            throw MalformedRow(line_no, "header does not match the cohort schema");
        }
    }

    while (next_record()) {
        ++line_no;
        if (line.empty()) continue;
        PatientRecord r = (format == CohortFormat::DelimitedTable)
                              ? record_from_fields(detail::split_csv_line(line), line_no)
                              : record_from_json(line, line_no);
        if (!seen_ids.insert(r.case_id).second) throw DuplicateCaseId(r.case_id);
        cohort.records.push_back(std::move(r));
    }
    if (cohort.records.empty()) throw EmptySource();
    return cohort;
}

namespace {

CohortFormat format_from_path(const std::string& path) {
    if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl") {
        return CohortFormat::RecordPerLine;
    }
    return CohortFormat::DelimitedTable;
}

} // namespace

Cohort ingest_cohort_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cohort file: " + path);
    return ingest_cohort(in, format_from_path(path));
}

void serialize_cohort(const Cohort& cohort, std::ostream& out, CohortFormat format) {
    using detail::csv_field;
    using detail::csv_quoted;
    using detail::format_double;

    if (format == CohortFormat::DelimitedTable) {
        for (std::size_t i = 0; i < kHeaderFields.size(); ++i) {
            if (i) out << ',';
            out << kHeaderFields[i];
        }
        out << '\n';
        for (const auto& r : cohort.records) {
            out << csv_field(r.case_id) << ',' << r.age << ',' << sex_token(r.sex) << ','
                << window_token(r.admission_window) << ',' << recourse_token(r.recourse) << ','
                << (r.comorbidity_any ? '1' : '0') << ',' << (r.comorbidity_vascular ? '1' : '0')
                << ',' << format_double(r.vitals.sbp) << ',' << format_double(r.vitals.dbp) << ','
                << format_double(r.vitals.hr) << ',' << format_double(r.vitals.temp) << ','
                << format_double(r.vitals.eva) << ',' << format_double(r.vitals.spo2) << ','
                << format_double(r.vitals.o2) << ','
                << csv_quoted(r.history_text.value_or("")) << ','
                << (r.nurse_triage ? triage_token(*r.nurse_triage) : "") << ','
                << (r.gold_triage ? triage_token(*r.gold_triage) : "") << ','
                << gemsa_token(r.gemsa) << '\n';
        }
    } else {
        for (const auto& r : cohort.records) {
            json j;
            j["case_id"] = r.case_id;
            j["age"] = r.age;
            j["sex"] = sex_token(r.sex);
            j["admission_window"] = window_token(r.admission_window);
            j["recourse"] = recourse_token(r.recourse);
            j["comorbidity_any"] = r.comorbidity_any;
            j["comorbidity_vascular"] = r.comorbidity_vascular;
            j["sbp"] = r.vitals.sbp;
            j["dbp"] = r.vitals.dbp;
            j["hr"] = r.vitals.hr;
            j["temp"] = r.vitals.temp;
            j["eva"] = r.vitals.eva;
            j["spo2"] = r.vitals.spo2;
            j["o2"] = r.vitals.o2;
            if (r.history_text) j["history_text"] = *r.history_text;
            else j["history_text"] = nullptr;
            if (r.nurse_triage) j["nurse_triage"] = triage_token(*r.nurse_triage);
            else j["nurse_triage"] = nullptr;
            if (r.gold_triage) j["gold_triage"] = triage_token(*r.gold_triage);
            else j["gold_triage"] = nullptr;
            if (r.gemsa != GemsaCode::Unspecified) j["gemsa"] = gemsa_token(r.gemsa);
            else j["gemsa"] = nullptr;
            out << j.dump() << '\n';
        }
    }
}

void serialize_cohort_file(const Cohort& cohort, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write cohort file: " + path);
    serialize_cohort(cohort, out, format_from_path(path));
}

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

std::optional<int> selected_rank(const PatientRecord& record, LabelSelector selector) {
    switch (selector) {
        case LabelSelector::GoldTriage:
            if (record.gold_triage) return triage_rank(*record.gold_triage);
            return std::nullopt;
        case LabelSelector::NurseTriage:
            if (record.nurse_triage) return triage_rank(*record.nurse_triage);
            return std::nullopt;
        case LabelSelector::Gemsa:
            if (record.gemsa != GemsaCode::Unspecified) return gemsa_rank(record.gemsa);
            return std::nullopt;
    }
    return std::nullopt;
}

SplitResult stratified_split(const Cohort& cohort, double train_fraction,
                             LabelSelector strata, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
    if (cohort.records.empty()) throw EmptySource();

    // group record indices per stratum rank
    std::array<std::vector<std::size_t>, kNumClasses> strata_idx;
    for (std::size_t i = 0; i < cohort.records.size(); ++i) {
        const auto rank = selected_rank(cohort.records[i], strata);
        if (!rank) throw MissingStratumLabel(cohort.records[i].case_id);
        strata_idx[static_cast<std::size_t>(*rank - 1)].push_back(i);
    }

    const std::size_t n = cohort.records.size();
    const auto target_total =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));

    // floor allocation, then hand out remaining slots by largest remainder
    std::array<std::size_t, kNumClasses> alloc{};
    std::size_t allocated = 0;
    std::vector<std::pair<double, std::size_t>> remainders; // (remainder, stratum)
    for (std::size_t s = 0; s < kNumClasses; ++s) {
        const double exact = train_fraction * static_cast<double>(strata_idx[s].size());
        alloc[s] = static_cast<std::size_t>(std::floor(exact));
        allocated += alloc[s];
        remainders.emplace_back(exact - std::floor(exact), s);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; allocated < target_total; k = (k + 1) % remainders.size()) {
        const std::size_t s = remainders[k].second;
        if (alloc[s] < strata_idx[s].size()) {
            ++alloc[s];
            ++allocated;
        }
    }

    Rng rng(seed);
    std::vector<char> in_train(n, 0);
    for (std::size_t s = 0; s < kNumClasses; ++s) {
        auto idx = strata_idx[s];
        rng.shuffle(idx);
        for (std::size_t k = 0; k < alloc[s]; ++k) in_train[idx[k]] = 1;
    }

    SplitResult result;
    result.train.provenance = cohort.provenance;
    result.validation.provenance = cohort.provenance;
    for (std::size_t i = 0; i < n; ++i) {
        (in_train[i] ? result.train : result.validation).records.push_back(cohort.records[i]);
    }
    return result;
}

} // namespace triagekit
