#include "triagekit/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "triagekit/detail/csv.hpp"
#include "triagekit/detail/hash.hpp"
#include "triagekit/rng.hpp"
#include "triagekit/stats.hpp"

namespace triagekit {

using nlohmann::json;

SchemaMismatch::SchemaMismatch(const std::string& reason)
    : DataError("schema mismatch: " + reason) {}

// ---------------------------------------------------------------------------
// Schema fitting
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<const char*, 8> kContinuousNames = {
    "age", "sbp", "dbp", "hr", "temp", "eva", "spo2", "o2"};

double continuous_value(const PatientRecord& r, std::size_t which) {
    switch (which) {
        case 0: return static_cast<double>(r.age);
        case 1: return r.vitals.sbp;
        case 2: return r.vitals.dbp;
        case 3: return r.vitals.hr;
        case 4: return r.vitals.temp;
        case 5: return r.vitals.eva;
        case 6: return r.vitals.spo2;
        default: return r.vitals.o2;
    }
}

double continuous_by_name(const PatientRecord& r, const std::string& name) {
    for (std::size_t i = 0; i < kContinuousNames.size(); ++i) {
        if (name == kContinuousNames[i]) return continuous_value(r, i);
    }
    throw SchemaMismatch("unknown continuous feature: " + name);
}

} // namespace

EncoderSchema fit_schema(const Cohort& train, std::size_t d_text, std::uint64_t seed) {
    if (train.records.empty()) throw EmptySource();

    EncoderSchema schema;
    schema.d_text = d_text;
    schema.hash_seed = seed;

    std::vector<double> column(train.records.size());
    for (std::size_t f = 0; f < kContinuousNames.size(); ++f) {
        for (std::size_t i = 0; i < train.records.size(); ++i) {
            column[i] = continuous_value(train.records[i], f);
        }
        const double mean = mean_of(column);
        const double sd = population_sd(column);
        if (sd > 0.0) {
            schema.continuous.push_back({kContinuousNames[f], mean, sd});
        } else {
            schema.dropped_continuous.emplace_back(kContinuousNames[f]);
        }
    }

    std::set<std::string> sex, window, recourse;
    for (const auto& r : train.records) {
        sex.insert(sex_token(r.sex));
        window.insert(window_token(r.admission_window));
        recourse.insert(recourse_token(r.recourse));
    }
    // keep enum order, restricted to levels seen in train
    for (Sex s : {Sex::M, Sex::F}) {
        if (sex.count(sex_token(s))) schema.sex_levels.push_back(sex_token(s));
    }
    for (auto w : {AdmissionWindow::Night, AdmissionWindow::Morning, AdmissionWindow::Afternoon}) {
        if (window.count(window_token(w))) schema.window_levels.push_back(window_token(w));
    }
    for (int i = 0; i < kNumRecourse; ++i) {
        const std::string tok = recourse_token(static_cast<Recourse>(i));
        if (recourse.count(tok)) schema.recourse_levels.push_back(tok);
    }
    return schema;
}

std::size_t EncoderSchema::structured_dim() const {
    return continuous.size() + (sex_levels.size() + 1) + (window_levels.size() + 1) +
           (recourse_levels.size() + 1) + 2;
}

std::string EncoderSchema::id() const {
    std::ostringstream canon;
    for (const auto& c : continuous) {
        canon << c.name << '=' << detail::format_double(c.mean) << '/'
              << detail::format_double(c.sd) << ';';
    }
    canon << '|';
    for (const auto& n : dropped_continuous) canon << n << ';';
    canon << '|';
    for (const auto& l : sex_levels) canon << l << ';';
    canon << '|';
    for (const auto& l : window_levels) canon << l << ';';
    canon << '|';
    for (const auto& l : recourse_levels) canon << l << ';';
    canon << '|' << d_text << '|' << hash_seed;
    return detail::hex64(detail::fnv1a64(canon.str()));
}

void schema_to_json(const EncoderSchema& schema, std::ostream& out) {
    json j;
    j["continuous"] = json::array();
    for (const auto& c : schema.continuous) {
        j["continuous"].push_back({{"name", c.name}, {"mean", c.mean}, {"sd", c.sd}});
    }
    j["dropped_continuous"] = schema.dropped_continuous;
    j["sex_levels"] = schema.sex_levels;
    j["window_levels"] = schema.window_levels;
    j["recourse_levels"] = schema.recourse_levels;
    j["d_text"] = schema.d_text;
    j["hash_seed"] = schema.hash_seed;
    out << j.dump(2) << '\n';
}

EncoderSchema schema_from_json(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid schema json: ") + e.what());
    }
    EncoderSchema schema;
    try {
        for (const auto& c : j.at("continuous")) {
            ContinuousFeature f;
            f.name = c.at("name").get<std::string>();
            f.mean = c.at("mean").get<double>();
            f.sd = c.at("sd").get<double>();
            if (!(f.sd > 0.0)) throw DataError("schema sd must be positive");
            schema.continuous.push_back(std::move(f));
        }
        schema.dropped_continuous = j.at("dropped_continuous").get<std::vector<std::string>>();
        schema.sex_levels = j.at("sex_levels").get<std::vector<std::string>>();
        schema.window_levels = j.at("window_levels").get<std::vector<std::string>>();
        schema.recourse_levels = j.at("recourse_levels").get<std::vector<std::string>>();
        schema.d_text = j.at("d_text").get<std::size_t>();
        schema.hash_seed = j.at("hash_seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid schema json: ") + e.what());
    }
    return schema;
}

// ---------------------------------------------------------------------------
// Structured encoding
// ---------------------------------------------------------------------------

namespace {

void one_hot(std::vector<double>& out, const std::vector<std::string>& levels,
             const std::string& token) {
    const std::size_t base = out.size();
    out.resize(base + levels.size() + 1, 0.0);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] == token) {
            out[base + i] = 1.0;
            return;
        }
    }
    out[base + levels.size()] = 1.0; // OTHER
}

} // namespace

FeatureVector encode_structured(const PatientRecord& record, const EncoderSchema& schema) {
    FeatureVector fv;
    fv.schema_id = schema.id();
    fv.values.reserve(schema.structured_dim());
    for (const auto& c : schema.continuous) {
        fv.values.push_back((continuous_by_name(record, c.name) - c.mean) / c.sd);
    }
    one_hot(fv.values, schema.sex_levels, sex_token(record.sex));
    one_hot(fv.values, schema.window_levels, window_token(record.admission_window));
    one_hot(fv.values, schema.recourse_levels, recourse_token(record.recourse));
    fv.values.push_back(record.comorbidity_any ? 1.0 : 0.0);
    fv.values.push_back(record.comorbidity_vascular ? 1.0 : 0.0);
    return fv;
}

// ---------------------------------------------------------------------------
// Hashed text features
// ---------------------------------------------------------------------------

namespace {

// Folds the accented letters that occur in French clinical notes; everything
// else outside ASCII is treated as a separator.
void append_folded(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        if (cp >= 'A' && cp <= 'Z') cp += 32;
        if ((cp >= 'a' && cp <= 'z') || (cp >= '0' && cp <= '9')) {
            out.push_back(static_cast<char>(cp));
        } else {
            out.push_back(' ');
        }
        return;
    }
    switch (cp) {
        case U'à': case U'â': case U'ä': case U'À': case U'Â': case U'Ä':
            out.push_back('a'); break;
        case U'ç': case U'Ç':
            out.push_back('c'); break;
        case U'é': case U'è': case U'ê': case U'ë':
        case U'É': case U'È': case U'Ê': case U'Ë':
            out.push_back('e'); break;
        case U'î': case U'ï': case U'Î': case U'Ï':
            out.push_back('i'); break;
        case U'ô': case U'ö': case U'Ô': case U'Ö':
            out.push_back('o'); break;
        case U'ù': case U'û': case U'ü': case U'Ù': case U'Û': case U'Ü':
            out.push_back('u'); break;
        case U'ÿ': case U'Ÿ':
            out.push_back('y'); break;
        case U'æ': case U'Æ':
            out += "ae"; break;
        case U'œ': case U'Œ':
            out += "oe"; break;
        default:
            out.push_back(' ');
    }
}

// Minimal UTF-8 decoding; malformed bytes act as separators.
std::string normalize_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto b0 = static_cast<unsigned char>(text[i]);
        char32_t cp = 0;
        std::size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 >> 5) == 0x6 && i + 1 < text.size()) {
            cp = static_cast<char32_t>((b0 & 0x1f) << 6 |
                                       (static_cast<unsigned char>(text[i + 1]) & 0x3f));
            len = 2;
        } else if ((b0 >> 4) == 0xe && i + 2 < text.size()) {
            cp = static_cast<char32_t>((b0 & 0x0f) << 12 |
                                       (static_cast<unsigned char>(text[i + 1]) & 0x3f) << 6 |
                                       (static_cast<unsigned char>(text[i + 2]) & 0x3f));
            len = 3;
        } else if ((b0 >> 3) == 0x1e && i + 3 < text.size()) {
            cp = 0xFFFD;
            len = 4;
        } else {
            cp = 0xFFFD;
        }
        append_folded(out, cp);
        i += len;
    }
    return out;
}

} // namespace

std::string text_schema_id(std::size_t d_text, std::uint64_t seed) {
    const std::string canon = "text|" + std::to_string(d_text) + "|" + std::to_string(seed);
    return detail::hex64(detail::fnv1a64(canon));
}

FeatureVector featurize_text(const std::string& text, std::size_t d_text, std::uint64_t seed) {
    if (d_text < 1) throw ConfigError("d_text must be at least 1");

    FeatureVector fv;
    fv.schema_id = text_schema_id(d_text, seed);
    fv.values.assign(d_text, 0.0);

    const std::string normalized = normalize_text(text);
    const std::uint64_t mix = splitmix64(seed);

    std::size_t tokens = 0;
    std::size_t start = 0;
    while (start < normalized.size()) {
        while (start < normalized.size() && normalized[start] == ' ') ++start;
        std::size_t end = start;
        while (end < normalized.size() && normalized[end] != ' ') ++end;
        if (end > start) {
            ++tokens;
            const std::uint64_t h =
                splitmix64(detail::fnv1a64({normalized.data() + start, end - start}) ^ mix);
            const std::size_t slot = h % d_text;
            fv.values[slot] += (h >> 63) ? 1.0 : -1.0;
        }
        start = end;
    }
    const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(1, tokens));
    for (double& v : fv.values) v *= scale;
    return fv;
}

FeatureVector combine(const std::vector<FeatureVector>& parts) {
    FeatureVector out;
    for (const auto& p : parts) {
        if (p.values.empty()) continue;
        if (!out.schema_id.empty()) {
            // a schema can contribute at most one block
            std::istringstream ids(out.schema_id);
            std::string piece;
            while (std::getline(ids, piece, '+')) {
                if (piece == p.schema_id) {
                    throw SchemaMismatch("schema " + piece + " appears twice in combine");
                }
            }
            out.schema_id += '+';
        }
        out.schema_id += p.schema_id;
        for (double v : p.values) {
            if (!std::isfinite(v)) throw SchemaMismatch("non-finite feature value");
            out.values.push_back(v);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

std::string input_variant_token(InputVariant v) {
    switch (v) {
        case InputVariant::Structured: return "structured";
        case InputVariant::Text: return "text";
        case InputVariant::Both: return "both";
    }
    throw ConfigError("invalid input variant");
}

InputVariant input_variant_from_token(const std::string& token) {
    if (token == "structured") return InputVariant::Structured;
    if (token == "text") return InputVariant::Text;
    if (token == "both") return InputVariant::Both;
    throw ConfigError("unknown input variant: \"" + token + "\"");
}

Dataset build_dataset(const Cohort& cohort, const EncoderSchema& schema,
                      LabelSelector selector, InputVariant variant) {
    Dataset ds;
    const bool structured = variant != InputVariant::Text;
    const bool text = variant != InputVariant::Structured;

    if (structured) {
        std::size_t offset = 0;
        for (const auto& c : schema.continuous) {
            ds.groups.push_back({c.name, offset, 1});
            offset += 1;
        }
        ds.groups.push_back({"sex", offset, schema.sex_levels.size() + 1});
        offset += schema.sex_levels.size() + 1;
        ds.groups.push_back({"window", offset, schema.window_levels.size() + 1});
        offset += schema.window_levels.size() + 1;
        ds.groups.push_back({"recourse", offset, schema.recourse_levels.size() + 1});
        offset += schema.recourse_levels.size() + 1;
        ds.groups.push_back({"comorbidity_any", offset, 1});
        offset += 1;
        ds.groups.push_back({"comorbidity_vascular", offset, 1});
        offset += 1;
    }
    if (text) {
        const std::size_t offset = structured ? schema.structured_dim() : 0;
        ds.groups.push_back({"text", offset, schema.d_text});
    }

    bool first = true;
    for (const auto& r : cohort.records) {
        const auto rank = selected_rank(r, selector);
        if (!rank) continue;

        std::vector<FeatureVector> parts;
        if (structured) parts.push_back(encode_structured(r, schema));
        if (text) {
            parts.push_back(
                featurize_text(r.history_text.value_or(""), schema.d_text, schema.hash_seed));
        }
        FeatureVector fv = combine(parts);
        if (first) {
            ds.schema_id = fv.schema_id;
            ds.dim = fv.values.size();
            first = false;
        }
        ds.values.insert(ds.values.end(), fv.values.begin(), fv.values.end());
        ds.labels.push_back(*rank - 1);
        ds.case_ids.push_back(r.case_id);
    }
    if (ds.rows() == 0) throw DataError("no records carry the selected label");
    return ds;
}

} // namespace triagekit
