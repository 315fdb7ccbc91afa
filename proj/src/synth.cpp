#include "triagekit/cohort.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "triagekit/rng.hpp"
#include "triagekit/stats.hpp"

namespace triagekit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Spec validation and defaults
// ---------------------------------------------------------------------------

namespace {

void check_probs(const std::vector<double>& p, std::size_t want, const char* name) {
    if (p.size() != want) {
        throw InvalidSpec(std::string(name) + " must have " + std::to_string(want) + " entries");
    }
    double sum = 0;
    for (double x : p) {
        if (!(x >= 0.0 && x <= 1.0)) {
            throw InvalidSpec(std::string(name) + " entries must lie in [0, 1]");
        }
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InvalidSpec(std::string(name) + " must sum to 1");
    }
}

void check_unit(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidSpec(std::string(name) + " must lie in [0, 1]");
    }
}

void check_continuous(const ContinuousMarginal& m, const char* name) {
    try {
        TruncatedNormal probe(m.mean, m.sd, m.lower, m.upper);
    } catch (const NumericError& e) {
        throw InvalidSpec(std::string(name) + ": " + e.what());
    }
}

} // namespace

void MarginalSpec::validate() const {
    check_continuous(age, "age");
    check_continuous(sbp, "sbp");
    check_continuous(dbp, "dbp");
    check_continuous(hr, "hr");
    check_continuous(temp, "temp");
    check_continuous(eva, "eva");
    check_continuous(spo2, "spo2");
    check_continuous(o2, "o2");
    if (age.lower < 18.0) throw InvalidSpec("age lower bound must be at least 18");

    check_probs(sex_probs, 2, "sex_probs");
    check_probs(window_probs, 3, "window_probs");
    check_probs(recourse_probs, kNumRecourse, "recourse_probs");
    check_probs(triage_probs, kNumClasses, "triage_probs");
    check_probs(gemsa_probs, kNumClasses, "gemsa_probs");
    check_unit(comorbidity_any_prob, "comorbidity_any_prob");
    check_unit(vascular_given_any_prob, "vascular_given_any_prob");
    check_unit(gemsa_unspecified_prob, "gemsa_unspecified_prob");
    if (gemsa_unspecified_prob >= 1.0) {
        throw InvalidSpec("gemsa_unspecified_prob must be below 1");
    }

    for (double w : {weight_sbp, weight_hr, weight_temp, weight_eva, weight_spo2,
                     weight_o2, weight_age, comorbidity_bonus, vascular_bonus}) {
        if (!std::isfinite(w)) throw InvalidSpec("link coefficients must be finite");
    }
    if (recourse_offsets.size() != static_cast<std::size_t>(kNumRecourse)) {
        throw InvalidSpec("recourse_offsets must have 15 entries");
    }
    for (double x : recourse_offsets) {
        if (!std::isfinite(x)) throw InvalidSpec("recourse_offsets must be finite");
    }
    if (!(noise_sd > 0.0) || !(gemsa_noise_sd > 0.0)) {
        throw InvalidSpec("noise standard deviations must be positive");
    }

    double ksum = 0;
    for (double x : nurse_kernel) {
        if (!(x >= 0.0)) throw InvalidSpec("nurse_kernel entries must be non-negative");
        ksum += x;
    }
    if (std::abs(ksum - 1.0) > 1e-9) throw InvalidSpec("nurse_kernel must sum to 1");
}

MarginalSpec default_marginal_spec() {
    MarginalSpec s;
    s.age = {42.6, 19.71, 18.0, 105.0};
    s.sbp = {143.0, 23.67, 84.0, 234.0};
    // the published minimum of 0 is physiologically implausible; floor at 30
    s.dbp = {83.0, 16.15, 30.0, 148.0};
    s.hr = {89.0, 17.56, 43.0, 187.0};
    s.temp = {37.5, 0.58, 34.9, 40.0};
    s.eva = {4.0, 3.64, 0.0, 10.0};
    s.spo2 = {97.0, 1.67, 84.0, 100.0};
    s.o2 = {0.04, 0.39, 0.0, 6.0};

    const double n = 657.0;
    s.sex_probs = {330.0 / n, 327.0 / n};
    s.window_probs = {211.0 / n, 241.0 / n, 205.0 / n};
    s.recourse_probs = {102.0 / n, 86.0 / n, 31.0 / n, 34.0 / n, 2.0 / n,
                        8.0 / n,   6.0 / n,  69.0 / n, 4.0 / n,  62.0 / n,
                        40.0 / n,  24.0 / n, 26.0 / n, 36.0 / n, 127.0 / n};
    s.comorbidity_any_prob = 161.0 / n;
    s.vascular_given_any_prob = 75.0 / 161.0;
    s.triage_probs = {4.0 / n, 86.0 / n, 0.0, 354.0 / n, 118.0 / n, 95.0 / n};
    const double g = 639.0; // records carrying a pathway code
    s.gemsa_probs = {0.0, 509.0 / g, 18.0 / g, 102.0 / g, 10.0 / g, 0.0};
    s.gemsa_unspecified_prob = 18.0 / n;

    s.recourse_offsets = {0.2, 0.8, -0.1, 0.0, 0.0, 0.3, 0.4, 0.6,
                          -0.4, -0.3, -0.5, -0.2, 0.5, -0.2, -0.1};
    return s;
}

// ---------------------------------------------------------------------------
// JSON round trip. Absent keys keep the default-spec value, so small
// overrides stay small.
// ---------------------------------------------------------------------------

namespace {

json continuous_to_json(const ContinuousMarginal& m) {
    return json{{"mean", m.mean}, {"sd", m.sd}, {"lower", m.lower}, {"upper", m.upper}};
}

void continuous_from_json(const json& j, ContinuousMarginal& m, const char* name) {
    if (!j.is_object()) throw ConfigError(std::string(name) + " must be an object");
    for (auto& [key, value] : j.items()) {
        if (!value.is_number()) throw ConfigError(std::string(name) + "." + key + " must be numeric");
        if (key == "mean") m.mean = value.get<double>();
        else if (key == "sd") m.sd = value.get<double>();
        else if (key == "lower") m.lower = value.get<double>();
        else if (key == "upper") m.upper = value.get<double>();
        else throw ConfigError(std::string(name) + ": unknown key " + key);
    }
}

void vector_from_json(const json& j, std::vector<double>& v, const char* name) {
    if (!j.is_array()) throw ConfigError(std::string(name) + " must be an array");
    v.clear();
    for (const auto& x : j) {
        if (!x.is_number()) throw ConfigError(std::string(name) + " entries must be numeric");
        v.push_back(x.get<double>());
    }
}

double number_from_json(const json& j, const char* name) {
    if (!j.is_number()) throw ConfigError(std::string(name) + " must be numeric");
    return j.get<double>();
}

} // namespace

void marginal_spec_to_json(const MarginalSpec& spec, std::ostream& out) {
    json j;
    j["age"] = continuous_to_json(spec.age);
    j["sbp"] = continuous_to_json(spec.sbp);
    j["dbp"] = continuous_to_json(spec.dbp);
    j["hr"] = continuous_to_json(spec.hr);
    j["temp"] = continuous_to_json(spec.temp);
    j["eva"] = continuous_to_json(spec.eva);
    j["spo2"] = continuous_to_json(spec.spo2);
    j["o2"] = continuous_to_json(spec.o2);
    j["sex_probs"] = spec.sex_probs;
    j["window_probs"] = spec.window_probs;
    j["recourse_probs"] = spec.recourse_probs;
    j["comorbidity_any_prob"] = spec.comorbidity_any_prob;
    j["vascular_given_any_prob"] = spec.vascular_given_any_prob;
    j["triage_probs"] = spec.triage_probs;
    j["gemsa_probs"] = spec.gemsa_probs;
    j["gemsa_unspecified_prob"] = spec.gemsa_unspecified_prob;
    j["weight_sbp"] = spec.weight_sbp;
    j["weight_hr"] = spec.weight_hr;
    j["weight_temp"] = spec.weight_temp;
    j["weight_eva"] = spec.weight_eva;
    j["weight_spo2"] = spec.weight_spo2;
    j["weight_o2"] = spec.weight_o2;
    j["weight_age"] = spec.weight_age;
    j["recourse_offsets"] = spec.recourse_offsets;
    j["comorbidity_bonus"] = spec.comorbidity_bonus;
    j["vascular_bonus"] = spec.vascular_bonus;
    j["noise_sd"] = spec.noise_sd;
    j["nurse_kernel"] = spec.nurse_kernel;
    j["gemsa_noise_sd"] = spec.gemsa_noise_sd;
    out << j.dump(2) << '\n';
}

MarginalSpec marginal_spec_from_json(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid marginal spec json: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("marginal spec must be a json object");

    MarginalSpec spec = default_marginal_spec();
    for (auto& [key, value] : j.items()) {
        if (key == "age") continuous_from_json(value, spec.age, "age");
        else if (key == "sbp") continuous_from_json(value, spec.sbp, "sbp");
        else if (key == "dbp") continuous_from_json(value, spec.dbp, "dbp");
        else if (key == "hr") continuous_from_json(value, spec.hr, "hr");
        else if (key == "temp") continuous_from_json(value, spec.temp, "temp");
        else if (key == "eva") continuous_from_json(value, spec.eva, "eva");
        else if (key == "spo2") continuous_from_json(value, spec.spo2, "spo2");
        else if (key == "o2") continuous_from_json(value, spec.o2, "o2");
        else if (key == "sex_probs") vector_from_json(value, spec.sex_probs, "sex_probs");
        else if (key == "window_probs") vector_from_json(value, spec.window_probs, "window_probs");
        else if (key == "recourse_probs") vector_from_json(value, spec.recourse_probs, "recourse_probs");
        else if (key == "comorbidity_any_prob") spec.comorbidity_any_prob = number_from_json(value, key.c_str());
        else if (key == "vascular_given_any_prob") spec.vascular_given_any_prob = number_from_json(value, key.c_str());
        else if (key == "triage_probs") vector_from_json(value, spec.triage_probs, "triage_probs");
        else if (key == "gemsa_probs") vector_from_json(value, spec.gemsa_probs, "gemsa_probs");
        else if (key == "gemsa_unspecified_prob") spec.gemsa_unspecified_prob = number_from_json(value, key.c_str());
        else if (key == "weight_sbp") spec.weight_sbp = number_from_json(value, key.c_str());
        else if (key == "weight_hr") spec.weight_hr = number_from_json(value, key.c_str());
        else if (key == "weight_temp") spec.weight_temp = number_from_json(value, key.c_str());
        else if (key == "weight_eva") spec.weight_eva = number_from_json(value, key.c_str());
        else if (key == "weight_spo2") spec.weight_spo2 = number_from_json(value, key.c_str());
        else if (key == "weight_o2") spec.weight_o2 = number_from_json(value, key.c_str());
        else if (key == "weight_age") spec.weight_age = number_from_json(value, key.c_str());
        else if (key == "recourse_offsets") vector_from_json(value, spec.recourse_offsets, "recourse_offsets");
        else if (key == "comorbidity_bonus") spec.comorbidity_bonus = number_from_json(value, key.c_str());
        else if (key == "vascular_bonus") spec.vascular_bonus = number_from_json(value, key.c_str());
        else if (key == "noise_sd") spec.noise_sd = number_from_json(value, key.c_str());
        else if (key == "nurse_kernel") {
            std::vector<double> k;
            vector_from_json(value, k, "nurse_kernel");
            if (k.size() != spec.nurse_kernel.size()) {
                throw ConfigError("nurse_kernel must have 5 entries");
            }
            std::copy(k.begin(), k.end(), spec.nurse_kernel.begin());
        } else if (key == "gemsa_noise_sd") {
            spec.gemsa_noise_sd = number_from_json(value, key.c_str());
        } else {
            throw ConfigError("marginal spec: unknown key " + key);
        }
    }
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace {

// Size of the internal draw used to place the latent slice thresholds; its
// seed is fixed so thresholds depend only on the spec and records stay i.i.d.
constexpr std::size_t kCalibrationDraws = 65536;
constexpr std::uint64_t kCalibrationSeed = 0x5eedc0de5eedc0deULL;

struct CoreSample {
    int age = 0;
    Sex sex = Sex::M;
    AdmissionWindow window = AdmissionWindow::Night;
    Recourse recourse = Recourse::Abdo;
    bool any = false;
    bool vasc = false;
    Vitals vitals;
    double latent = 0;
};

struct LatentSampler {
    const MarginalSpec& spec;
    TruncatedNormal age, sbp, dbp, hr, temp, eva, spo2, o2;

    explicit LatentSampler(const MarginalSpec& s)
        : spec(s),
          age(s.age.mean, s.age.sd, s.age.lower, s.age.upper),
          sbp(s.sbp.mean, s.sbp.sd, s.sbp.lower, s.sbp.upper),
          dbp(s.dbp.mean, s.dbp.sd, s.dbp.lower, s.dbp.upper),
          hr(s.hr.mean, s.hr.sd, s.hr.lower, s.hr.upper),
          temp(s.temp.mean, s.temp.sd, s.temp.lower, s.temp.upper),
          eva(s.eva.mean, s.eva.sd, s.eva.lower, s.eva.upper),
          spo2(s.spo2.mean, s.spo2.sd, s.spo2.lower, s.spo2.upper),
          o2(s.o2.mean, s.o2.sd, s.o2.lower, s.o2.upper) {}

    // One record worth of correlated draws; the draw order is part of the
    // deterministic output contract.
    CoreSample sample(Rng& rng) const {
        CoreSample c;
        c.age = static_cast<int>(std::llround(age.sample(rng)));
        c.sex = rng.categorical(spec.sex_probs) == 0 ? Sex::M : Sex::F;
        c.window = static_cast<AdmissionWindow>(rng.categorical(spec.window_probs));
        c.recourse = static_cast<Recourse>(rng.categorical(spec.recourse_probs));
        c.any = rng.uniform() < spec.comorbidity_any_prob;
        c.vasc = c.any && rng.uniform() < spec.vascular_given_any_prob;
        c.vitals.sbp = sbp.sample(rng);
        c.vitals.dbp = dbp.sample(rng);
        c.vitals.hr = hr.sample(rng);
        c.vitals.temp = temp.sample(rng);
        c.vitals.eva = static_cast<double>(std::llround(eva.sample(rng)));
        c.vitals.spo2 = spo2.sample(rng);
        c.vitals.o2 = o2.sample(rng);

        auto z = [](double x, const ContinuousMarginal& m) { return (x - m.mean) / m.sd; };
        c.latent = spec.weight_sbp * z(c.vitals.sbp, spec.sbp) +
                   spec.weight_hr * z(c.vitals.hr, spec.hr) +
                   spec.weight_temp * z(c.vitals.temp, spec.temp) +
                   spec.weight_eva * z(c.vitals.eva, spec.eva) +
                   spec.weight_spo2 * z(c.vitals.spo2, spec.spo2) +
                   spec.weight_o2 * z(c.vitals.o2, spec.o2) +
                   spec.weight_age * z(static_cast<double>(c.age), spec.age) +
                   spec.recourse_offsets[static_cast<std::size_t>(c.recourse)] +
                   (c.any ? spec.comorbidity_bonus : 0.0) +
                   (c.vasc ? spec.vascular_bonus : 0.0) +
                   rng.gaussian() * spec.noise_sd;
        return c;
    }
};

struct SliceThresholds {
    // triage[k] holds the latent cut for rank k+1; latents at or above it map
    // to rank k+1 or lower rank. gemsa[k] caps code k+1 from above.
    std::array<double, kNumClasses - 1> triage{};
    std::array<double, kNumClasses - 1> gemsa{};
};

SliceThresholds calibrate_thresholds(const LatentSampler& sampler, const MarginalSpec& spec) {
    Rng rng(kCalibrationSeed);
    std::vector<double> acuity(kCalibrationDraws);
    std::vector<double> pathway(kCalibrationDraws);
    for (std::size_t i = 0; i < kCalibrationDraws; ++i) {
        acuity[i] = sampler.sample(rng).latent;
        pathway[i] = acuity[i] + rng.gaussian() * spec.gemsa_noise_sd;
    }
    std::sort(acuity.begin(), acuity.end());
    std::sort(pathway.begin(), pathway.end());

    SliceThresholds cuts;
    double cum = 0;
    for (int k = 0; k < kNumClasses - 1; ++k) {
        cum += spec.triage_probs[static_cast<std::size_t>(k)];
        cuts.triage[static_cast<std::size_t>(k)] = sorted_quantile(acuity, 1.0 - std::min(cum, 1.0));
    }
    cum = 0;
    for (int k = 0; k < kNumClasses - 1; ++k) {
        cum += spec.gemsa_probs[static_cast<std::size_t>(k)];
        cuts.gemsa[static_cast<std::size_t>(k)] = sorted_quantile(pathway, std::min(cum, 1.0));
    }
    return cuts;
}

// Interior zero-mass slices are never hit because their cut coincides with
// the previous one; only tail overflow can land on a zero-mass class, and it
// folds inward from that tail.
int fold_zero_mass(int cls, const std::vector<double>& probs) {
    if (cls == 1) {
        while (probs[static_cast<std::size_t>(cls - 1)] <= 0.0) ++cls;
    } else if (cls == kNumClasses) {
        while (probs[static_cast<std::size_t>(cls - 1)] <= 0.0) --cls;
    }
    return cls;
}

// Highest-acuity slice whose cut the latent clears.
int slice_rank(double latent, const std::array<double, kNumClasses - 1>& cuts,
               const std::vector<double>& probs) {
    int rank = kNumClasses;
    for (int k = 0; k < kNumClasses - 1; ++k) {
        if (latent >= cuts[static_cast<std::size_t>(k)]) {
            rank = k + 1;
            break;
        }
    }
    return fold_zero_mass(rank, probs);
}

int slice_gemsa(double latent, const std::array<double, kNumClasses - 1>& cuts,
                const std::vector<double>& probs) {
    int code = kNumClasses;
    for (int k = 0; k < kNumClasses - 1; ++k) {
        if (latent < cuts[static_cast<std::size_t>(k)]) {
            code = k + 1;
            break;
        }
    }
    return fold_zero_mass(code, probs);
}

const char* history_template(Recourse r) {
    switch (r) {
        case Recourse::Abdo: return "Douleur abdominale %s depuis %s.";
        case Recourse::Cardio: return "Douleur thoracique %s depuis %s.";
        case Recourse::Various: return "Asthénie %s évoluant depuis %s.";
        case Recourse::Gu: return "Douleur lombaire %s avec signes urinaires depuis %s.";
        case Recourse::GynOb: return "Douleur pelvienne %s depuis %s.";
        case Recourse::Infect: return "Fièvre %s depuis %s.";
        case Recourse::Poison: return "Intoxication %s rapportée depuis %s.";
        case Recourse::Neuro: return "Céphalée %s depuis %s.";
        case Recourse::Ophth: return "Baisse visuelle %s depuis %s.";
        case Recourse::EntStoma: return "Odynophagie %s depuis %s.";
        case Recourse::Derm: return "Éruption cutanée %s depuis %s.";
        case Recourse::Psy: return "Angoisse %s depuis %s.";
        case Recourse::Pulm: return "Dyspnée %s depuis %s.";
        case Recourse::Rheum: return "Douleur articulaire %s depuis %s.";
        case Recourse::Trauma: return "Douleur post-traumatique %s depuis %s.";
    }
    return "Plainte %s depuis %s.";
}

std::string render_history(Recourse recourse, int gold_rank, Rng& rng) {
    static const std::array<std::array<const char*, 3>, 3> kAdjectives = {{
        {"brutale", "intense", "aiguë"},
        {"persistante", "marquée", "modérée"},
        {"légère", "discrète", "simple"},
    }};
    static const std::array<const char*, 5> kDurations = {
        "ce matin", "quelques heures", "la veille", "deux jours", "une semaine"};

    const std::size_t band = gold_rank <= 2 ? 0 : (gold_rank <= 4 ? 1 : 2);
    const char* adj = kAdjectives[band][rng.below(3)];
    const char* dur = kDurations[rng.below(kDurations.size())];

    char buffer[160];
    std::snprintf(buffer, sizeof(buffer), history_template(recourse), adj, dur);
    return buffer;
}

} // namespace

Cohort synthesize_cohort(const MarginalSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n == 0) throw InvalidSpec("cohort size must be positive");

    const LatentSampler sampler(spec);
    const SliceThresholds cuts = calibrate_thresholds(sampler, spec);

    // nurse labels live on the ranks that actually occur
    std::vector<int> live_ranks;
    for (int k = 0; k < kNumClasses; ++k) {
        if (spec.triage_probs[static_cast<std::size_t>(k)] > 0.0) live_ranks.push_back(k + 1);
    }
    const std::vector<double> kernel(spec.nurse_kernel.begin(), spec.nurse_kernel.end());

    Rng rng(seed);
    Cohort cohort;
    cohort.provenance = Provenance::Synthetic;
    cohort.records.reserve(n);

    for (std::size_t i = 0; i < n; ++i) {
        const CoreSample c = sampler.sample(rng);

        PatientRecord r;
        char id[24];
        std::snprintf(id, sizeof(id), "P%06zu", i + 1);
        r.case_id = id;
        r.age = c.age;
        r.sex = c.sex;
        r.admission_window = c.window;
        r.recourse = c.recourse;
        r.comorbidity_any = c.any;
        r.comorbidity_vascular = c.vasc;
        r.vitals = c.vitals;

        const int gold = slice_rank(c.latent, cuts.triage, spec.triage_probs);
        r.gold_triage = triage_from_rank(gold);

        const auto pos = static_cast<std::ptrdiff_t>(
            std::lower_bound(live_ranks.begin(), live_ranks.end(), gold) - live_ranks.begin());
        const auto offset = static_cast<std::ptrdiff_t>(rng.categorical(kernel)) - 2;
        const auto shifted = std::clamp<std::ptrdiff_t>(
            pos + offset, 0, static_cast<std::ptrdiff_t>(live_ranks.size()) - 1);
        r.nurse_triage = triage_from_rank(live_ranks[static_cast<std::size_t>(shifted)]);

        if (rng.uniform() < spec.gemsa_unspecified_prob) {
            r.gemsa = GemsaCode::Unspecified;
        } else {
            const double pathway = c.latent + rng.gaussian() * spec.gemsa_noise_sd;
            r.gemsa = gemsa_from_rank(slice_gemsa(pathway, cuts.gemsa, spec.gemsa_probs));
        }

        r.history_text = render_history(c.recourse, gold, rng);
        cohort.records.push_back(std::move(r));
    }
    return cohort;
}

} // namespace triagekit
