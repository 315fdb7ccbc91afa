#include "triagekit/models/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "triagekit/models/boosted.hpp"
#include "triagekit/models/feedforward.hpp"
#include "triagekit/models/jepa.hpp"

namespace triagekit {

namespace {

constexpr const char* kMagic = "triagekit-model";
constexpr int kVersion = 1;

// hexfloat text preserves every bit of the double
std::string hex_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
    return {buf, res.ptr};
}

double parse_hex_double(const std::string& s) {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw DataError("model blob: bad hexfloat \"" + s + "\"");
    }
    return v;
}

class FieldReader {
public:
    explicit FieldReader(std::istream& in) : in_(in) {}

    std::string token() {
        std::string t;
        if (!(in_ >> t)) throw DataError("model blob: truncated");
        return t;
    }
    std::string expect_key(const std::string& key) {
        const std::string got = token();
        if (got != key) throw DataError("model blob: expected " + key + ", got " + got);
        return token();
    }
    std::size_t expect_count(const std::string& key) {
        const std::string v = expect_key(key);
        std::size_t n = 0;
        const auto res = std::from_chars(v.data(), v.data() + v.size(), n);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
            throw DataError("model blob: bad count for " + key);
        }
        return n;
    }
    double expect_double(const std::string& key) { return parse_hex_double(expect_key(key)); }

    std::vector<double> doubles(std::size_t n) {
        std::vector<double> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(parse_hex_double(token()));
        return out;
    }

private:
    std::istream& in_;
};

void write_params(std::ostream& out, const std::vector<double>& p) {
    out << "params " << p.size() << '\n';
    for (std::size_t i = 0; i < p.size(); ++i) {
        out << hex_double(p[i]) << ((i + 1) % 8 == 0 ? '\n' : ' ');
    }
    if (p.size() % 8 != 0) out << '\n';
}

void save_feedforward(const FeedForwardModel& m, std::ostream& out) {
    const auto& s = m.structure();
    out << "hidden1 " << s.hidden1 << "\nhidden2 " << s.hidden2 << "\ndropout "
        << hex_double(s.dropout) << "\nl2 " << hex_double(s.l2) << '\n';
    write_params(out, m.parameters());
}

void save_jepa(const JepaModel& m, std::ostream& out) {
    const auto& s = m.structure();
    out << "hidden " << s.hidden << "\nembed " << s.embed << "\nlambda_inv "
        << hex_double(s.lambda_inv) << "\nmu_var " << hex_double(s.mu_var) << "\nnu_cov "
        << hex_double(s.nu_cov) << "\ngamma " << hex_double(s.gamma) << '\n';
    write_params(out, m.parameters());
}

void save_boosted(const BoostedEnsemble& m, std::ostream& out) {
    out << "shrinkage " << hex_double(m.shrinkage()) << "\npriors";
    for (double v : m.log_priors()) out << ' ' << hex_double(v);
    out << "\nrounds " << m.trees().size() << '\n';
    for (const auto& round : m.trees()) {
        for (const auto& tree : round) {
            out << "tree " << tree.feature.size() << '\n';
            for (std::size_t i = 0; i < tree.feature.size(); ++i) {
                out << tree.feature[i] << ' ' << hex_double(tree.threshold[i]) << ' '
                    << tree.left[i] << ' ' << tree.right[i] << ' ' << hex_double(tree.value[i])
                    << '\n';
            }
        }
    }
}

std::unique_ptr<Model> load_feedforward(FieldReader& r, std::string schema, std::size_t dim) {
    FeedForwardModel::Structure s;
    s.input = dim;
    s.hidden1 = r.expect_count("hidden1");
    s.hidden2 = r.expect_count("hidden2");
    s.dropout = r.expect_double("dropout");
    s.l2 = r.expect_double("l2");
    auto model = std::make_unique<FeedForwardModel>(std::move(schema), s);
    model->set_parameters(r.doubles(r.expect_count("params")));
    return model;
}

std::unique_ptr<Model> load_jepa(FieldReader& r, std::string schema, std::size_t dim) {
    JepaModel::Structure s;
    s.input = dim;
    s.hidden = r.expect_count("hidden");
    s.embed = r.expect_count("embed");
    s.lambda_inv = r.expect_double("lambda_inv");
    s.mu_var = r.expect_double("mu_var");
    s.nu_cov = r.expect_double("nu_cov");
    s.gamma = r.expect_double("gamma");
    auto model = std::make_unique<JepaModel>(std::move(schema), s);
    model->set_parameters(r.doubles(r.expect_count("params")));
    return model;
}

std::unique_ptr<Model> load_boosted(FieldReader& r, std::string schema, std::size_t dim) {
    const double shrinkage = r.expect_double("shrinkage");
    Probs priors;
    const std::string tag = r.token();
    if (tag != "priors") throw DataError("model blob: expected priors");
    for (double& v : priors) v = parse_hex_double(r.token());
    auto model = std::make_unique<BoostedEnsemble>(std::move(schema), dim, priors, shrinkage);

    const std::size_t rounds = r.expect_count("rounds");
    for (std::size_t round = 0; round < rounds; ++round) {
        std::array<RegressionTree, kNumClasses> trees;
        for (int c = 0; c < kNumClasses; ++c) {
            const std::size_t nodes = r.expect_count("tree");
            RegressionTree t;
            for (std::size_t i = 0; i < nodes; ++i) {
                t.feature.push_back(static_cast<int>(std::stol(r.token())));
                t.threshold.push_back(parse_hex_double(r.token()));
                t.left.push_back(static_cast<int>(std::stol(r.token())));
                t.right.push_back(static_cast<int>(std::stol(r.token())));
                t.value.push_back(parse_hex_double(r.token()));
            }
            trees[static_cast<std::size_t>(c)] = std::move(t);
        }
        model->add_round(std::move(trees));
    }
    return model;
}

} // namespace

void save_model(const Model& model, std::ostream& out) {
    out << kMagic << ' ' << kVersion << '\n'
        << "kind " << model.kind() << '\n'
        << "schema " << model.schema_id() << '\n'
        << "dim " << model.dim() << '\n';
    if (const auto* ff = dynamic_cast<const FeedForwardModel*>(&model)) {
        save_feedforward(*ff, out);
    } else if (const auto* jm = dynamic_cast<const JepaModel*>(&model)) {
        save_jepa(*jm, out);
    } else if (const auto* bt = dynamic_cast<const BoostedEnsemble*>(&model)) {
        save_boosted(*bt, out);
    } else {
        throw DataError("unknown model kind: " + model.kind());
    }
    out << "end\n";
}

std::unique_ptr<Model> load_model(std::istream& in) {
    FieldReader r(in);
    if (r.token() != kMagic) throw DataError("model blob: bad magic");
    if (r.token() != std::to_string(kVersion)) throw DataError("model blob: unknown version");
    const std::string kind = r.expect_key("kind");
    std::string schema = r.expect_key("schema");
    const std::size_t dim = r.expect_count("dim");

    std::unique_ptr<Model> model;
    if (kind == "feedforward") {
        model = load_feedforward(r, std::move(schema), dim);
    } else if (kind == "jepa") {
        model = load_jepa(r, std::move(schema), dim);
    } else if (kind == "boosted") {
        model = load_boosted(r, std::move(schema), dim);
    } else {
        throw DataError("model blob: unknown kind " + kind);
    }
    if (r.token() != "end") throw DataError("model blob: missing end marker");
    return model;
}

void save_model_file(const Model& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path);
    save_model(model, out);
}

std::unique_ptr<Model> load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    return load_model(in);
}

} // namespace triagekit
