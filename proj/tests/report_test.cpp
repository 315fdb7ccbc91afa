#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "triagekit/report.hpp"

using namespace triagekit;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(const std::string& out_dir, std::uint64_t seed = 42) {
    RunConfig cfg;
    cfg.cases = 90;
    cfg.train_fraction = 0.7;
    cfg.seed = seed;
    cfg.out_dir = out_dir;
    cfg.text_dim = 16;
    cfg.bins = 5;
    cfg.importance_repeats = 2;
    // enough optimization for every model to spread its validation
    // predictions over several ranks; rank correlation needs variation
    cfg.train.epochs = 20;
    cfg.train.batch_size = 16;
    cfg.train.hidden1 = 8;
    cfg.train.hidden2 = 6;
    cfg.train.rounds = 20;
    cfg.train.max_depth = 2;
    cfg.train.min_leaf = 5;
    cfg.train.encoder_hidden = 6;
    cfg.train.embed_dim = 4;
    return cfg;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(path));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream cols(line);
        std::string cell;
        while (std::getline(cols, cell, '\t')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

std::map<std::string, std::string> checksum_map(const RunArtifacts& arts) {
    std::map<std::string, std::string> out;
    for (const auto& a : arts.artifacts) out[a.name] = a.checksum;
    return out;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(name) { fs::remove_all(path); }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_SUITE("report") {

TEST_CASE("config files parse into a full run description") {
    std::istringstream in(
        "# comment and blank lines are skipped\n"
        "\n"
        "cases = 120\n"
        "train_fraction = 0.75\n"
        "seed = 9\n"
        "out = somewhere\n"
        "label_system = gemsa\n"
        "input_variant = structured\n"
        "processes = feedforward, boosted\n"
        "include_gold_row = false\n"
        "epochs = 7\n"
        "learning_rate = 0.5\n"
        "bins = 12\n"
        "brier_variant = mean\n"
        "kappa_weighting = linear\n");
    const RunConfig cfg = parse_run_config(in);
    CHECK(cfg.cases == 120);
    CHECK(cfg.train_fraction == 0.75);
    CHECK(cfg.seed == 9);
    CHECK(cfg.train.seed == 9); // training inherits the run seed
    CHECK(cfg.out_dir == "somewhere");
    CHECK(cfg.label_system == LabelSelector::Gemsa);
    CHECK(cfg.input_variant == InputVariant::Structured);
    CHECK(cfg.processes == std::vector<std::string>{"feedforward", "boosted"});
    CHECK(!cfg.include_gold_row);
    CHECK(cfg.train.epochs == 7);
    CHECK(cfg.train.learning_rate == 0.5);
    CHECK(cfg.bins == 12);
    CHECK(cfg.brier_variant == BrierVariant::PerComponentMean);
    CHECK(cfg.weighting == KappaWeighting::Linear);
    cfg.validate();
}

TEST_CASE("config parsing rejects malformed input") {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return parse_run_config(in);
    };
    CHECK_THROWS_AS(parse("no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(parse("unknown_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("cases = many\n"), ConfigError);
    CHECK_THROWS_AS(parse("train_fraction = 0.5extra\n"), ConfigError);
    CHECK_THROWS_AS(parse("include_gold_row = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse("label_system = manchester\n"), ConfigError);
    CHECK_THROWS_AS(parse("= 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config_file("not/a/real/config.cfg"), ConfigError);
}

TEST_CASE("config validation catches inconsistent runs") {
    RunConfig cfg = tiny_config("x");
    cfg.train_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = tiny_config("x");
    cfg.processes = {"feedforward", "feedforward"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = tiny_config("x");
    cfg.label_system = LabelSelector::Gemsa;
    cfg.processes = {"boosted", "nurse"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = tiny_config("x");
    cfg.processes = {"boosted", "psychic"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    CHECK(label_system_token(LabelSelector::GoldTriage) == "french");
    CHECK(label_system_from_token("gemsa") == LabelSelector::Gemsa);
    CHECK_THROWS_AS(label_system_from_token("emsa"), ConfigError);
}

TEST_CASE("a full run writes every artifact and a coherent ranking") {
    TempDir dir("report_test_full");
    const RunConfig cfg = tiny_config(dir.path.string());
    const RunArtifacts arts = evaluate_run(cfg);

    const std::vector<std::string> expected{
        "cohort.csv",      "train.csv",          "val.csv",
        "schema.json",     "model_feedforward.txt", "model_boosted.txt",
        "model_jepa.txt",  "curves.tsv",         "importance.tsv",
        "predictions_feedforward.jsonl", "predictions_boosted.jsonl",
        "predictions_jepa.jsonl", "predictions_nurse.jsonl",
        "report.txt",      "confusion.tsv",      "bland_altman.tsv",
        "ba_pairs.tsv",    "error_hist.tsv",     "roc.tsv",
        "roc_mean.tsv",    "thresholds.tsv",     "calibration.tsv",
        "heatmap.tsv",     "ridge.tsv",          "ranking.tsv",
        "manifest.json"};
    const auto have = checksum_map(arts);
    for (const auto& name : expected) {
        INFO(name);
        CHECK(have.count(name) == 1);
        CHECK(fs::exists(dir.path / name));
        CHECK(fs::file_size(dir.path / name) > 0);
    }
    CHECK(have.size() == expected.size());

    // manifest indexes every other artifact
    const auto manifest = nlohmann::json::parse(slurp(dir.path / "manifest.json"));
    CHECK(manifest.at("tool") == "triagekit");
    CHECK(manifest.at("artifacts").size() == expected.size() - 1);
    CHECK(manifest.at("config").at("seed") == 42);
    CHECK(manifest.at("stage_ms").contains("train"));

    // ranking: one row per process plus the reference, composites sum to zero
    const auto ranking = read_tsv(dir.path / "ranking.tsv");
    REQUIRE(ranking.size() == 6);
    CHECK(ranking[0] == std::vector<std::string>{"position", "process", "mae", "rmse", "kappa",
                                                 "spearman", "composite"});
    double sum = 0;
    bool saw_gold = false;
    for (std::size_t i = 1; i < ranking.size(); ++i) {
        REQUIRE(ranking[i].size() == 7);
        CHECK(ranking[i][0] == std::to_string(i));
        saw_gold = saw_gold || ranking[i][1] == "gold";
        sum += std::stod(ranking[i][6]);
    }
    CHECK(saw_gold);
    CHECK(std::abs(sum) < 1e-9);

    // the human-readable report names every process
    const std::string report = slurp(dir.path / "report.txt");
    for (const char* name : {"feedforward", "boosted", "jepa", "nurse"}) {
        CHECK(report.find(std::string("[process ") + name + "]") != std::string::npos);
    }
    CHECK(report.find("mae = ") != std::string::npos);
    CHECK(report.find("brier = ") != std::string::npos);
    CHECK(report.find("evaluated_cases = 27") != std::string::npos);
}

TEST_CASE("identical configs reproduce identical bytes") {
    TempDir dir_a("report_test_rep_a");
    TempDir dir_b("report_test_rep_b");
    const RunArtifacts a = evaluate_run(tiny_config(dir_a.path.string()));
    const RunArtifacts b = evaluate_run(tiny_config(dir_b.path.string()));

    const auto map_a = checksum_map(a);
    const auto map_b = checksum_map(b);
    REQUIRE(map_a.size() == map_b.size());
    for (const auto& [name, sum] : map_a) {
        INFO(name);
        if (name == "manifest.json") continue; // timestamp and stage times differ
        CHECK(map_b.at(name) == sum);
        CHECK(slurp(dir_a.path / name) == slurp(dir_b.path / name));
    }

    // manifests agree on everything but the volatile fields and the paths
    auto ma = nlohmann::json::parse(slurp(dir_a.path / "manifest.json"));
    auto mb = nlohmann::json::parse(slurp(dir_b.path / "manifest.json"));
    CHECK(ma.at("artifacts") == mb.at("artifacts"));
    auto ca = ma.at("config");
    auto cb = mb.at("config");
    ca.erase("out");
    cb.erase("out");
    CHECK(ca == cb);

    // a different seed changes the data
    TempDir dir_c("report_test_rep_c");
    const RunArtifacts c = evaluate_run(tiny_config(dir_c.path.string(), 43));
    CHECK(checksum_map(c).at("cohort.csv") != map_a.at("cohort.csv"));
}

TEST_CASE("standalone stages compose into the all-in-one run") {
    TempDir dir_full("report_test_stage_full");
    const auto full = checksum_map(evaluate_run(tiny_config(dir_full.path.string())));

    TempDir dir_steps("report_test_stage_steps");
    const RunConfig cfg = tiny_config(dir_steps.path.string());
    std::map<std::string, std::string> stepped;
    for (const auto& arts : {run_generate(cfg), run_split(cfg), run_train(cfg), run_predict(cfg),
                             run_evaluate(cfg), run_calibrate(cfg), run_rank(cfg)}) {
        for (const auto& a : arts.artifacts) stepped[a.name] = a.checksum;
    }

    REQUIRE(stepped.size() == full.size() - 1); // everything except the manifest
    for (const auto& [name, sum] : stepped) {
        INFO(name);
        CHECK(full.at(name) == sum);
    }
}

TEST_CASE("evaluating without predictions names the missing piece") {
    TempDir dir("report_test_missing");
    const RunConfig cfg = tiny_config(dir.path.string());
    try {
        run_evaluate(cfg);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string what = e.what();
        CHECK(what.find("predictions") != std::string::npos);
        CHECK(what.find("feedforward") != std::string::npos);
    }
}

TEST_CASE("the gemsa label system drops the nurse and unspecified cases") {
    TempDir dir("report_test_gemsa");
    RunConfig cfg = tiny_config(dir.path.string());
    cfg.label_system = LabelSelector::Gemsa;
    const RunArtifacts arts = evaluate_run(cfg);
    const auto have = checksum_map(arts);
    CHECK(have.count("predictions_nurse.jsonl") == 0);

    const auto ranking = read_tsv(dir.path / "ranking.tsv");
    CHECK(ranking.size() == 5); // three models + gold + header

    const std::string report = slurp(dir.path / "report.txt");
    CHECK(report.find("[process nurse]") == std::string::npos);
    CHECK(report.find("label_system = gemsa") != std::string::npos);
}

} // TEST_SUITE
