#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "triagekit/report.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic triage cohorts, toy model pipelines, and ordinal evaluation"};
    app.require_subcommand(1);

    std::string config_path, out_dir, label_system, input_variant, processes;
    std::uint64_t seed = 0;

    using Runner = std::function<triagekit::RunArtifacts(const triagekit::RunConfig&)>;
    const std::vector<std::pair<const char*, const char*>> commands = {
        {"generate", "synthesize a cohort from marginal statistics"},
        {"split", "stratified train/validation split"},
        {"train", "train the model processes and save them with learning curves"},
        {"predict", "emit validation predictions for saved models"},
        {"evaluate", "metric report plus agreement tables from predictions"},
        {"calibrate", "calibration tables and probability surfaces"},
        {"rank", "composite ranking across processes"},
        {"report", "all-in-one run: cohort through ranking with a manifest"},
    };
    const std::map<std::string, Runner> runners = {
        {"generate", triagekit::run_generate}, {"split", triagekit::run_split},
        {"train", triagekit::run_train},       {"predict", triagekit::run_predict},
        {"evaluate", triagekit::run_evaluate}, {"calibrate", triagekit::run_calibrate},
        {"rank", triagekit::run_rank},         {"report", triagekit::evaluate_run},
    };

    for (const auto& [name, description] : commands) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--config", config_path, "run configuration file (key = value lines)");
        sub->add_option("--seed", seed, "seed override");
        sub->add_option("--out", out_dir, "output directory override");
        sub->add_option("--label-system", label_system, "french or gemsa");
        sub->add_option("--input-variant", input_variant, "structured, text, or both");
        sub->add_option("--processes", processes, "comma-separated process names");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const CLI::App* sub = app.get_subcommands().front();
    try {
        triagekit::RunConfig config = config_path.empty()
                                          ? triagekit::RunConfig{}
                                          : triagekit::parse_run_config_file(config_path);
        if (sub->count("--seed") > 0) {
            config.seed = seed;
            config.train.seed = seed;
        }
        if (sub->count("--out") > 0) config.out_dir = out_dir;
        if (sub->count("--label-system") > 0) {
            config.label_system = triagekit::label_system_from_token(label_system);
        }
        if (sub->count("--input-variant") > 0) {
            config.input_variant = triagekit::input_variant_from_token(input_variant);
        }
        if (sub->count("--processes") > 0) {
            config.processes = split_csv(processes);
            if (config.processes.empty()) {
                throw triagekit::ConfigError("--processes names no process");
            }
        }

        const auto artifacts = runners.at(sub->get_name())(config);
        for (const auto& artifact : artifacts.artifacts) {
            std::cout << artifact.name << '\t' << artifact.checksum << '\n';
        }
        return 0;
    } catch (const triagekit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const triagekit::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const triagekit::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
