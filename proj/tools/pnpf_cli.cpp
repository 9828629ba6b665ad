// Command-line front end: generate / solve / eval / ablate / run over a workspace directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pnpf/experiment.hpp"

namespace {

nlohmann::json read_json_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw pnpf::ConfigError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw pnpf::ConfigError(path.string() + ": " + e.what());
    }
}

// A config file is either a bare ExperimentConfig or a manifest from a previous
// run, in which case the embedded resolved config (and its seed) is reused.
pnpf::ExperimentConfig load_config(const std::string &path, std::optional<std::uint64_t> seed) {
    nlohmann::json j = read_json_file(path);
    std::optional<std::uint64_t> manifest_seed;
    if (j.contains("command") && j.contains("config")) {
        if (j.contains("seed")) manifest_seed = j.at("seed").get<std::uint64_t>();
        j = j.at("config");
    }
    pnpf::ExperimentConfig config = pnpf::experiment_config_from_json(j);
    if (manifest_seed) config.seed = *manifest_seed;
    if (seed) config.seed = *seed;
    return config;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Joint pose + focal solver experiment harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string ablation_kind;
    std::optional<std::uint64_t> seed;
    int jobs = 1;

    auto add_common = [&](CLI::App *sub, bool needs_config = true) {
        sub->add_option("--config", config_path, "experiment config (JSON); a manifest file also works")
            ->required(needs_config);
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    };

    add_common(app.add_subcommand("generate", "sample scenes and write correspondence files"));
    add_common(app.add_subcommand("solve", "solve previously generated scenes"));
    add_common(app.add_subcommand("eval", "score solver results against ground truth"));
    CLI::App *ablate = app.add_subcommand("ablate", "run a paired ablation suite");
    ablate->add_option("kind", ablation_kind, "PnPStrategies | FocalInit | Refinement")->required();
    add_common(ablate);
    add_common(app.add_subcommand("run", "generate + solve + eval in one pass"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        pnpf::ExperimentConfig config = load_config(config_path, seed);
        const std::filesystem::path dir = out_dir;

        if (app.got_subcommand("generate")) {
            pnpf::run_generate_stage(config, dir, jobs);
        } else if (app.got_subcommand("solve")) {
            pnpf::run_solve_stage(config, dir, jobs);
        } else if (app.got_subcommand("eval")) {
            pnpf::run_eval_stage(config, dir);
        } else if (app.got_subcommand("ablate")) {
            config.output_dir = dir.string();
            pnpf::AblationKind kind;
            if (ablation_kind == "PnPStrategies") kind = pnpf::AblationKind::PnPStrategies;
            else if (ablation_kind == "FocalInit") kind = pnpf::AblationKind::FocalInit;
            else if (ablation_kind == "Refinement") kind = pnpf::AblationKind::Refinement;
            else throw pnpf::ConfigError("unknown ablation kind '" + ablation_kind + "'");
            const auto rows = pnpf::run_ablation_suite(kind, config, jobs);
            for (const auto &row : rows)
                std::cout << row.label << ": med_err_p=" << row.report.med_err_p
                          << " med_err_rt=" << row.report.med_err_rt << "\n";
        } else {
            config.output_dir = dir.string();
            const pnpf::ExperimentResult result = pnpf::run_experiment(config, jobs);
            std::cout << "scenes=" << result.report.sample_count << " failed=" << result.failed_count
                      << " med_err_p=" << result.report.med_err_p << " med_err_rt=" << result.report.med_err_rt
                      << "\n";
        }
    } catch (const pnpf::ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pnpf::InvalidOptions &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pnpf::Error &e) {
        std::cerr << "experiment failed: " << e.what() << "\n";
        return 3;
    } catch (const std::exception &e) {
        std::cerr << "experiment failed: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
