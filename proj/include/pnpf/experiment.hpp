#ifndef PNPF_EXPERIMENT_HPP
#define PNPF_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pnpf/io.hpp"
#include "pnpf/metrics.hpp"
#include "pnpf/ransac.hpp"
#include "pnpf/refine.hpp"
#include "pnpf/synth.hpp"

namespace pnpf {

enum class CorrespondenceMode { LF, BB };
enum class PnpStrategy { Standard, RANSAC, Cauchy };
enum class FocalInit { GroundTruth, Predicted, Constant };
enum class RefineMode { InitialOnly, Joint, FixedFocal };
enum class AblationKind { PnPStrategies, FocalInit, Refinement };

struct ExperimentConfig {
    SceneSpec scene_spec;
    NoiseSpec noise_spec;
    FocalPredictorModel predictor_model;
    CorrespondenceMode correspondence_mode = CorrespondenceMode::BB;
    PnpStrategy pnp_strategy = PnpStrategy::Standard;
    FocalInit focal_init = FocalInit::Predicted;
    RefineMode refine = RefineMode::Joint;
    int n_scenes = 1;
    std::uint64_t seed = 0;
    std::string output_dir;  // empty: in-memory only, no artifacts

    // Tuning knobs beyond the core axes; all optional in the JSON form.
    int lf_grid = 28;
    double cauchy_scale = 1.0;
    RansacOptions ransac;    // rng_seed is derived per scene, never read
    SolverOptions solver;    // loss is set by pnp_strategy, never read

    void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json &j);

/// Resolved config for manifests; output_dir is intentionally omitted so a
/// rerun into a different directory reproduces byte-identical files.
nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig &config);

struct SceneOutcome {
    std::string scene_id;
    SampleErrors errors;  // all +inf when failed
    bool failed = false;
    std::string failure;
    SolveRecord record;
};

struct ExperimentResult {
    MetricsReport report;
    std::vector<std::pair<double, double>> curve;  // Acc over pose error, thresholds 0..1 step 0.05
    std::vector<SceneOutcome> scenes;
    std::uint64_t scene_stream_hash = 0;  // identical across paired-ablation cells
    std::size_t failed_count = 0;
};

/// Full pipeline: sample scenes, generate correspondences, initialize, solve,
/// evaluate. Writes errors.csv, report.json, curve.csv, and manifest_run.json
/// when config.output_dir is set. Deterministic for fixed config regardless
/// of `jobs`.
ExperimentResult run_experiment(const ExperimentConfig &config, int jobs = 1);

struct AblationRow {
    std::string label;
    MetricsReport report;
};

/// Runs run_experiment once per value of the varied axis on identical scene
/// streams (asserted by hash) and writes an ablation table when the base
/// config has an output directory.
std::vector<AblationRow> run_ablation_suite(AblationKind kind, const ExperimentConfig &base, int jobs = 1);

/// Pipeline stages behind the CLI subcommands; all operate on one workspace
/// directory. generate writes scenes/scene_*.json; solve consumes them and
/// writes results.json; eval joins both into errors.csv/report.json/curve.csv.
void run_generate_stage(const ExperimentConfig &config, const std::filesystem::path &dir, int jobs = 1);
void run_solve_stage(const ExperimentConfig &config, const std::filesystem::path &dir, int jobs = 1);
void run_eval_stage(const ExperimentConfig &config, const std::filesystem::path &dir);

/// Re-executes the run recorded in a manifest into `dir`. Stage commands
/// (solve, eval) read their inputs from `dir`, so rerun the pipeline in
/// order when reproducing a staged workspace.
void rerun_manifest(const std::filesystem::path &manifest_path, const std::filesystem::path &dir, int jobs = 1);

}  // namespace pnpf

#endif
