#ifndef PNPF_IO_HPP
#define PNPF_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pnpf/metrics.hpp"
#include "pnpf/types.hpp"

namespace pnpf {

/// One scene's worth of interchange data: ground truth + predicted focal +
/// correspondences, exactly the on-disk document layout.
struct SceneRecord {
    std::string scene_id;
    double f_gt = 0;
    double f_pred = 0;
    Vec2 image_size = Vec2::Zero();
    RigidPose pose_gt;
    CorrespondenceSet correspondences;
    double bbox_diag = 0;
    std::vector<Vec3> model_points;  // optional; empty means absent
};

nlohmann::ordered_json scene_record_to_json(const SceneRecord &rec);
SceneRecord scene_record_from_json(const nlohmann::json &j);
void write_scene_record(const std::filesystem::path &path, const SceneRecord &rec);
SceneRecord read_scene_record(const std::filesystem::path &path);

/// Solver output for one scene, as written by the solve stage.
struct SolveRecord {
    std::string scene_id;
    RigidPose pose_pred;
    double focal_pred = 0;
    double initial_cost = 0;
    double final_cost = 0;
    int iterations = 0;
    bool converged = false;
    int inlier_count = 0;
    bool failed = false;
    std::string failure;
};

void write_solve_records(const std::filesystem::path &path, const std::vector<SolveRecord> &records);
std::vector<SolveRecord> read_solve_records(const std::filesystem::path &path);

nlohmann::ordered_json metrics_report_to_json(const MetricsReport &report);
MetricsReport metrics_report_from_json(const nlohmann::json &j);
void write_metrics_report(const std::filesystem::path &path, const MetricsReport &report);
MetricsReport read_metrics_report(const std::filesystem::path &path);

/// Two-column CSV with the pinned one-line header "threshold,fraction".
void write_curve_csv(const std::filesystem::path &path, const std::vector<std::pair<double, double>> &curve);

/// Per-scene error table (scene_id + the five error columns; inf for failed
/// scenes).
void write_errors_csv(const std::filesystem::path &path,
                      const std::vector<std::pair<std::string, SampleErrors>> &rows);

/// FNV-1a 64 over a file's bytes, as a fixed-width hex string.
std::string fnv1a_file_hex(const std::filesystem::path &path);

/// Record of one run: what was executed, with what inputs, and checksums of
/// what it produced. Reruns from a manifest must reproduce every artifact
/// byte-for-byte, so the output directory itself is deliberately not stored.
struct Manifest {
    std::string command;
    nlohmann::ordered_json config;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> artifacts;  // (relative path, fnv1a hex)
};

void write_manifest(const std::filesystem::path &path, const Manifest &manifest);
Manifest read_manifest(const std::filesystem::path &path);

/// Checksums `relative_paths` under `base` (sorted by path) into manifest form.
std::vector<std::pair<std::string, std::string>> checksum_artifacts(const std::filesystem::path &base,
                                                                    std::vector<std::string> relative_paths);

}  // namespace pnpf

#endif
