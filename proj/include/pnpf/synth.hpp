#ifndef PNPF_SYNTH_HPP
#define PNPF_SYNTH_HPP

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "pnpf/rng.hpp"
#include "pnpf/types.hpp"

namespace pnpf {

struct BoxModel {
    Vec3 dims = Vec3(1, 1, 1);  // full side lengths, meters
};

struct PointCloudModel {
    std::vector<Vec3> points;  // object frame
};

/// Rotation sampling: uniform over SO(3), or uniform azimuth/elevation ranges
/// (radians) with a uniform in-plane roll.
struct RotationDistribution {
    bool uniform_so3 = true;
    double azimuth_min = 0, azimuth_max = 0;
    double elevation_min = 0, elevation_max = 0;
    double roll_min = 0, roll_max = 0;
};

struct SceneSpec {
    std::variant<BoxModel, PointCloudModel> model = BoxModel{};
    double distance_min = 2, distance_max = 20;  // camera-frame t_z, meters
    RotationDistribution rotation;
    double focal_min_px = 300, focal_max_px = 3000;  // log-uniform
    double image_width = 640, image_height = 480;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct GroundTruthScene {
    RigidPose pose_gt;
    PinholeCamera camera_gt;
    std::vector<Vec3> model_points;  // object frame
    double bbox_diag_px = 0;         // tight 2D box of projected model points
    double image_diag_px = 0;
    Vec3 dims_gt = Vec3::Zero();
    bool is_box = true;  // the LF generator ray-casts boxes, bins clouds
};

struct NoiseSpec {
    double pixel_sigma = 0;      // Gaussian, px
    double point3_sigma = 0;     // Gaussian on 3D points, meters (LF mode)
    double outlier_rate = 0;     // in [0, 1); replaced uniform-in-image
    double dims_rel_sigma = 0;   // relative Gaussian on box dims (BB mode)

    void validate() const;
};

struct FocalPredictorModel {
    double log_sigma = 0.24;  // calibrated: median relative focal error near 0.175
    double bias = 0;
};

/// Deterministic scene for (spec.rng_seed, index); rejection-samples placement
/// until the whole model projects inside the image (<= 1000 attempts).
GroundTruthScene sample_scene(const SceneSpec &spec, std::uint64_t index);

/// BB mode: the 8 corners of the (perturbed-dims) box paired with noisy
/// projections of the true corners. Corners may project out of frame.
std::pair<CorrespondenceSet, Vec3> generate_bb_correspondences(const GroundTruthScene &scene, const NoiseSpec &noise,
                                                               Rng &rng);

/// LF mode: grid x grid lattice over the projected 2D bbox; each cell whose
/// center ray hits the visible surface emits one correspondence.
CorrespondenceSet generate_lf_correspondences(const GroundTruthScene &scene, int grid, const NoiseSpec &noise,
                                              Rng &rng);

/// Log-normal focal predictor: f_pred = exp(ln f_gt + bias + N(0, log_sigma^2)).
double simulate_focal_prediction(double f_gt, const FocalPredictorModel &model, Rng &rng);

/// Median ground-truth focal of a training split (even count: mean of the two
/// middle values).
double constant_focal_baseline(const std::vector<GroundTruthScene> &training_scenes);

}  // namespace pnpf

#endif
