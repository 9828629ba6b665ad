#ifndef PNPF_METRICS_HPP
#define PNPF_METRICS_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "pnpf/types.hpp"

namespace pnpf {

/// Everything needed to score one prediction against its ground truth.
struct EvalSample {
    std::vector<Vec3> model_points;
    RigidPose pose_gt;
    RigidPose pose_pred;
    double f_gt = 0, f_pred = 0;  // px
    Vec2 principal_point = Vec2::Zero();
    Vec2 image_size = Vec2::Zero();
    double bbox_diag_px = 0;   // d_bbox, ground-truth projected box diagonal
    double image_diag_px = 0;  // d_img
};

struct MetricsReport {
    double med_err_r = 0;   // rad
    double acc_r_pi6 = 0;   // fraction with e_R < pi/6
    double med_err_t = 0;
    double med_err_rt = 0;
    double med_err_f = 0;
    double med_err_p = 0;
    double acc_p_01 = 0;    // fraction with e_P < 0.1
    std::uint64_t sample_count = 0;
};

/// Per-sample error vector, aggregated by `aggregate`.
struct SampleErrors {
    double rotation = 0;    // rad
    double translation = 0;
    double pose = 0;        // normalized 3D pose distance
    double focal = 0;
    double projection = 0;  // normalized reprojection distance
};

double rotation_error(const EvalSample &sample);
double translation_error(const EvalSample &sample);
double pose_error(const EvalSample &sample);
double focal_error(const EvalSample &sample);
double projection_error(const EvalSample &sample);

SampleErrors evaluate_sample(const EvalSample &sample);

MetricsReport aggregate(const std::vector<SampleErrors> &errors);

/// Cumulative accuracy: fraction of errors strictly below each threshold.
/// Thresholds must be sorted ascending.
std::vector<std::pair<double, double>> accuracy_curve(const std::vector<double> &errors,
                                                      const std::vector<double> &thresholds);

}  // namespace pnpf

#endif
