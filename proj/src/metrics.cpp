#include "pnpf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pnpf/geometry.hpp"

namespace pnpf {

namespace {

void check_sample(const EvalSample &s) {
    if (s.model_points.empty()) throw EmptyInput("evaluation sample has no model points");
    if (!(s.pose_gt.translation.norm() > 0)) throw DegenerateGroundTruth("ground-truth translation is zero");
    if (!(s.bbox_diag_px > 0) || !(s.image_diag_px > 0)) throw DegenerateGroundTruth("degenerate bbox/image diagonal");
    if (!(s.f_gt > 0)) throw DegenerateGroundTruth("ground-truth focal length must be positive");
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

double rotation_error(const EvalSample &s) { return geodesic_distance(s.pose_gt.rotation, s.pose_pred.rotation); }

double translation_error(const EvalSample &s) {
    const double norm_gt = s.pose_gt.translation.norm();
    if (!(norm_gt > 0)) throw DegenerateGroundTruth("ground-truth translation is zero");
    return (s.pose_gt.translation - s.pose_pred.translation).norm() / norm_gt;
}

double pose_error(const EvalSample &s) {
    check_sample(s);
    const double scale = (s.bbox_diag_px / s.image_diag_px) / s.pose_gt.translation.norm();
    double sum = 0;
    for (const Vec3 &X : s.model_points)
        sum += (s.pose_gt.transform(X) - s.pose_pred.transform(X)).norm();
    return scale * sum / static_cast<double>(s.model_points.size());
}

double focal_error(const EvalSample &s) {
    if (!(s.f_gt > 0)) throw DegenerateGroundTruth("ground-truth focal length must be positive");
    return std::abs(s.f_gt - s.f_pred) / s.f_gt;
}

double projection_error(const EvalSample &s) {
    check_sample(s);
    PinholeCamera cam_gt;
    cam_gt.focal_px = s.f_gt;
    cam_gt.principal_point = s.principal_point;
    cam_gt.image_size = s.image_size;
    const PinholeCamera cam_pred = cam_gt.with_focal(s.f_pred);

    double sum = 0;
    for (const Vec3 &X : s.model_points)
        sum += (project(cam_gt, s.pose_gt, X) - project(cam_pred, s.pose_pred, X)).norm();
    return sum / static_cast<double>(s.model_points.size()) / s.bbox_diag_px;
}

SampleErrors evaluate_sample(const EvalSample &s) {
    SampleErrors e;
    e.rotation = rotation_error(s);
    e.translation = translation_error(s);
    e.pose = pose_error(s);
    e.focal = focal_error(s);
    e.projection = projection_error(s);
    return e;
}

MetricsReport aggregate(const std::vector<SampleErrors> &errors) {
    if (errors.empty()) throw EmptyInput("cannot aggregate zero samples");
    const double n = static_cast<double>(errors.size());

    std::vector<double> r, t, rt, f, p;
    r.reserve(errors.size());
    t.reserve(errors.size());
    rt.reserve(errors.size());
    f.reserve(errors.size());
    p.reserve(errors.size());
    size_t acc_r = 0, acc_p = 0;
    constexpr double pi_6 = 0.52359877559829887307710723054658;
    for (const SampleErrors &e : errors) {
        r.push_back(e.rotation);
        t.push_back(e.translation);
        rt.push_back(e.pose);
        f.push_back(e.focal);
        p.push_back(e.projection);
        if (e.rotation < pi_6) ++acc_r;   // strictly below the threshold
        if (e.projection < 0.1) ++acc_p;
    }

    MetricsReport rep;
    rep.med_err_r = median_of(std::move(r));
    rep.acc_r_pi6 = acc_r / n;
    rep.med_err_t = median_of(std::move(t));
    rep.med_err_rt = median_of(std::move(rt));
    rep.med_err_f = median_of(std::move(f));
    rep.med_err_p = median_of(std::move(p));
    rep.acc_p_01 = acc_p / n;
    rep.sample_count = errors.size();
    return rep;
}

std::vector<std::pair<double, double>> accuracy_curve(const std::vector<double> &errors,
                                                      const std::vector<double> &thresholds) {
    if (errors.empty()) throw EmptyInput("cannot build an accuracy curve from zero errors");
    for (size_t i = 1; i < thresholds.size(); ++i)
        if (thresholds[i] < thresholds[i - 1]) throw UnsortedThresholds("thresholds must be sorted ascending");

    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, double>> curve;
    curve.reserve(thresholds.size());
    for (double thr : thresholds) {
        const auto below = std::lower_bound(sorted.begin(), sorted.end(), thr) - sorted.begin();
        curve.emplace_back(thr, static_cast<double>(below) / static_cast<double>(sorted.size()));
    }
    return curve;
}

}  // namespace pnpf
