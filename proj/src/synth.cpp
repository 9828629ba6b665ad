#include "pnpf/synth.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "pnpf/geometry.hpp"

namespace pnpf {

void SceneSpec::validate() const {
    if (!(distance_min > 0) || !(distance_min <= distance_max)) throw InvalidOptions("bad distance range");
    if (!(focal_min_px > 0) || !(focal_min_px <= focal_max_px)) throw InvalidOptions("bad focal range");
    if (!(image_width > 0) || !(image_height > 0)) throw InvalidOptions("image size must be positive");
    if (const auto *box = std::get_if<BoxModel>(&model)) {
        if (!(box->dims.minCoeff() > 0)) throw InvalidOptions("box dimensions must be positive");
    } else {
        const auto &cloud = std::get<PointCloudModel>(model);
        if (cloud.points.size() < 4) throw InvalidOptions("point-cloud model needs at least 4 points");
    }
    if (!rotation.uniform_so3) {
        if (rotation.azimuth_min > rotation.azimuth_max || rotation.elevation_min > rotation.elevation_max ||
            rotation.roll_min > rotation.roll_max)
            throw InvalidOptions("bad rotation ranges");
    }
}

void NoiseSpec::validate() const {
    if (pixel_sigma < 0 || point3_sigma < 0 || dims_rel_sigma < 0) throw InvalidOptions("sigmas must be >= 0");
    if (outlier_rate < 0 || outlier_rate >= 1) throw InvalidOptions("outlier_rate must lie in [0, 1)");
}

namespace {

std::vector<Vec3> box_corners(const Vec3 &dims) {
    std::vector<Vec3> corners;
    corners.reserve(8);
    for (int idx = 0; idx < 8; ++idx) {
        const double sx = (idx & 1) ? 0.5 : -0.5;
        const double sy = (idx & 2) ? 0.5 : -0.5;
        const double sz = (idx & 4) ? 0.5 : -0.5;
        corners.emplace_back(sx * dims.x(), sy * dims.y(), sz * dims.z());
    }
    return corners;
}

Rotation sample_rotation(const RotationDistribution &dist, Rng &rng) {
    // Three uniforms in either branch, so the stream advances identically.
    const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
    if (dist.uniform_so3) {
        // Shoemake's subgroup-algorithm quaternion.
        constexpr double two_pi = 6.283185307179586476925286766559;
        const double s1 = std::sqrt(1.0 - u1), s2 = std::sqrt(u1);
        const Eigen::Quaterniond q(s2 * std::cos(two_pi * u3), s1 * std::sin(two_pi * u2),
                                   s1 * std::cos(two_pi * u2), s2 * std::sin(two_pi * u3));
        return Rotation::from_quaternion(q);
    }
    const double az = dist.azimuth_min + (dist.azimuth_max - dist.azimuth_min) * u1;
    const double el = dist.elevation_min + (dist.elevation_max - dist.elevation_min) * u2;
    const double roll = dist.roll_min + (dist.roll_max - dist.roll_min) * u3;
    const Eigen::Matrix3d m = (Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(el, Eigen::Vector3d::UnitX()) *
                               Eigen::AngleAxisd(az, Eigen::Vector3d::UnitY()))
                                  .toRotationMatrix();
    return Rotation(m);
}

bool all_points_visible(const std::vector<Vec3> &points, const RigidPose &pose, const PinholeCamera &cam) {
    for (const Vec3 &p : points) {
        const Vec3 pc = pose.transform(p);
        if (!(pc.z() > kCheiralityEps)) return false;
        const Vec2 px = project(cam, pc);
        if (px.x() < 0 || px.x() > cam.image_size.x() || px.y() < 0 || px.y() > cam.image_size.y()) return false;
    }
    return true;
}

}  // namespace

GroundTruthScene sample_scene(const SceneSpec &spec, std::uint64_t index) {
    spec.validate();
    Rng rng(derive_seed(spec.rng_seed, index, "scene"));

    GroundTruthScene scene;
    if (const auto *box = std::get_if<BoxModel>(&spec.model)) {
        scene.model_points = box_corners(box->dims);
        scene.dims_gt = box->dims;
        scene.is_box = true;
    } else {
        const auto &cloud = std::get<PointCloudModel>(spec.model).points;
        scene.model_points = cloud;
        Vec3 lo = cloud.front(), hi = cloud.front();
        for (const Vec3 &p : cloud) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        scene.dims_gt = hi - lo;
        scene.is_box = false;
    }

    const double f = std::exp(rng.uniform(std::log(spec.focal_min_px), std::log(spec.focal_max_px)));
    scene.camera_gt = PinholeCamera::centered(f, spec.image_width, spec.image_height);

    scene.pose_gt.rotation = sample_rotation(spec.rotation, rng);
    const double dist = rng.uniform(spec.distance_min, spec.distance_max);

    double radius = 0;
    for (const Vec3 &p : scene.model_points) radius = std::max(radius, p.norm());
    const double lim_x = std::max(0.0, (spec.image_width / 2 / f) * dist - radius);
    const double lim_y = std::max(0.0, (spec.image_height / 2 / f) * dist - radius);

    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const double ux = rng.uniform(-1.0, 1.0), uy = rng.uniform(-1.0, 1.0);
        scene.pose_gt.translation = Vec3(lim_x * ux, lim_y * uy, dist);
        placed = all_points_visible(scene.model_points, scene.pose_gt, scene.camera_gt);
    }
    if (!placed) throw SamplingExhausted("could not place the object fully inside the image in 1000 attempts");

    Vec2 lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    for (const Vec3 &p : scene.model_points) {
        const Vec2 px = project(scene.camera_gt, scene.pose_gt, p);
        lo = lo.cwiseMin(px);
        hi = hi.cwiseMax(px);
    }
    scene.bbox_diag_px = (hi - lo).norm();
    scene.image_diag_px = std::hypot(spec.image_width, spec.image_height);
    return scene;
}

std::pair<CorrespondenceSet, Vec3> generate_bb_correspondences(const GroundTruthScene &scene, const NoiseSpec &noise,
                                                               Rng &rng) {
    noise.validate();

    Vec3 dims_pred;
    for (int a = 0; a < 3; ++a) {
        const double n = rng.normal();
        dims_pred[a] = std::max(scene.dims_gt[a] * (1.0 + noise.dims_rel_sigma * n), 0.01 * scene.dims_gt[a]);
    }

    const std::vector<Vec3> true_corners = box_corners(scene.dims_gt);
    const std::vector<Vec3> pred_corners = box_corners(dims_pred);
    const double w = scene.camera_gt.image_size.x(), h = scene.camera_gt.image_size.y();

    CorrespondenceSet corrs;
    corrs.reserve(8);
    for (int i = 0; i < 8; ++i) {
        // Fixed draw count per corner keeps the stream aligned across noise
        // settings: two gaussians, then the outlier coin and placement.
        const double n1 = rng.normal(), n2 = rng.normal();
        const double coin = rng.uniform();
        const double ox = rng.uniform(), oy = rng.uniform();

        Correspondence c;
        c.point3 = pred_corners[i];
        const Vec2 exact = project(scene.camera_gt, scene.pose_gt, true_corners[i]);
        c.point2 = coin < noise.outlier_rate ? Vec2(ox * w, oy * h)
                                             : Vec2(exact.x() + noise.pixel_sigma * n1, exact.y() + noise.pixel_sigma * n2);
        corrs.push_back(c);
    }
    return {std::move(corrs), dims_pred};
}

namespace {

// Nearest positive box intersection of the object-frame ray o + t*d with the
// axis-aligned box of side lengths `dims` centered at the origin.
bool ray_box_nearest(const Vec3 &o, const Vec3 &d, const Vec3 &dims, Vec3 &hit) {
    double t0 = 0, t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double half = dims[a] / 2;
        if (d[a] == 0.0) {
            if (o[a] < -half || o[a] > half) return false;
            continue;
        }
        double ta = (-half - o[a]) / d[a];
        double tb = (half - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t0 > t1 || t0 <= 0) return false;
    hit = o + t0 * d;
    return true;
}

}  // namespace

CorrespondenceSet generate_lf_correspondences(const GroundTruthScene &scene, int grid, const NoiseSpec &noise,
                                              Rng &rng) {
    if (grid < 4) throw InvalidOptions("location-field grid must be at least 4");
    noise.validate();

    const PinholeCamera &cam = scene.camera_gt;
    const double f = cam.focal_px;
    const double w = cam.image_size.x(), h = cam.image_size.y();

    Vec2 lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    for (const Vec3 &p : scene.model_points) {
        const Vec2 px = project(cam, scene.pose_gt, p);
        lo = lo.cwiseMin(px);
        hi = hi.cwiseMax(px);
    }
    const double cell_w = (hi.x() - lo.x()) / grid;
    const double cell_h = (hi.y() - lo.y()) / grid;

    // (cell index -> visible surface point) per model type.
    std::map<int, Vec3> hits;
    if (scene.is_box) {
        const Eigen::Matrix3d Rt = scene.pose_gt.rotation.matrix().transpose();
        const Vec3 origin_obj = -(Rt * scene.pose_gt.translation);
        for (int gy = 0; gy < grid; ++gy)
            for (int gx = 0; gx < grid; ++gx) {
                const double u = lo.x() + (gx + 0.5) * cell_w;
                const double v = lo.y() + (gy + 0.5) * cell_h;
                const Vec3 dir_obj =
                    Rt * Vec3((u - cam.principal_point.x()) / f, (v - cam.principal_point.y()) / f, 1.0);
                Vec3 hit;
                if (ray_box_nearest(origin_obj, dir_obj, scene.dims_gt, hit)) hits.emplace(gy * grid + gx, hit);
            }
    } else {
        // Bin the cloud into cells; keep the nearest point per cell.
        std::map<int, double> depth;
        for (const Vec3 &p : scene.model_points) {
            const Vec3 pc = scene.pose_gt.transform(p);
            const Vec2 px = project(cam, pc);
            int gx = static_cast<int>((px.x() - lo.x()) / cell_w);
            int gy = static_cast<int>((px.y() - lo.y()) / cell_h);
            gx = std::clamp(gx, 0, grid - 1);
            gy = std::clamp(gy, 0, grid - 1);
            const int key = gy * grid + gx;
            const auto it = depth.find(key);
            if (it == depth.end() || pc.z() < it->second) {
                depth[key] = pc.z();
                hits[key] = p;
            }
        }
    }
    if (hits.empty()) throw EmptyField("no grid cell hits the object");

    CorrespondenceSet corrs;
    corrs.reserve(hits.size());
    for (const auto &[key, surface] : hits) {
        const double n3x = rng.normal(), n3y = rng.normal(), n3z = rng.normal();
        const double n1 = rng.normal(), n2 = rng.normal();
        const double coin = rng.uniform();
        const double ox = rng.uniform(), oy = rng.uniform();

        const int gx = key % grid, gy = key / grid;
        Correspondence c;
        c.point3 = surface + noise.point3_sigma * Vec3(n3x, n3y, n3z);
        const Vec2 center(lo.x() + (gx + 0.5) * cell_w, lo.y() + (gy + 0.5) * cell_h);
        c.point2 = coin < noise.outlier_rate
                       ? Vec2(ox * w, oy * h)
                       : Vec2(center.x() + noise.pixel_sigma * n1, center.y() + noise.pixel_sigma * n2);
        corrs.push_back(c);
    }
    return corrs;
}

double simulate_focal_prediction(double f_gt, const FocalPredictorModel &model, Rng &rng) {
    if (!(f_gt > 0)) throw DomainError("ground-truth focal length must be positive");
    if (model.log_sigma < 0) throw InvalidOptions("log_sigma must be >= 0");
    const double z = rng.normal();
    return std::exp(std::log(f_gt) + model.bias + model.log_sigma * z);
}

double constant_focal_baseline(const std::vector<GroundTruthScene> &training_scenes) {
    if (training_scenes.empty()) throw EmptyInput("constant baseline needs at least one training scene");
    std::vector<double> focals;
    focals.reserve(training_scenes.size());
    for (const auto &s : training_scenes) focals.push_back(s.camera_gt.focal_px);
    std::sort(focals.begin(), focals.end());
    const size_t n = focals.size();
    return n % 2 == 1 ? focals[n / 2] : 0.5 * (focals[n / 2 - 1] + focals[n / 2]);
}

}  // namespace pnpf
