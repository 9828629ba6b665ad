#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "pnpf/epnp.hpp"
#include "pnpf/geometry.hpp"
#include "pnpf/ransac.hpp"
#include "pnpf/refine.hpp"
#include "pnpf/rng.hpp"
#include "test_util.hpp"

using namespace pnpf;
using testutil::exact_correspondences;

namespace {

struct Scene {
    PinholeCamera cam;
    RigidPose gt;
    CorrespondenceSet corrs;
    std::vector<bool> is_inlier;
};

Scene make_scene(Rng &rng, int n_points, double outlier_rate, double pixel_sigma) {
    Scene s;
    s.cam = PinholeCamera::centered(rng.uniform(600.0, 1400.0), 640.0, 480.0);
    s.gt = testutil::random_pose(rng, rng.uniform(5.0, 12.0));
    std::vector<Vec3> pts;
    for (int i = 0; i < n_points; ++i)
        pts.emplace_back(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    s.corrs = exact_correspondences(pts, s.gt, s.cam);
    s.is_inlier.assign(s.corrs.size(), true);
    for (size_t i = 0; i < s.corrs.size(); ++i) {
        s.corrs[i].point2 += pixel_sigma * Vec2(rng.normal(), rng.normal());
        if (rng.uniform() < outlier_rate) {
            s.corrs[i].point2 = Vec2(rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0));
            s.is_inlier[i] = false;
        }
    }
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// loss_value_and_weight
// ---------------------------------------------------------------------------

TEST_CASE("squared loss value and weight") {
    const auto [v0, w0] = loss_value_and_weight(LossFunction::squared(), 0.0);
    CHECK(v0 == 0.0);
    CHECK(w0 == 1.0);
    const auto [v3, w3] = loss_value_and_weight(LossFunction::squared(), 3.0);
    CHECK(v3 == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(w3 == 1.0);
}

TEST_CASE("Cauchy loss value and weight at unit scale") {
    const LossFunction cauchy = LossFunction::cauchy(1.0);
    const auto [v1, w1] = loss_value_and_weight(cauchy, 1.0);
    CHECK(v1 == doctest::Approx(0.69314718055994531).epsilon(1e-15));
    CHECK(w1 == doctest::Approx(0.5).epsilon(1e-15));
    const auto [v10, w10] = loss_value_and_weight(cauchy, 10.0);
    CHECK(v10 == doctest::Approx(4.61512051684126).epsilon(1e-14));
    CHECK(w10 == doctest::Approx(0.009900990099009901).epsilon(1e-14));
}

// ---------------------------------------------------------------------------
// solve_ransac
// ---------------------------------------------------------------------------

TEST_CASE("clean data keeps every correspondence and matches plain refinement") {
    Rng rng(601);
    const Scene s = make_scene(rng, 40, 0.0, 0.0);
    RansacOptions opts;
    opts.rng_seed = 7;

    const SolveResult res = solve_ransac(s.corrs, s.cam, opts, SolverOptions{});
    REQUIRE(res.inlier_mask.size() == s.corrs.size());
    for (bool b : res.inlier_mask) CHECK(b);

    const SolveResult direct =
        refine_joint(s.corrs, solve_epnp(s.corrs, s.cam), s.cam.focal_px, s.cam, SolverOptions{});
    CHECK(geodesic_distance(res.pose.rotation, direct.pose.rotation) < 1e-6);
    CHECK((res.pose.translation - direct.pose.translation).norm() < 1e-6);
    CHECK(std::abs(res.focal_px - direct.focal_px) < 1e-6 * direct.focal_px);
}

TEST_CASE("30% gross outliers are identified and rejected") {
    Rng rng(42);
    const Scene s = make_scene(rng, 100, 0.30, 0.5);
    RansacOptions opts;
    opts.inlier_threshold_px = 4.0;
    opts.rng_seed = 42;

    const SolveResult res = solve_ransac(s.corrs, s.cam, opts, SolverOptions{});
    REQUIRE(res.inlier_mask.size() == s.corrs.size());

    int true_total = 0, true_kept = 0, false_kept = 0;
    for (size_t i = 0; i < s.corrs.size(); ++i) {
        if (s.is_inlier[i]) {
            ++true_total;
            if (res.inlier_mask[i]) ++true_kept;
        } else if (res.inlier_mask[i]) {
            ++false_kept;
        }
    }
    CHECK(true_kept >= static_cast<int>(0.95 * true_total));
    CHECK(false_kept <= 2);
    CHECK(geodesic_distance(res.pose.rotation, s.gt.rotation) < 0.01);
    // translation absorbs the focal-depth ambiguity, so it is the loose axis
    CHECK(testutil::translation_gap(res.pose, s.gt) / s.gt.translation.norm() < 0.10);
}

TEST_CASE("reruns with the same seed are bit-identical") {
    Rng rng(603);
    const Scene s = make_scene(rng, 60, 0.25, 1.0);
    RansacOptions opts;
    opts.rng_seed = 99;

    const SolveResult a = solve_ransac(s.corrs, s.cam, opts, SolverOptions{});
    const SolveResult b = solve_ransac(s.corrs, s.cam, opts, SolverOptions{});
    CHECK((a.pose.rotation.matrix() - b.pose.rotation.matrix()).norm() == 0.0);
    CHECK((a.pose.translation - b.pose.translation).norm() == 0.0);
    CHECK(a.focal_px == b.focal_px);
    CHECK(a.inlier_mask == b.inlier_mask);
}

TEST_CASE("undersized minimal samples are rejected") {
    Rng rng(604);
    const Scene s = make_scene(rng, 20, 0.0, 0.0);
    RansacOptions opts;
    opts.sample_size = 3;
    CHECK_THROWS_AS(solve_ransac(s.corrs, s.cam, opts, SolverOptions{}), InvalidOptions);
}

TEST_CASE("structureless correspondences yield no consensus") {
    Rng rng(605);
    const PinholeCamera cam = PinholeCamera::centered(800.0, 640.0, 480.0);
    CorrespondenceSet corrs;
    for (int i = 0; i < 12; ++i) {
        Correspondence c;
        c.point3 = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        c.point2 = Vec2(rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0));
        corrs.push_back(c);
    }
    RansacOptions opts;
    opts.inlier_threshold_px = 1e-6;
    opts.max_iterations = 64;
    opts.rng_seed = 3;
    CHECK_THROWS_AS(solve_ransac(corrs, cam, opts, SolverOptions{}), NoConsensus);
}
