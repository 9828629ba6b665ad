#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pnpf/geometry.hpp"
#include "pnpf/rng.hpp"
#include "test_util.hpp"

using namespace pnpf;
using testutil::random_rotation;

namespace {

constexpr double kDeg = 0.017453292519943295;

RigidPose pose_rt(const Rotation &r, const Vec3 &t) {
    RigidPose p;
    p.rotation = r;
    p.translation = t;
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

TEST_CASE("optical-axis point projects to the principal point") {
    PinholeCamera cam = PinholeCamera::centered(1000.0, 1000.0, 1000.0);
    const Vec2 px = project(cam, pose_rt(Rotation::identity(), Vec3(0, 0, 5)), Vec3(0, 0, 0));
    CHECK(px.x() == doctest::Approx(500.0).epsilon(1e-15));
    CHECK(px.y() == doctest::Approx(500.0).epsilon(1e-15));
}

TEST_CASE("pinhole formula on a hand-evaluated example") {
    PinholeCamera cam = PinholeCamera::centered(800.0, 640.0, 480.0);
    const Vec2 px = project(cam, pose_rt(Rotation::identity(), Vec3(0, 0, 6)), Vec3(1, 1, 1));
    // 800 * 1/7 + center
    CHECK(px.x() == doctest::Approx(434.28571428571428).epsilon(1e-14));
    CHECK(px.y() == doctest::Approx(354.28571428571428).epsilon(1e-14));
}

TEST_CASE("point behind the camera raises") {
    PinholeCamera cam = PinholeCamera::centered(800.0, 640.0, 480.0);
    CHECK_THROWS_AS(project(cam, pose_rt(Rotation::identity(), Vec3(0, 0, 0.5)), Vec3(0, 0, -1)),
                    CheiralityViolation);
    CHECK_THROWS_AS(project(cam, Vec3(0, 0, 0)), CheiralityViolation);  // exactly on the plane
}

TEST_CASE("project is frame-change invariant") {
    Rng rng(301);
    PinholeCamera cam = PinholeCamera::centered(900.0, 640.0, 480.0);
    for (int k = 0; k < 50; ++k) {
        const RigidPose pose = testutil::random_pose(rng, 8.0);
        const Rotation g = random_rotation(rng);
        const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        // Rotate the object frame by g and fold g^-1 into the pose.
        RigidPose pose2 = pose;
        pose2.rotation = pose.rotation * g.transposed();
        const Vec2 a = project(cam, pose, p);
        const Vec2 b = project(cam, pose2, (g * p).eval());
        CHECK((a - b).norm() < 1e-9);
    }
}

// ---------------------------------------------------------------------------
// transform
// ---------------------------------------------------------------------------

TEST_CASE("rigid transform basics") {
    CHECK((pose_rt(Rotation::identity(), Vec3::Zero()).transform(Vec3(1, 2, 3)) - Vec3(1, 2, 3)).norm() == 0.0);

    const Rotation rz180 = Rotation::from_axis_angle(Vec3(0, 0, 180 * kDeg));
    CHECK((pose_rt(rz180, Vec3::Zero()).transform(Vec3(1, 0, 0)) - Vec3(-1, 0, 0)).norm() < 1e-15);

    const Rotation rz90 = Rotation::from_axis_angle(Vec3(0, 0, 90 * kDeg));
    CHECK((pose_rt(rz90, Vec3(0, 0, 5)).transform(Vec3(1, 0, 0)) - Vec3(0, 1, 5)).norm() < 1e-15);
}

TEST_CASE("rotation closure and validity checks") {
    Rng rng(302);
    for (int k = 0; k < 100; ++k) {
        const Rotation c = random_rotation(rng) * random_rotation(rng);
        const Mat3 m = c.matrix();
        CHECK((m.transpose() * m - Mat3::Identity()).lpNorm<Eigen::Infinity>() < 1e-8);
        CHECK(std::abs(m.determinant() - 1.0) < 1e-8);
        CHECK_NOTHROW(Rotation{m});  // re-validate through the checked constructor
    }
    Mat3 bad = Mat3::Identity();
    bad(0, 0) = 1.5;
    CHECK_THROWS_AS(Rotation{bad}, DomainError);
}

TEST_CASE("axis-angle round trip, including the small-angle branch") {
    Rng rng(303);
    for (int k = 0; k < 100; ++k) {
        const double theta = k < 10 ? 1e-9 * (k + 1) : rng.uniform(1e-6, 3.1);
        const Vec3 omega = theta * Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
        const Vec3 back = Rotation::from_axis_angle(omega).axis_angle();
        CHECK((back - omega).norm() < 1e-12 + 1e-9 * theta);
    }
}

// ---------------------------------------------------------------------------
// geodesic_distance
// ---------------------------------------------------------------------------

TEST_CASE("geodesic distance on known pairs") {
    const Rotation id = Rotation::identity();
    CHECK(geodesic_distance(id, id) == 0.0);

    const Rotation rz30 = Rotation::from_axis_angle(Vec3(0, 0, 30 * kDeg));
    CHECK(geodesic_distance(id, rz30) == doctest::Approx(0.52359877559829887).epsilon(1e-13));

    // 10 deg about x vs 10 deg about y; expected value frozen from the
    // axis-angle of a^T b computed independently.
    const Rotation rx = Rotation::from_axis_angle(Vec3(10 * kDeg, 0, 0));
    const Rotation ry = Rotation::from_axis_angle(Vec3(0, 10 * kDeg, 0));
    CHECK(geodesic_distance(rx, ry) == doctest::Approx(0.24666997985944517).epsilon(1e-12));
}

TEST_CASE("geodesic distance agrees with the axis-angle magnitude oracle") {
    Rng rng(304);
    for (int k = 0; k < 200; ++k) {
        const Rotation a = random_rotation(rng), b = random_rotation(rng);
        const double oracle = (a.transposed() * b).axis_angle().norm();
        // Absolute tolerance: both routes lose precision near pi.
        CHECK(std::abs(geodesic_distance(a, b) - oracle) < 5e-7);
    }
}

TEST_CASE("geodesic distance is a metric") {
    Rng rng(305);
    for (int k = 0; k < 1000; ++k) {
        const Rotation a = random_rotation(rng), b = random_rotation(rng), c = random_rotation(rng);
        const double ab = geodesic_distance(a, b), ba = geodesic_distance(b, a);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab >= 0.0);
        CHECK(ab <= geodesic_distance(a, c) + geodesic_distance(c, b) + 1e-9);
    }
    const Rotation r = random_rotation(rng);
    CHECK(geodesic_distance(r, r) < 1e-9);
}

// ---------------------------------------------------------------------------
// log/exp focal
// ---------------------------------------------------------------------------

TEST_CASE("log focal on known values and round trip") {
    CHECK(log_focal(1.0) == 0.0);
    CHECK(log_focal(2.718281828459045) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(log_focal(1000.0) == doctest::Approx(6.9077552789821368).epsilon(1e-15));
    CHECK_THROWS_AS(log_focal(0.0), DomainError);
    CHECK_THROWS_AS(log_focal(-5.0), DomainError);

    Rng rng(306);
    for (int k = 0; k < 200; ++k) {
        const double f = std::exp(rng.uniform(std::log(10.0), std::log(1e5)));
        CHECK(exp_focal(log_focal(f)) == doctest::Approx(f).epsilon(1e-14));
    }
}

// ---------------------------------------------------------------------------
// projection_jacobian
// ---------------------------------------------------------------------------

namespace {

// Central finite differences of project() w.r.t. the local parametrization.
Eigen::Matrix<double, 2, 7> fd_jacobian(const PinholeCamera &cam, const RigidPose &pose, const Vec3 &p,
                                        double h = 1e-6) {
    Eigen::Matrix<double, 2, 7> J;
    for (int i = 0; i < 7; ++i) {
        auto perturbed = [&](double sign) {
            RigidPose q = pose;
            PinholeCamera c = cam;
            Eigen::Matrix<double, 7, 1> d = Eigen::Matrix<double, 7, 1>::Zero();
            d(i) = sign * h;
            q.rotation = pose.rotation * Rotation::from_axis_angle(d.head<3>());
            q.translation += d.segment<3>(3);
            c.focal_px = std::exp(std::log(cam.focal_px) + d(6));
            return project(c, q, p);
        };
        J.col(i) = (perturbed(1.0) - perturbed(-1.0)) / (2.0 * h);
    }
    return J;
}

}  // namespace

TEST_CASE("analytic jacobian matches central finite differences") {
    Rng rng(307);
    for (int k = 0; k < 100; ++k) {
        const PinholeCamera cam = PinholeCamera::centered(rng.uniform(300.0, 3000.0), 640.0, 480.0);
        const RigidPose pose = testutil::random_pose(rng, rng.uniform(3.0, 15.0));
        const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));

        const Eigen::Matrix<double, 2, 7> fd = fd_jacobian(cam, pose, p);
        const auto J7 = projection_jacobian(cam, pose, p, true);
        const auto J6 = projection_jacobian(cam, pose, p, false);
        REQUIRE(J7.cols() == 7);
        REQUIRE(J6.cols() == 6);

        const double scale = std::max(1.0, fd.norm());
        CHECK((J7 - fd).norm() / scale < 1e-5);
        CHECK((J6 - fd.leftCols<6>()).norm() / scale < 1e-5);
    }
}

TEST_CASE("log-focal column vanishes on the optical axis") {
    const PinholeCamera cam = PinholeCamera::centered(1200.0, 640.0, 480.0);
    const auto J = projection_jacobian(cam, pose_rt(Rotation::identity(), Vec3(0, 0, 4)), Vec3(0, 0, 0), true);
    CHECK(J.col(6).norm() == 0.0);
}

TEST_CASE("translation column is f/Z at identity rotation") {
    const PinholeCamera cam = PinholeCamera::centered(800.0, 640.0, 480.0);
    const double z = 5.0;
    const auto J = projection_jacobian(cam, pose_rt(Rotation::identity(), Vec3(0.3, -0.1, z)), Vec3(0, 0, 0), true);
    CHECK(J(0, 3) == doctest::Approx(800.0 / z).epsilon(1e-12));
    CHECK(J(1, 4) == doctest::Approx(800.0 / z).epsilon(1e-12));
    CHECK(J(0, 4) == doctest::Approx(0.0));
    CHECK(J(1, 3) == doctest::Approx(0.0));
}

TEST_CASE("jacobian rejects points behind the camera") {
    const PinholeCamera cam = PinholeCamera::centered(800.0, 640.0, 480.0);
    CHECK_THROWS_AS(projection_jacobian(cam, pose_rt(Rotation::identity(), Vec3(0, 0, -2)), Vec3(0, 0, 0), true),
                    CheiralityViolation);
}
