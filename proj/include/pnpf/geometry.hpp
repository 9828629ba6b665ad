#ifndef PNPF_GEOMETRY_HPP
#define PNPF_GEOMETRY_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "pnpf/errors.hpp"
#include "pnpf/types.hpp"

namespace pnpf {

/// Points with camera-frame depth below this are treated as behind the camera.
inline constexpr double kCheiralityEps = 1e-9;

template <typename Derived>
Mat3T<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived> &v) {
    using S = typename Derived::Scalar;
    Mat3T<S> K;
    K << S(0), -v.z(), v.y(), v.z(), S(0), -v.x(), -v.y(), v.x(), S(0);
    return K;
}

/// Perspective projection of a camera-frame point. Throws CheiralityViolation
/// if the point is not strictly in front of the camera.
template <typename Scalar, typename Derived>
Vec2T<Scalar> project(const PinholeCameraT<Scalar> &camera, const Eigen::MatrixBase<Derived> &p_cam) {
    const Scalar z = p_cam.z();
    if (!(z > Scalar(kCheiralityEps))) throw CheiralityViolation("point at or behind the camera plane");
    return camera.focal_px / z * p_cam.template head<2>() + camera.principal_point;
}

/// Projection of an object-frame point through a pose.
template <typename Scalar, typename Derived>
Vec2T<Scalar> project(const PinholeCameraT<Scalar> &camera, const RigidPoseT<Scalar> &pose,
                      const Eigen::MatrixBase<Derived> &p_obj) {
    return project(camera, (pose.transform(p_obj)).eval());
}

/// Geodesic distance on SO(3) in radians: arccos((tr(Ra^T Rb) - 1) / 2),
/// with the trace argument clamped to [-1, 1] against roundoff.
template <typename Scalar>
Scalar geodesic_distance(const RotationT<Scalar> &a, const RotationT<Scalar> &b) {
    const Scalar c = ((a.matrix().transpose() * b.matrix()).trace() - Scalar(1)) / Scalar(2);
    return std::acos(std::clamp(c, Scalar(-1), Scalar(1)));
}

template <typename Scalar>
Scalar log_focal(Scalar focal_px) {
    if (!(focal_px > Scalar(0))) throw DomainError("focal length must be positive");
    return std::log(focal_px);
}

template <typename Scalar>
Scalar exp_focal(Scalar log_f) {
    return std::exp(log_f);
}

/// Jacobian of the projection w.r.t. the local parametrization, evaluated at
/// the current (pose, camera) linearization point. 2x7 with refine_focal, 2x6
/// without; fixed max size, so no heap traffic.
///
/// Column layout:
///   0..2  rotation increment omega, applied as R * exp([omega]x)
///   3..5  translation increment
///   6     log-focal increment (only when refine_focal)
template <typename Scalar>
using ProjectionJacobian = Eigen::Matrix<Scalar, 2, Eigen::Dynamic, Eigen::ColMajor, 2, 7>;

template <typename Scalar, typename Derived>
ProjectionJacobian<Scalar> projection_jacobian(const PinholeCameraT<Scalar> &camera, const RigidPoseT<Scalar> &pose,
                                               const Eigen::MatrixBase<Derived> &p_obj, bool refine_focal = true) {
    const Vec3T<Scalar> pc = pose.transform(p_obj);
    const Scalar z = pc.z();
    if (!(z > Scalar(kCheiralityEps))) throw CheiralityViolation("point at or behind the camera plane");

    const Scalar f = camera.focal_px;
    // d(pixel)/d(p_cam)
    Eigen::Matrix<Scalar, 2, 3> J_proj;
    J_proj << f / z, Scalar(0), -f * pc.x() / (z * z), Scalar(0), f / z, -f * pc.y() / (z * z);

    ProjectionJacobian<Scalar> J(2, refine_focal ? 7 : 6);
    // d(p_cam)/d(omega) for right-multiplied increment: -R * [p_obj]x
    J.template block<2, 3>(0, 0) = J_proj * (-(pose.rotation.matrix() * skew(p_obj)));
    // d(p_cam)/d(t) = I
    J.template block<2, 3>(0, 3) = J_proj;
    // d(pixel)/d(log f) = f * d(pixel)/d(f) = pixel - principal_point
    if (refine_focal) J.col(6) = f / z * pc.template head<2>();
    return J;
}

}  // namespace pnpf

#endif
