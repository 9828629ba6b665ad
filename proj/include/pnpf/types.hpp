#ifndef PNPF_TYPES_HPP
#define PNPF_TYPES_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <vector>

#include "pnpf/errors.hpp"

namespace pnpf {

template <typename Scalar>
using Vec2T = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3T = Eigen::Matrix<Scalar, 3, 3>;

using Vec2 = Vec2T<double>;
using Vec3 = Vec3T<double>;
using Mat3 = Mat3T<double>;

/// A 3D rotation stored as an orthonormal matrix with determinant +1.
///
/// The checked constructor rejects matrices more than `tol` away from SO(3).
/// Products of valid rotations skip the check (closed under composition up to
/// roundoff well below the tolerance).
template <typename Scalar>
class RotationT {
  public:
    RotationT() : mat_(Mat3T<Scalar>::Identity()) {}

    explicit RotationT(const Mat3T<Scalar> &m, Scalar tol = Scalar(1e-8)) : mat_(m) {
        const Scalar ortho = (m.transpose() * m - Mat3T<Scalar>::Identity()).template lpNorm<Eigen::Infinity>();
        if (ortho > tol || std::abs(m.determinant() - Scalar(1)) > tol) {
            throw DomainError("matrix is not a rotation (orthonormality/determinant check failed)");
        }
    }

    static RotationT identity() { return RotationT(); }

    /// Exponential map: axis-angle vector (axis * angle, radians) to rotation.
    static RotationT from_axis_angle(const Vec3T<Scalar> &omega) {
        const Scalar theta2 = omega.squaredNorm();
        Mat3T<Scalar> K;
        K << Scalar(0), -omega.z(), omega.y(), omega.z(), Scalar(0), -omega.x(), -omega.y(), omega.x(), Scalar(0);
        Scalar a, b;
        if (theta2 < Scalar(1e-16)) {
            // 2nd-order Taylor of sin(t)/t and (1-cos(t))/t^2
            a = Scalar(1) - theta2 / Scalar(6);
            b = Scalar(0.5) - theta2 / Scalar(24);
        } else {
            const Scalar theta = std::sqrt(theta2);
            a = std::sin(theta) / theta;
            b = (Scalar(1) - std::cos(theta)) / theta2;
        }
        return RotationT(Unchecked{}, Mat3T<Scalar>::Identity() + a * K + b * K * K);
    }

    static RotationT from_quaternion(const Eigen::Quaternion<Scalar> &q) {
        return RotationT(Unchecked{}, q.normalized().toRotationMatrix());
    }

    /// Logarithm map: axis-angle vector of this rotation, angle in [0, pi].
    Vec3T<Scalar> axis_angle() const {
        const Eigen::AngleAxis<Scalar> aa(mat_);
        return aa.angle() * aa.axis();
    }

    Eigen::Quaternion<Scalar> quaternion() const { return Eigen::Quaternion<Scalar>(mat_); }

    const Mat3T<Scalar> &matrix() const { return mat_; }

    RotationT transposed() const { return RotationT(Unchecked{}, mat_.transpose()); }

    RotationT operator*(const RotationT &rhs) const { return RotationT(Unchecked{}, mat_ * rhs.mat_); }

    Vec3T<Scalar> operator*(const Vec3T<Scalar> &p) const { return mat_ * p; }

    /// Nearest rotation after accumulated roundoff (quaternion renormalization).
    RotationT normalized() const {
        return RotationT(Unchecked{}, Eigen::Quaternion<Scalar>(mat_).normalized().toRotationMatrix());
    }

  private:
    struct Unchecked {};
    RotationT(Unchecked, const Mat3T<Scalar> &m) : mat_(m) {}
    Mat3T<Scalar> mat_;
};

using Rotation = RotationT<double>;

/// Rigid transform mapping object-frame points into the camera frame
/// (egocentric convention): p_cam = R * p_obj + t.
template <typename Scalar>
struct RigidPoseT {
    RotationT<Scalar> rotation;
    Vec3T<Scalar> translation = Vec3T<Scalar>::Zero();

    Vec3T<Scalar> transform(const Vec3T<Scalar> &p) const { return rotation * p + translation; }
};

using RigidPose = RigidPoseT<double>;

/// Pinhole camera with a single focal length, square pixels, and the
/// principal point fixed at the image center. No distortion, no skew.
template <typename Scalar>
struct PinholeCameraT {
    Scalar focal_px = Scalar(1);
    Vec2T<Scalar> principal_point = Vec2T<Scalar>::Zero();
    Vec2T<Scalar> image_size = Vec2T<Scalar>::Zero();

    /// The only supported construction: principal point at image center.
    static PinholeCameraT centered(Scalar focal_px, Scalar width, Scalar height) {
        if (!(focal_px > Scalar(0))) throw DomainError("focal length must be positive");
        PinholeCameraT cam;
        cam.focal_px = focal_px;
        cam.image_size = Vec2T<Scalar>(width, height);
        cam.principal_point = cam.image_size / Scalar(2);
        return cam;
    }

    PinholeCameraT with_focal(Scalar f) const {
        if (!(f > Scalar(0))) throw DomainError("focal length must be positive");
        PinholeCameraT cam = *this;
        cam.focal_px = f;
        return cam;
    }
};

using PinholeCamera = PinholeCameraT<double>;

/// One 2D-3D correspondence: object-frame point (meters) and its observed
/// pixel location.
struct Correspondence {
    Vec3 point3 = Vec3::Zero();
    Vec2 point2 = Vec2::Zero();
    double weight = 1.0;
};

using CorrespondenceSet = std::vector<Correspondence>;

}  // namespace pnpf

#endif
