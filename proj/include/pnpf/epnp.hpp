#ifndef PNPF_EPNP_HPP
#define PNPF_EPNP_HPP

#include <Eigen/Core>

#include "pnpf/types.hpp"

namespace pnpf {

/// EPnP control-point basis: 4 control points in the general case (centroid
/// plus principal-axis offsets), 3 for planar point sets. `alphas` holds the
/// N x k barycentric coordinates; each row sums to 1 and reconstructs its 3D
/// point exactly.
struct ControlPointBasis {
    Eigen::Matrix<double, 3, Eigen::Dynamic, Eigen::ColMajor, 3, 4> control_points;  // 3 x k, k in {3, 4}
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, Eigen::Dynamic, 4> alphas;  // N x k
    bool planar = false;
};

ControlPointBasis select_control_points(const CorrespondenceSet &corrs);

/// Closed-form EPnP pose at a fixed focal length. Seeds the joint refiner;
/// the focal is taken as given and never re-estimated here.
RigidPose solve_epnp(const CorrespondenceSet &corrs, const PinholeCamera &camera);

}  // namespace pnpf

#endif
