#include "pnpf/epnp.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "pnpf/geometry.hpp"

// EPnP (Lepetit-style): express the 3D points as barycentric combinations of
// control points, solve for the camera-frame control points from the 2N x 3k
// projection system's null space, disambiguate the null-space mixture betas
// through the inter-control-point distance constraints, then align with
// Procrustes. k = 4 control points in general, 3 for planar point sets.

namespace pnpf {

namespace {

// Pair list (a < b) over k control points: 6 pairs for k=4, 3 for k=3.
std::vector<std::pair<int, int>> control_pairs(int k) {
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b) pairs.emplace_back(a, b);
    return pairs;
}

// Product columns (i <= j) over nv betas, ordered (0,0),(0,1),(1,1),(0,2),...
std::vector<std::pair<int, int>> product_columns(int nv) {
    std::vector<std::pair<int, int>> cols;
    for (int j = 0; j < nv; ++j)
        for (int i = 0; i <= j; ++i) cols.emplace_back(i, j);
    return cols;
}

struct BetaProblem {
    Eigen::MatrixXd L;    // pairs x products
    Eigen::VectorXd rho;  // squared object-frame control distances
    std::vector<std::pair<int, int>> cols;
};

// Residuals L * products(beta) - rho refined by damped-free Gauss-Newton.
void gauss_newton_betas(const BetaProblem &prob, Eigen::VectorXd &betas) {
    const int nv = static_cast<int>(betas.size());
    const int rows = static_cast<int>(prob.rho.size());
    Eigen::MatrixXd A(rows, nv);
    Eigen::VectorXd b(rows);
    for (int iter = 0; iter < 10; ++iter) {
        for (int r = 0; r < rows; ++r) {
            A.row(r).setZero();
            double fit = 0;
            for (size_t c = 0; c < prob.cols.size(); ++c) {
                const auto [i, j] = prob.cols[c];
                const double l = prob.L(r, static_cast<int>(c));
                fit += l * betas[i] * betas[j];
                if (i == j) {
                    A(r, i) += 2 * l * betas[i];
                } else {
                    A(r, i) += l * betas[j];
                    A(r, j) += l * betas[i];
                }
            }
            b[r] = prob.rho[r] - fit;
        }
        betas += A.colPivHouseholderQr().solve(b);
    }
}

// The classic beta seeds: pick a column subset of L, solve least squares for
// the products, and take consistent square roots.
Eigen::VectorXd solve_product_subset(const BetaProblem &prob, const std::vector<int> &subset) {
    Eigen::MatrixXd Lsub(prob.L.rows(), subset.size());
    for (size_t c = 0; c < subset.size(); ++c) Lsub.col(static_cast<int>(c)) = prob.L.col(subset[c]);
    return Lsub.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(prob.rho);
}

Eigen::VectorXd seed_dim1(const BetaProblem &prob, int nv) {
    const Eigen::VectorXd x = solve_product_subset(prob, {0});  // [B11]
    Eigen::VectorXd betas = Eigen::VectorXd::Zero(nv);
    betas[0] = std::sqrt(std::abs(x[0]));
    return betas;
}

Eigen::VectorXd seed_dim2(const BetaProblem &prob, int nv) {
    const Eigen::VectorXd x = solve_product_subset(prob, {0, 1, 2});  // [B11 B12 B22]
    Eigen::VectorXd betas = Eigen::VectorXd::Zero(nv);
    if (x[0] < 0) {
        betas[0] = std::sqrt(-x[0]);
        betas[1] = x[2] < 0 ? std::sqrt(-x[2]) : 0.0;
    } else {
        betas[0] = std::sqrt(x[0]);
        betas[1] = x[2] > 0 ? std::sqrt(x[2]) : 0.0;
    }
    if (x[1] < 0) betas[0] = -betas[0];
    return betas;
}

Eigen::VectorXd seed_dim3(const BetaProblem &prob, int nv) {
    const Eigen::VectorXd x = solve_product_subset(prob, {0, 1, 2, 3, 4});  // [B11 B12 B22 B13 B23]
    Eigen::VectorXd betas = Eigen::VectorXd::Zero(nv);
    if (x[0] < 0) {
        betas[0] = std::sqrt(-x[0]);
        betas[1] = x[2] < 0 ? std::sqrt(-x[2]) : 0.0;
    } else {
        betas[0] = std::sqrt(x[0]);
        betas[1] = x[2] > 0 ? std::sqrt(x[2]) : 0.0;
    }
    if (x[1] < 0) betas[0] = -betas[0];
    if (betas[0] != 0.0) betas[2] = x[3] / betas[0];
    return betas;
}

// Relinearization-flavored seed: solve [B11 B12 B13 B14] and divide through.
Eigen::VectorXd seed_relin(const BetaProblem &prob, int nv) {
    const Eigen::VectorXd x = solve_product_subset(prob, {0, 1, 3, 6});
    Eigen::VectorXd betas = Eigen::VectorXd::Zero(nv);
    if (x[0] < 0) {
        betas[0] = std::sqrt(-x[0]);
        for (int i = 1; i < 4; ++i) betas[i] = -x[i] / betas[0];
    } else {
        betas[0] = std::sqrt(x[0]);
        for (int i = 1; i < 4; ++i) betas[i] = x[i] / betas[0];
    }
    return betas;
}

// Column of product (i, j), i <= j, in product_columns order.
int product_index(int i, int j) { return j * (j + 1) / 2 + i; }

// Seeds anchored away from the most-null vector. Near the minimal N the
// null space is wider than one dimension and its eigen-ordering carries no
// information, so the true mixture may load on any vector or pair; the
// classic seeds all anchor on component 0 and miss those basins.
std::vector<Eigen::VectorXd> anchored_seeds(const BetaProblem &prob, int nv) {
    std::vector<Eigen::VectorXd> seeds;
    for (int i = 1; i < nv; ++i) {  // i = 0 is seed_dim1
        const Eigen::VectorXd x = solve_product_subset(prob, {product_index(i, i)});
        Eigen::VectorXd b = Eigen::VectorXd::Zero(nv);
        b[i] = std::sqrt(std::abs(x[0]));
        seeds.push_back(b);
    }
    for (int i = 0; i < nv; ++i)
        for (int j = i + 1; j < nv; ++j) {
            if (i == 0 && j == 1) continue;  // that pair is seed_dim2
            const Eigen::VectorXd x = solve_product_subset(
                prob, {product_index(i, i), product_index(i, j), product_index(j, j)});
            Eigen::VectorXd b = Eigen::VectorXd::Zero(nv);
            if (x[0] < 0) {
                b[i] = std::sqrt(-x[0]);
                b[j] = x[2] < 0 ? std::sqrt(-x[2]) : 0.0;
            } else {
                b[i] = std::sqrt(x[0]);
                b[j] = x[2] > 0 ? std::sqrt(x[2]) : 0.0;
            }
            if (x[1] < 0) b[i] = -b[i];
            seeds.push_back(b);
        }
    return seeds;
}

// Every sign combination of the non-lead components (the overall sign is
// normalized away later, so the lead keeps its sign).
void append_sign_variants(std::vector<Eigen::VectorXd> &seeds) {
    const size_t base_count = seeds.size();
    for (size_t s = 0; s < base_count; ++s) {
        const Eigen::VectorXd base = seeds[s];
        const int nv = static_cast<int>(base.size());
        int lead = 0;
        while (lead < nv && base[lead] == 0.0) ++lead;
        for (int mask = 1; mask < (1 << nv); ++mask) {
            if (mask & (1 << lead)) continue;
            Eigen::VectorXd b = base;
            bool differs = false;
            for (int i = 0; i < nv; ++i)
                if (mask & (1 << i)) {
                    b[i] = -b[i];
                    if (b[i] != 0.0) differs = true;
                }
            if (differs) seeds.push_back(b);
        }
    }
}

// Procrustes without scale: rigid transform mapping object points onto the
// reconstructed camera-frame points.
RigidPose align_umeyama(const Eigen::Matrix3Xd &obj, const Eigen::Matrix3Xd &cam) {
    const Eigen::Vector3d mo = obj.rowwise().mean();
    const Eigen::Vector3d mc = cam.rowwise().mean();
    const Eigen::Matrix3d H = (cam.colwise() - mc) * (obj.colwise() - mo).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
    if (R.determinant() < 0) {
        Eigen::Matrix3d U = svd.matrixU();
        U.col(2) *= -1;
        R = U * svd.matrixV().transpose();
    }
    RigidPose pose;
    pose.rotation = Rotation(R);
    pose.translation = mc - R * mo;
    return pose;
}

}  // namespace

ControlPointBasis select_control_points(const CorrespondenceSet &corrs) {
    const int n = static_cast<int>(corrs.size());
    if (n < 4) throw NotEnoughCorrespondences("EPnP needs at least 4 correspondences");

    Eigen::Matrix3Xd pts(3, n);
    for (int i = 0; i < n; ++i) pts.col(i) = corrs[i].point3;
    const Eigen::Vector3d centroid = pts.rowwise().mean();
    const Eigen::Matrix3Xd centered = pts.colwise() - centroid;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(centered * centered.transpose());
    // Ascending eigenvalues; use descending principal axes.
    const Eigen::Vector3d lam = eig.eigenvalues().reverse();
    Eigen::Matrix3d axes;
    for (int i = 0; i < 3; ++i) axes.col(i) = eig.eigenvectors().col(2 - i);

    const double s0 = std::sqrt(std::max(lam[0], 0.0));
    const double s1 = std::sqrt(std::max(lam[1], 0.0));
    const double s2 = std::sqrt(std::max(lam[2], 0.0));
    if (s0 <= 0.0) throw DegenerateGeometry("all 3D points coincide");
    if (s1 < 1e-8 * s0) throw DegenerateGeometry("3D points are collinear");
    const bool planar = s2 < 1e-8 * s0;
    const int k = planar ? 3 : 4;

    ControlPointBasis basis;
    basis.planar = planar;
    basis.control_points.resize(3, k);
    basis.control_points.col(0) = centroid;
    for (int i = 1; i < k; ++i)
        basis.control_points.col(i) = centroid + std::sqrt(lam[i - 1] / n) * axes.col(i - 1);

    // Barycentric rows: solve [c1-c0 ... ] b = X - c0, alpha = (1 - sum b, b).
    const auto offsets = basis.control_points.rightCols(k - 1).colwise() - centroid;
    const auto solver = offsets.householderQr();
    basis.alphas.resize(n, k);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd b = solver.solve(centered.col(i));
        basis.alphas(i, 0) = 1.0 - b.sum();
        basis.alphas.row(i).tail(k - 1) = b.transpose();
    }
    return basis;
}

RigidPose solve_epnp(const CorrespondenceSet &corrs, const PinholeCamera &camera) {
    const int n = static_cast<int>(corrs.size());
    const ControlPointBasis basis = select_control_points(corrs);
    const int k = static_cast<int>(basis.control_points.cols());
    const int nv = k;  // null vectors used = control point count

    const double f = camera.focal_px;
    const double cx = camera.principal_point.x();
    const double cy = camera.principal_point.y();

    // Projection constraints: sum_j a_ij (f x_j + (cx - u_i) z_j) = 0 etc.,
    // rows scaled by sqrt(weight).
    Eigen::MatrixXd M(2 * n, 3 * k);
    for (int i = 0; i < n; ++i) {
        const double s = std::sqrt(std::max(corrs[i].weight, 0.0));
        for (int j = 0; j < k; ++j) {
            const double a = basis.alphas(i, j) * s;
            M(2 * i, 3 * j) = a * f;
            M(2 * i, 3 * j + 1) = 0.0;
            M(2 * i, 3 * j + 2) = a * (cx - corrs[i].point2.x());
            M(2 * i + 1, 3 * j) = 0.0;
            M(2 * i + 1, 3 * j + 1) = a * f;
            M(2 * i + 1, 3 * j + 2) = a * (cy - corrs[i].point2.y());
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M.transpose() * M);
    Eigen::MatrixXd V(3 * k, nv);  // null-space basis, most-null first
    for (int i = 0; i < nv; ++i) V.col(i) = eig.eigenvectors().col(i);

    // Distance constraints between camera-frame control points.
    const auto pairs = control_pairs(k);
    BetaProblem prob;
    prob.cols = product_columns(nv);
    prob.L.resize(pairs.size(), prob.cols.size());
    prob.rho.resize(pairs.size());
    std::vector<Eigen::Matrix3Xd> dv(nv, Eigen::Matrix3Xd(3, pairs.size()));
    for (size_t p = 0; p < pairs.size(); ++p) {
        const auto [a, b] = pairs[p];
        for (int i = 0; i < nv; ++i)
            dv[i].col(p) = V.col(i).segment<3>(3 * a) - V.col(i).segment<3>(3 * b);
        prob.rho[p] = (basis.control_points.col(a) - basis.control_points.col(b)).squaredNorm();
    }
    for (size_t p = 0; p < pairs.size(); ++p)
        for (size_t c = 0; c < prob.cols.size(); ++c) {
            const auto [i, j] = prob.cols[c];
            const double d = dv[i].col(p).dot(dv[j].col(p));
            prob.L(p, c) = (i == j) ? d : 2.0 * d;
        }

    Eigen::Matrix3Xd obj(3, n);
    for (int i = 0; i < n; ++i) obj.col(i) = corrs[i].point3;

    bool have_best = false;
    RigidPose best_pose;
    double best_err = 0;
    auto evaluate = [&](Eigen::VectorXd betas) {
        gauss_newton_betas(prob, betas);

        // Camera-frame control points, then camera-frame 3D points.
        Eigen::Matrix3Xd ccs = Eigen::Matrix3Xd::Zero(3, k);
        for (int i = 0; i < nv; ++i)
            for (int j = 0; j < k; ++j) ccs.col(j) += betas[i] * V.col(i).segment<3>(3 * j);
        Eigen::Matrix3Xd pcs = Eigen::Matrix3Xd::Zero(3, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) pcs.col(i) += basis.alphas(i, j) * ccs.col(j);
        if (pcs.row(2).sum() < 0) pcs = -pcs;  // null vector sign is arbitrary

        const RigidPose pose = align_umeyama(obj, pcs);

        int in_front = 0;
        double err = 0;
        for (int i = 0; i < n; ++i) {
            const Vec3 pc = pose.transform(corrs[i].point3);
            if (pc.z() > kCheiralityEps) {
                ++in_front;
                err += (project(camera, pc) - corrs[i].point2).norm();
            }
        }
        if (2 * in_front <= n) return;  // cheirality must hold for a majority
        err /= in_front;
        if (!have_best || err < best_err) {
            have_best = true;
            best_err = err;
            best_pose = pose;
        }
    };

    std::vector<Eigen::VectorXd> seeds;
    seeds.push_back(seed_dim1(prob, nv));
    seeds.push_back(seed_dim2(prob, nv));
    if (k == 4) {
        seeds.push_back(seed_dim3(prob, nv));
        seeds.push_back(seed_relin(prob, nv));
    }
    for (const Eigen::VectorXd &s : seeds) evaluate(s);

    // The classic cases can leave every Gauss-Newton run on a spurious root of
    // the distance system (they all anchor on the most-null vector, which is an
    // arbitrary choice when the null space is wider than one dimension, as at
    // the minimal n). Unless the fit is already numerically exact, sweep seeds
    // anchored on every null vector and pair, plus sign variants of everything.
    // Bounded work: the beta system does not grow with n.
    const double exact_fit_px = 1e-8 * camera.image_size.norm();
    if (!have_best || best_err > exact_fit_px) {
        std::vector<Eigen::VectorXd> extended = anchored_seeds(prob, nv);
        extended.insert(extended.end(), seeds.begin(), seeds.end());
        append_sign_variants(extended);
        for (const Eigen::VectorXd &s : extended) {
            if (have_best && best_err <= exact_fit_px) break;
            evaluate(s);
        }
    }

    if (!have_best) throw NoValidCandidate("every beta case leaves a majority of points behind the camera");
    return best_pose;
}

}  // namespace pnpf
