// Copyright 2026 The simtrack authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "simtrack/geometry.hpp"

#include <cmath>

#include "simtrack/errors.hpp"

namespace simtrack {

namespace {

constexpr double kDegenerateScale = 1e-12;

// Column-convention projection matrix P = K^T [R^T | T^T]; row h = q*M*K equals (P*q^T)^T.
Eigen::Matrix<double, 3, 4> column_projection(const Eigen::Matrix3d& intrinsic,
                                              const Eigen::Matrix3d& rotation,
                                              const Eigen::RowVector3d& translation) {
    Eigen::Matrix<double, 3, 4> rt;
    rt.leftCols<3>() = rotation.transpose();
    rt.col(3) = translation.transpose();
    return intrinsic.transpose() * rt;
}

PixelPoint pixel_from_homogeneous(const Eigen::RowVector3d& h, const CameraModel& cam) {
    const double w = h(2);
    if (std::abs(w) <= kDegenerateScale) {
        throw DegenerateProjection("homogeneous scale " + std::to_string(w) +
                                   " below 1e-12; point on camera plane");
    }
    if (w < 0.0) {
        throw BehindCamera("homogeneous scale " + std::to_string(w) + " is negative");
    }
    PixelPoint px;
    px.u = h(0) / w;
    px.v = h(1) / w;
    px.in_frame = px.u >= 0.0 && px.u < cam.image_width && px.v >= 0.0 && px.v < cam.image_height;
    return px;
}

double mean_reprojection_error(const std::vector<Correspondence>& cs, const CameraModel& cam) {
    double total = 0.0;
    for (const auto& c : cs) {
        const PixelPoint px = project_world_to_pixel(c.world, cam);
        total += std::hypot(px.u - c.pixel.u, px.v - c.pixel.v);
    }
    return total / static_cast<double>(cs.size());
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
    const double theta = w.norm();
    if (theta < 1e-16) return Eigen::Matrix3d::Identity();
    const Eigen::Vector3d axis = w / theta;
    Eigen::Matrix3d k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Eigen::Matrix3d::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

// Gauss-Newton on (axis-angle delta, translation) minimizing squared pixel residuals.
void refine_extrinsics(const std::vector<Correspondence>& cs, const Eigen::Matrix3d& intrinsic,
                       Eigen::Matrix3d& rotation, Eigen::RowVector3d& translation) {
    const int n = static_cast<int>(cs.size());
    CameraModel cam;
    cam.intrinsic = intrinsic;
    cam.image_width = 0;
    cam.image_height = 0;

    auto residuals = [&](const Eigen::Matrix3d& r, const Eigen::RowVector3d& t, Eigen::VectorXd& out) -> bool {
        out.resize(2 * n);
        cam.rotation = r;
        cam.translation = t;
        for (int i = 0; i < n; ++i) {
            Eigen::RowVector3d h = cs[i].world.row() * cam.rotation + cam.translation;
            h = h * cam.intrinsic;
            if (h(2) <= kDegenerateScale) return false;
            out(2 * i) = h(0) / h(2) - cs[i].pixel.u;
            out(2 * i + 1) = h(1) / h(2) - cs[i].pixel.v;
        }
        return true;
    };

    Eigen::VectorXd r0;
    if (!residuals(rotation, translation, r0)) return;
    double best = r0.squaredNorm();

    for (int iter = 0; iter < 12; ++iter) {
        // numeric Jacobian over 6 parameters
        Eigen::MatrixXd jac(2 * n, 6);
        const double eps = 1e-6;
        for (int p = 0; p < 6; ++p) {
            Eigen::Vector3d dw = Eigen::Vector3d::Zero();
            Eigen::RowVector3d dt = Eigen::RowVector3d::Zero();
            if (p < 3)
                dw(p) = eps;
            else
                dt(p - 3) = eps;
            Eigen::VectorXd rp, rm;
            if (!residuals(rodrigues(dw) * rotation, translation + dt, rp) ||
                !residuals(rodrigues(-dw) * rotation, translation - dt, rm))
                return;
            jac.col(p) = (rp - rm) / (2.0 * eps);
        }
        Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
        Eigen::Matrix<double, 6, 1> jtr = jac.transpose() * r0;
        double damping = 1e-9 * jtj.trace();
        Eigen::Matrix<double, 6, 1> step =
            (jtj + damping * Eigen::Matrix<double, 6, 6>::Identity()).ldlt().solve(-jtr);
        if (!step.allFinite()) return;

        const Eigen::Matrix3d r_new = rodrigues(step.head<3>()) * rotation;
        const Eigen::RowVector3d t_new = translation + step.tail<3>().transpose();
        Eigen::VectorXd r1;
        if (!residuals(r_new, t_new, r1) || r1.squaredNorm() > best) break;
        const double improvement = best - r1.squaredNorm();
        rotation = nearest_rotation(r_new);
        translation = t_new;
        r0 = r1;
        best = r1.squaredNorm();
        if (improvement < 1e-16 * (1.0 + best)) break;
    }
}

}  // namespace

void CameraModel::validate() const {
    const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
                             .cwiseAbs()
                             .maxCoeff();
    if (!(ortho < 1e-9)) {
        throw InvalidArgument("camera rotation is not orthonormal (deviation " +
                              std::to_string(ortho) + ")");
    }
    if (!(intrinsic(0, 0) > 0.0) || !(intrinsic(1, 1) > 0.0)) {
        throw InvalidArgument("camera intrinsic focal entries must be positive");
    }
    if (intrinsic(0, 2) != 0.0 || intrinsic(1, 2) != 0.0 || intrinsic(2, 2) != 1.0) {
        throw InvalidArgument("camera intrinsic last column must be (0,0,1)^T");
    }
    if (image_width <= 0 || image_height <= 0) {
        throw InvalidArgument("camera image dimensions must be positive");
    }
}

PixelPoint project_world_to_pixel(const WorldPoint& p, const CameraModel& cam) {
    Eigen::RowVector4d q;
    q << p.x, p.y, p.z, 1.0;
    Eigen::Matrix<double, 4, 3> rt;
    rt.topRows<3>() = cam.rotation;
    rt.row(3) = cam.translation;
    const Eigen::RowVector3d h = q * rt * cam.intrinsic;
    return pixel_from_homogeneous(h, cam);
}

ExtrinsicCalibration calibrate_extrinsics(const std::vector<Correspondence>& correspondences,
                                          const Eigen::Matrix3d& intrinsic, bool refine) {
    const int n = static_cast<int>(correspondences.size());
    if (n < 6) {
        throw InsufficientCorrespondences("need >= 6 correspondences, got " + std::to_string(n));
    }

    Eigen::MatrixXd a(2 * n, 12);
    for (int i = 0; i < n; ++i) {
        const auto& c = correspondences[i];
        Eigen::RowVector4d q;
        q << c.world.x, c.world.y, c.world.z, 1.0;
        a.row(2 * i).segment<4>(0) = q;
        a.row(2 * i).segment<4>(4).setZero();
        a.row(2 * i).segment<4>(8) = -c.pixel.u * q;
        a.row(2 * i + 1).segment<4>(0).setZero();
        a.row(2 * i + 1).segment<4>(4) = q;
        a.row(2 * i + 1).segment<4>(8) = -c.pixel.v * q;
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    // With a unique solution the nullspace is one-dimensional: sigma_10 must be
    // well separated from zero relative to sigma_0.
    if (sv(10) < 1e-10 * sv(0)) {
        throw RankDeficientGeometry("DLT system rank-deficient (degenerate point geometry)");
    }
    const Eigen::VectorXd pvec = svd.matrixV().col(11);
    Eigen::Matrix<double, 3, 4> proj;
    for (int r = 0; r < 3; ++r) proj.row(r) = pvec.segment<4>(4 * r).transpose();

    // N = K^-T P = [R^T | T^T] up to scale and sign.
    Eigen::Matrix<double, 3, 4> nmat = intrinsic.transpose().partialPivLu().solve(proj);
    Eigen::JacobiSVD<Eigen::Matrix3d> nsvd(nmat.leftCols<3>());
    const double scale = nsvd.singularValues().mean();
    if (!(scale > 1e-12) || nsvd.singularValues()(0) > 1e8 * nsvd.singularValues()(2)) {
        throw RankDeficientGeometry("recovered rotation block is numerically singular");
    }
    nmat /= scale;

    // Fix the global sign so points sit in front of the camera.
    int positive = 0;
    for (const auto& c : correspondences) {
        Eigen::Vector4d q(c.world.x, c.world.y, c.world.z, 1.0);
        if ((nmat.row(2) * q) > 0.0) ++positive;
    }
    if (2 * positive < n) nmat = -nmat;

    ExtrinsicCalibration result;
    result.rotation = nearest_rotation(nmat.leftCols<3>()).transpose();
    result.translation = nmat.col(3).transpose();

    if (refine) refine_extrinsics(correspondences, intrinsic, result.rotation, result.translation);

    CameraModel cam;
    cam.intrinsic = intrinsic;
    cam.rotation = result.rotation;
    cam.translation = result.translation;
    cam.image_width = 0;
    cam.image_height = 0;
    result.mean_reprojection_error_px = mean_reprojection_error(correspondences, cam);
    return result;
}

}  // namespace simtrack
