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

#include <doctest.h>

#include <cmath>

#include "simtrack/errors.hpp"
#include "simtrack/geometry.hpp"
#include "simtrack/rng.hpp"

using namespace simtrack;

namespace {

CameraModel simple_camera(double f, double cu, double cv, int w = 3840, int h = 2160) {
    CameraModel cam;
    cam.intrinsic << f, 0, 0, 0, f, 0, cu, cv, 1;
    cam.rotation.setIdentity();
    cam.translation.setZero();
    cam.image_width = w;
    cam.image_height = h;
    return cam;
}

Eigen::Matrix3d rotation_zyx(double a, double b, double c) {
    Eigen::Matrix3d rz, ry, rx;
    rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    ry << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
    rx << 1, 0, 0, 0, std::cos(c), -std::sin(c), 0, std::sin(c), std::cos(c);
    return rz * ry * rx;
}

}  // namespace

TEST_CASE("optical-axis point maps to the principal point") {
    CameraModel cam = simple_camera(1000.0, 1920.0, 1080.0);
    PixelPoint px = project_world_to_pixel({0.0, 0.0, 10.0}, cam);
    CHECK(px.u == doctest::Approx(1920.0).epsilon(1e-12));
    CHECK(px.v == doctest::Approx(1080.0).epsilon(1e-12));
    CHECK(px.in_frame);
}

TEST_CASE("hand-computed projection of (1, 0, 100)") {
    CameraModel cam = simple_camera(1000.0, 1920.0, 1080.0);
    PixelPoint px = project_world_to_pixel({1.0, 0.0, 100.0}, cam);
    CHECK(px.u == doctest::Approx(1930.0).epsilon(1e-12));
    CHECK(px.v == doctest::Approx(1080.0).epsilon(1e-12));
}

TEST_CASE("point behind the camera raises BehindCamera") {
    CameraModel cam = simple_camera(1000.0, 1920.0, 1080.0);
    CHECK_THROWS_AS(project_world_to_pixel({0.0, 0.0, -5.0}, cam), BehindCamera);
}

TEST_CASE("point on the camera plane raises DegenerateProjection") {
    CameraModel cam = simple_camera(1000.0, 1920.0, 1080.0);
    CHECK_THROWS_AS(project_world_to_pixel({1.0, 2.0, 0.0}, cam), DegenerateProjection);
}

TEST_CASE("projection is invariant to homogeneous rescale") {
    CameraModel cam = simple_camera(800.0, 640.0, 360.0, 1280, 720);
    cam.rotation = rotation_zyx(0.3, -0.2, 0.1);
    cam.translation << 5.0, -2.0, 40.0;
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        WorldPoint p{rng.next_gauss() * 10, rng.next_gauss() * 10, 30 + rng.next_double() * 50};
        PixelPoint a = project_world_to_pixel(p, cam);
        Eigen::RowVector4d q;
        q << p.x, p.y, p.z, 1.0;
        Eigen::Matrix<double, 4, 3> rt;
        rt.topRows<3>() = cam.rotation;
        rt.row(3) = cam.translation;
        const double lambda = 1.0 + rng.next_double() * 9.0;
        Eigen::RowVector3d h = lambda * (q * rt * cam.intrinsic);
        CHECK(h(0) / h(2) == doctest::Approx(a.u).epsilon(1e-12));
        CHECK(h(1) / h(2) == doctest::Approx(a.v).epsilon(1e-12));
    }
}

TEST_CASE("noiseless extrinsic calibration round-trips") {
    CameraModel cam = simple_camera(1200.0, 960.0, 540.0, 1920, 1080);
    cam.rotation = rotation_zyx(0.2, 0.15, -0.1);
    cam.translation << 2.0, -1.0, 60.0;

    Rng rng(42);
    std::vector<Correspondence> cs;
    for (int i = 0; i < 20; ++i) {
        WorldPoint p{rng.next_gauss() * 20, rng.next_gauss() * 20, rng.next_gauss() * 15};
        cs.push_back({p, project_world_to_pixel(p, cam)});
    }
    ExtrinsicCalibration calib = calibrate_extrinsics(cs, cam.intrinsic);
    CHECK((calib.rotation - cam.rotation).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((calib.translation - cam.translation).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(calib.mean_reprojection_error_px < 1e-6);
    const double ortho =
        (calib.rotation.transpose() * calib.rotation - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff();
    CHECK(ortho < 1e-9);
}

TEST_CASE("calibration under 0.5 px noise keeps mean reprojection under 1 px") {
    CameraModel cam = simple_camera(1200.0, 960.0, 540.0, 1920, 1080);
    cam.rotation = rotation_zyx(-0.1, 0.25, 0.05);
    cam.translation << -3.0, 2.0, 80.0;

    double total = 0.0;
    const int seeds = 20;
    for (int seed = 0; seed < seeds; ++seed) {
        Rng rng(1000 + seed);
        std::vector<Correspondence> cs;
        for (int i = 0; i < 30; ++i) {
            WorldPoint p{rng.next_gauss() * 25, rng.next_gauss() * 25, rng.next_gauss() * 20};
            PixelPoint px = project_world_to_pixel(p, cam);
            px.u += 0.5 * rng.next_gauss();
            px.v += 0.5 * rng.next_gauss();
            cs.push_back({p, px});
        }
        total += calibrate_extrinsics(cs, cam.intrinsic).mean_reprojection_error_px;
    }
    CHECK(total / seeds <= 1.0);
}

TEST_CASE("too few correspondences raise InsufficientCorrespondences") {
    CameraModel cam = simple_camera(1000.0, 640.0, 360.0, 1280, 720);
    std::vector<Correspondence> cs(4);
    CHECK_THROWS_AS(calibrate_extrinsics(cs, cam.intrinsic), InsufficientCorrespondences);
}

TEST_CASE("collinear points raise RankDeficientGeometry") {
    CameraModel cam = simple_camera(1000.0, 640.0, 360.0, 1280, 720);
    cam.translation << 0, 0, 50;
    std::vector<Correspondence> cs;
    for (int i = 0; i < 8; ++i) {
        WorldPoint p{static_cast<double>(i), 0.0, 0.0};
        cs.push_back({p, project_world_to_pixel(p, cam)});
    }
    CHECK_THROWS_AS(calibrate_extrinsics(cs, cam.intrinsic), RankDeficientGeometry);
}

TEST_CASE("camera validation rejects bad intrinsics and rotations") {
    CameraModel cam = simple_camera(1000.0, 640.0, 360.0, 1280, 720);
    CHECK_NOTHROW(cam.validate());
    CameraModel bad = cam;
    bad.intrinsic(0, 2) = 0.5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cam;
    bad.rotation(0, 0) = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = cam;
    bad.intrinsic(1, 1) = -2.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
