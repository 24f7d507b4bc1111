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

#include <fstream>

#include "helpers.hpp"
#include "simtrack/eo_detection.hpp"
#include "simtrack/errors.hpp"
#include "simtrack/rng.hpp"

using namespace simtrack;

namespace {

void add_blob(Eigen::MatrixXd& frame, double u, double v, double amp, double sigma) {
    for (int r = 0; r < frame.rows(); ++r) {
        for (int c = 0; c < frame.cols(); ++c) {
            const double d2 = (r - v) * (r - v) + (c - u) * (c - u);
            frame(r, c) += amp * std::exp(-0.5 * d2 / (sigma * sigma));
        }
    }
}

}  // namespace

TEST_CASE("all-zero frame yields no detections") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(16, 16);
    CHECK(extract_detections(s, 0.0, Contrast::positive, {}).empty());
}

TEST_CASE("a 3x3 unit block becomes one detection at its centroid") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(20, 20);
    s.block(5, 7, 3, 3).setConstant(1.0);
    MaskParams p;
    p.min_area = 1;
    auto dets = extract_detections(s, 1.5, Contrast::positive, p);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].area == 9);
    CHECK(dets[0].u == doctest::Approx(8.0));
    CHECK(dets[0].v == doctest::Approx(6.0));
    CHECK(dets[0].t == doctest::Approx(1.5));
    CHECK(dets[0].score == doctest::Approx(1.0));
    CHECK(dets[0].source == DetectionSource::eo_rpca);
}

TEST_CASE("two planted blobs are recovered near their centroids") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(40, 40);
    add_blob(s, 12.3, 20.6, 0.8, 1.3);
    add_blob(s, 17.3, 20.6, 0.8, 1.3);  // 5 px apart
    MaskParams p;
    auto dets = extract_detections(s, 0.0, Contrast::positive, p);
    REQUIRE(dets.size() == 2);
    CHECK(std::abs(dets[0].u - 12.3) < 0.5);
    CHECK(std::abs(dets[1].u - 17.3) < 0.5);
    CHECK(std::abs(dets[0].v - 20.6) < 0.5);
}

TEST_CASE("constant nonzero frame raises DegenerateFrame") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Constant(8, 8, 0.25);
    CHECK_THROWS_AS(extract_detections(s, 0.0, Contrast::positive, {}), DegenerateFrame);
}

TEST_CASE("raising k_sigma never increases the detection count") {
    Rng rng(4);
    Eigen::MatrixXd s(32, 32);
    for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) s(r, c) = 0.02 * rng.next_gauss();
    }
    add_blob(s, 10, 10, 0.5, 1.0);
    add_blob(s, 24, 20, 0.3, 1.0);
    MaskParams p;
    p.abs_floor = 0.0;
    std::size_t last = std::numeric_limits<std::size_t>::max();
    for (double k : {1.0, 2.0, 3.0, 5.0, 8.0}) {
        p.k_sigma = k;
        const std::size_t n = extract_detections(s, 0.0, Contrast::positive, p).size();
        CHECK(n <= last);
        last = n;
    }
}

TEST_CASE("negative extraction of -S mirrors positive extraction of S") {
    Rng rng(8);
    Eigen::MatrixXd s(24, 24);
    for (int r = 0; r < 24; ++r) {
        for (int c = 0; c < 24; ++c) s(r, c) = 0.01 * rng.next_gauss();
    }
    add_blob(s, 8.2, 14.9, 0.6, 1.2);
    MaskParams p;
    auto pos = extract_detections(s, 0.0, Contrast::positive, p);
    auto neg = extract_detections(-s, 0.0, Contrast::negative, p);
    REQUIRE(pos.size() == neg.size());
    for (std::size_t i = 0; i < pos.size(); ++i) {
        CHECK(pos[i].u == doctest::Approx(neg[i].u));
        CHECK(pos[i].v == doctest::Approx(neg[i].v));
        CHECK(pos[i].area == neg[i].area);
        CHECK(pos[i].score == doctest::Approx(neg[i].score));
    }
}

TEST_CASE("fusing with an empty list is the identity") {
    Detection2D d;
    d.t = 1.0;
    d.u = 5.0;
    d.v = 6.0;
    d.score = 2.0;
    auto fused = fuse_contrast_detections({d}, {}, 5.0);
    REQUIRE(fused.size() == 1);
    CHECK(fused[0].u == doctest::Approx(5.0));
}

TEST_CASE("identical detections in both lists collapse to one") {
    Detection2D d;
    d.t = 1.0;
    d.u = 5.0;
    d.v = 6.0;
    d.score = 2.0;
    auto fused = fuse_contrast_detections({d}, {d}, 5.0);
    CHECK(fused.size() == 1);
}

TEST_CASE("close opposite-contrast pair keeps the higher score") {
    Detection2D a;
    a.t = 0.0;
    a.u = 10.0;
    a.v = 10.0;
    a.score = 1.0;
    a.contrast = Contrast::positive;
    Detection2D b = a;
    b.u = 12.0;
    b.score = 3.0;
    b.contrast = Contrast::negative;
    auto fused = fuse_contrast_detections({a}, {b}, 5.0);
    REQUIRE(fused.size() == 1);
    CHECK(fused[0].score == doctest::Approx(3.0));
    CHECK(fused[0].contrast == Contrast::negative);
}

TEST_CASE("fusion of a list with itself equals its dedup") {
    Rng rng(10);
    std::vector<Detection2D> xs;
    for (int i = 0; i < 12; ++i) {
        Detection2D d;
        d.t = 0.0;
        d.u = 40.0 * rng.next_double();
        d.v = 40.0 * rng.next_double();
        d.score = rng.next_double();
        xs.push_back(d);
    }
    auto once = fuse_contrast_detections(xs, {}, 4.0);
    auto twice = fuse_contrast_detections(xs, xs, 4.0);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(once[i].u == doctest::Approx(twice[i].u));
        CHECK(once[i].v == doctest::Approx(twice[i].v));
    }
}

TEST_CASE("external detection ingestion") {
    test::TempDir dir("ext_dets");

    SUBCASE("empty file yields empty list") {
        std::ofstream(dir.file("e.csv")) << "t,u,v,score,label\n";
        auto out = ingest_external_detections(dir.file("e.csv"), 640, 480);
        CHECK(out.detections.empty());
        CHECK(out.rejected == 0);
    }

    SUBCASE("well-formed row parses with matching fields") {
        std::ofstream(dir.file("one.csv")) << "t,u,v,score,label\n1.5,100.25,200,0.9,Mavic\n";
        auto out = ingest_external_detections(dir.file("one.csv"), 640, 480);
        REQUIRE(out.detections.size() == 1);
        const auto& d = out.detections[0];
        CHECK(d.t == doctest::Approx(1.5));
        CHECK(d.u == doctest::Approx(100.25));
        CHECK(d.v == doctest::Approx(200.0));
        CHECK(d.score == doctest::Approx(0.9));
        CHECK(d.label == "Mavic");
        CHECK(d.source == DetectionSource::eo_external);
    }

    SUBCASE("out-of-frame rows are rejected and counted") {
        std::ofstream(dir.file("r.csv")) << "t,u,v,score\n0,-5,10,1\n0,10,10,1\n";
        auto out = ingest_external_detections(dir.file("r.csv"), 640, 480);
        CHECK(out.detections.size() == 1);
        CHECK(out.rejected == 1);
    }

    SUBCASE("malformed rows raise ParseError with the line number") {
        std::ofstream(dir.file("bad.csv")) << "t,u,v,score\n0,10,10,1\n0,oops,3,1\n";
        try {
            ingest_external_detections(dir.file("bad.csv"), 640, 480);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
}
