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
#include "simtrack/rng.hpp"
#include "simtrack/rpca.hpp"

using namespace simtrack;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) m(r, c) = rng.next_gauss();
    }
    return m;
}

struct Planted {
    Eigen::MatrixXd x;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> support;
};

Planted planted_stack(Rng& rng, int n, int k) {
    Eigen::VectorXd u1(n), u2(n), v1(k), v2(k);
    for (int i = 0; i < n; ++i) {
        u1(i) = std::sin(0.03 * i) + 1.5;
        u2(i) = std::cos(0.011 * i + 0.4);
    }
    for (int j = 0; j < k; ++j) {
        v1(j) = 0.5 + 0.002 * j;
        v2(j) = 0.3 * std::sin(0.05 * j);
    }
    Eigen::MatrixXd low = u1 * v1.transpose() + u2 * v2.transpose();
    low = 0.45 * low / low.cwiseAbs().maxCoeff() + Eigen::MatrixXd::Constant(n, k, 0.3);
    Planted p;
    p.support.setConstant(n, k, false);
    Eigen::MatrixXd sparse = Eigen::MatrixXd::Zero(n, k);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            if (rng.next_double() < 0.05) {
                sparse(i, j) = rng.next_double() < 0.5 ? -0.5 : 0.5;
                p.support(i, j) = true;
            }
        }
    }
    Eigen::MatrixXd noise = 0.005 * random_matrix(rng, n, k);
    p.x = low + sparse + noise;
    return p;
}

double support_f1(const Eigen::MatrixXd& s_hat,
                  const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& support,
                  double thresh = 0.1) {
    int tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < s_hat.rows(); ++i) {
        for (int j = 0; j < s_hat.cols(); ++j) {
            const bool hat = std::abs(s_hat(i, j)) > thresh;
            tp += hat && support(i, j);
            fp += hat && !support(i, j);
            fn += !hat && support(i, j);
        }
    }
    return 2.0 * tp / (2.0 * tp + fp + fn);
}

}  // namespace

TEST_CASE("soft threshold matches the definition at simple values") {
    Eigen::MatrixXd m(1, 2);
    m << 3.0, -1.0;
    Eigen::MatrixXd out = soft_threshold(m, 1.0);
    CHECK(out(0, 0) == doctest::Approx(2.0));
    CHECK(out(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("soft threshold with alpha 0 is the identity") {
    Rng rng(3);
    Eigen::MatrixXd m = random_matrix(rng, 4, 6);
    CHECK((soft_threshold(m, 0.0) - m).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("soft threshold matches an elementwise brute-force oracle") {
    Rng rng(7);
    Eigen::MatrixXd m = random_matrix(rng, 5, 5);
    const double alpha = 0.3;
    Eigen::MatrixXd out = soft_threshold(m, alpha);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            const double x = m(i, j);
            const double expect = (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0)) *
                                  std::max(std::abs(x) - alpha, 0.0);
            CHECK(out(i, j) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("svt shrinks a diagonal matrix's singular values") {
    Eigen::MatrixXd m = Eigen::Vector3d(5.0, 2.0, 0.5).asDiagonal();
    Eigen::MatrixXd out = svt(m, 1.0);
    Eigen::MatrixXd expect = Eigen::Vector3d(4.0, 1.0, 0.0).asDiagonal();
    CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("svt with tau 0 reconstructs the input") {
    Rng rng(9);
    Eigen::MatrixXd m = random_matrix(rng, 7, 4);
    CHECK((svt(m, 0.0) - m).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("svt at tau = sigma_2 drops to rank one") {
    Rng rng(13);
    // random rank-3 8x6 via outer products, singular values from oracle SVD
    Eigen::MatrixXd m = random_matrix(rng, 8, 3) * random_matrix(rng, 3, 6);
    Eigen::JacobiSVD<Eigen::MatrixXd> oracle(m);
    const double sigma2 = oracle.singularValues()(1);
    Eigen::MatrixXd out = svt(m, sigma2);
    Eigen::JacobiSVD<Eigen::MatrixXd> check(out);
    CHECK(check.singularValues()(0) > 1e-9);
    for (int i = 1; i < check.singularValues().size(); ++i) {
        CHECK(check.singularValues()(i) < 1e-9);
    }
}

TEST_CASE("zero input is a one-iteration fixed point") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(12, 4);
    RpcaParams p;
    p.tau = 0.5;
    p.lambda = 50.0;
    p.beta0 = 1.0;
    RpcaResult r = rpca_admm(x, p);
    CHECK(r.iterations == 1);
    CHECK(r.converged);
    CHECK(r.final_residual == doctest::Approx(0.0));
    CHECK(r.low_rank.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(r.sparse.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(r.error.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("planted low-rank plus sparse stack is recovered") {
    Rng rng(42);
    Planted p = planted_stack(rng, 400, 60);
    RpcaParams params = RpcaParams::defaults_for(p.x);
    RpcaResult r = rpca_admm(p.x, params);
    CHECK(r.converged);
    CHECK(r.iterations <= 300);
    CHECK(r.final_residual <= params.tol);
    CHECK(support_f1(r.sparse, p.support) >= 0.95);

    SUBCASE("objective beats the feasible corners") {
        auto objective = [&](const Eigen::MatrixXd& l, const Eigen::MatrixXd& s,
                             const Eigen::MatrixXd& e) {
            Eigen::BDCSVD<Eigen::MatrixXd> svd(l);
            return svd.singularValues().sum() + params.tau * s.cwiseAbs().sum() +
                   params.lambda * e.squaredNorm();
        };
        const double at_solution = objective(r.low_rank, r.sparse, r.error);
        const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(p.x.rows(), p.x.cols());
        CHECK(at_solution <= objective(p.x, zero, zero));
        CHECK(at_solution <= objective(zero, p.x, zero));
    }

    SUBCASE("feasibility residual tail is non-increasing") {
        const auto& h = r.residual_history;
        REQUIRE(h.size() >= 10);
        for (std::size_t i = h.size() - 10; i + 1 < h.size(); ++i) {
            CHECK(h[i + 1] <= h[i] * (1.0 + 1e-12));
        }
    }

    SUBCASE("beta grows exactly geometrically") {
        double beta = params.beta0;
        for (int k = 0; k < r.iterations; ++k) beta *= params.rho;
        CHECK(r.final_beta == beta);
    }
}

TEST_CASE("first-iteration updates minimize their subproblems") {
    // With the documented zero initialization the first iteration's subproblem
    // targets are known in closed form; random perturbations must not improve
    // any of them.
    Rng rng(5);
    for (int instance = 0; instance < 4; ++instance) {
        const int n = 8 + static_cast<int>(rng.next_u64() % 12);
        const int k = 2 + static_cast<int>(rng.next_u64() % 4);
        Eigen::MatrixXd x = random_matrix(rng, n, k);
        RpcaParams p;
        p.tau = 0.2;
        p.lambda = 3.0;
        p.beta0 = 0.7;
        p.max_iters = 1;
        RpcaResult r = rpca_admm(x, p);
        const double beta = p.beta0;

        Eigen::BDCSVD<Eigen::MatrixXd> svd_l(r.low_rank);
        auto f_l = [&](const Eigen::MatrixXd& l) {
            Eigen::BDCSVD<Eigen::MatrixXd> s(l);
            return s.singularValues().sum() + beta / 2.0 * (l - x).squaredNorm();
        };
        auto f_s = [&](const Eigen::MatrixXd& s) {
            const Eigen::MatrixXd target = x - r.low_rank;
            return p.tau * s.cwiseAbs().sum() + beta / 2.0 * (s - target).squaredNorm();
        };
        auto f_e = [&](const Eigen::MatrixXd& e) {
            const Eigen::MatrixXd target = x - r.low_rank - r.sparse;
            return p.lambda * e.squaredNorm() + beta / 2.0 * (e - target).squaredNorm();
        };
        const double base_l = f_l(r.low_rank);
        const double base_s = f_s(r.sparse);
        const double base_e = f_e(r.error);
        for (int trial = 0; trial < 100; ++trial) {
            Eigen::MatrixXd d = 1e-3 * random_matrix(rng, n, k);
            CHECK(f_l(r.low_rank + d) >= base_l - 1e-10);
            CHECK(f_s(r.sparse + d) >= base_s - 1e-10);
            CHECK(f_e(r.error + d) >= base_e - 1e-10);
        }
    }
}

TEST_CASE("identical inputs give bit-identical results") {
    Rng rng(77);
    Planted p = planted_stack(rng, 100, 12);
    RpcaParams params = RpcaParams::defaults_for(p.x);
    RpcaResult a = rpca_admm(p.x, params);
    RpcaResult b = rpca_admm(p.x, params);
    CHECK(a.iterations == b.iterations);
    CHECK((a.sparse - b.sparse).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.low_rank - b.low_rank).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("1x1 tiling is identical to the full decomposition") {
    Rng rng(19);
    std::vector<Eigen::MatrixXd> frames;
    for (int k = 0; k < 6; ++k) frames.push_back(0.3 * random_matrix(rng, 10, 8));
    ObservationMatrix om = ObservationMatrix::from_frames(frames, {});
    RpcaParams params = RpcaParams::defaults_for(om.data);
    RpcaResult full = rpca_admm(om.data, params);
    TiledRpcaResult tiled = rpca_tiled(frames, 1, 1, params, 1);
    auto full_frames = om.unstack(full.sparse);
    for (int k = 0; k < 6; ++k) {
        CHECK((tiled.sparse_frames[k] - full_frames[k]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("a spike confined to one tile leaves other tiles empty") {
    std::vector<Eigen::MatrixXd> frames;
    for (int k = 0; k < 8; ++k) {
        Eigen::MatrixXd f = Eigen::MatrixXd::Constant(12, 12, 0.4);
        if (k >= 2 && k < 6) f(2 + k, 2) = 0.9;  // moving spike in the top-left tile
        frames.push_back(f);
    }
    RpcaParams params = RpcaParams::defaults_for(ObservationMatrix::from_frames(frames, {}).data);
    TiledRpcaResult tiled = rpca_tiled(frames, 2, 2, params, 2);
    for (int k = 0; k < 8; ++k) {
        CHECK(tiled.sparse_frames[k].block(0, 6, 12, 6).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(tiled.sparse_frames[k].block(6, 0, 6, 6).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("2x2 and 4x4 tilings both recover the planted support") {
    Rng rng(23);
    Planted p = planted_stack(rng, 400, 30);
    std::vector<Eigen::MatrixXd> frames;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> support(20, 20 * 30);
    for (int k = 0; k < 30; ++k) {
        frames.push_back(p.x.col(k).reshaped(20, 20));
    }
    RpcaParams params;
    params.tau = 1.0 / std::sqrt(400.0);
    params.lambda = 100.0 * params.tau;
    params.beta0 = RpcaParams::defaults_for(p.x).beta0;
    for (int grid : {2, 4}) {
        TiledRpcaResult tiled = rpca_tiled(frames, grid, grid, params, 2);
        Eigen::MatrixXd s_stacked(400, 30);
        for (int k = 0; k < 30; ++k) s_stacked.col(k) = tiled.sparse_frames[k].reshaped();
        CHECK(support_f1(s_stacked, p.support) >= 0.9);
    }
}

TEST_CASE("tiled output does not depend on thread count") {
    Rng rng(31);
    std::vector<Eigen::MatrixXd> frames;
    for (int k = 0; k < 5; ++k) frames.push_back(0.2 * random_matrix(rng, 16, 12));
    RpcaParams params = RpcaParams::defaults_for(ObservationMatrix::from_frames(frames, {}).data);
    TiledRpcaResult a = rpca_tiled(frames, 2, 3, params, 1);
    TiledRpcaResult b = rpca_tiled(frames, 2, 3, params, 8);
    for (int k = 0; k < 5; ++k) {
        CHECK((a.sparse_frames[k] - b.sparse_frames[k]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("parameter validation") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 4);
    RpcaParams p;
    CHECK_THROWS_AS(rpca_admm(x, p), InvalidArgument);  // unset tau/lambda/beta0
    p = RpcaParams::defaults_for(x);
    p.rho = 1.0;
    CHECK_THROWS_AS(rpca_admm(x, p), InvalidArgument);
}
