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

#pragma once

#include <Eigen/Dense>
#include <vector>

namespace simtrack {

/// Elementwise shrinkage sign(x) * max(|x| - alpha, 0).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> soft_threshold(
    const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar alpha) {
    using Scalar = typename Derived::Scalar;
    return m.array().sign() * (m.array().abs() - alpha).max(Scalar(0));
}

/// Singular value soft-thresholding U * diag((sigma_i - tau)_+) * V^T.
/// Throws SvdFailure if the decomposition does not converge.
Eigen::MatrixXd svt(const Eigen::Ref<const Eigen::MatrixXd>& m, double tau);

/// Stack of K vectorized frames, one frame per column, intensities in [0, 1].
struct ObservationMatrix {
    Eigen::MatrixXd data;  // (frame_height * frame_width) x K, column-major frame stacking
    int frame_height = 0;
    int frame_width = 0;
    std::vector<double> timestamps;

    void validate() const;

    static ObservationMatrix from_frames(const std::vector<Eigen::MatrixXd>& frames,
                                         const std::vector<double>& timestamps);
    std::vector<Eigen::MatrixXd> unstack(const Eigen::MatrixXd& m) const;
};

struct RpcaParams {
    double tau = 0.0;     // sparsity penalty
    double lambda = 0.0;  // dense-error penalty
    double rho = 1.1;     // penalty growth, > 1
    double beta0 = 0.0;   // initial penalty, > 0
    int max_iters = 300;
    double tol = 1e-6;  // relative residual ||X-L-S-E||_F / ||X||_F

    void validate() const;

    /// tau = 1/sqrt(max(N, K)), lambda = 100*tau, beta0 = 1.25/sigma_1(X).
    /// These are conventional choices; the source text leaves them open.
    static RpcaParams defaults_for(const Eigen::Ref<const Eigen::MatrixXd>& x);
};

struct RpcaResult {
    Eigen::MatrixXd low_rank;
    Eigen::MatrixXd sparse;
    Eigen::MatrixXd error;
    Eigen::MatrixXd multipliers;
    int iterations = 0;
    double final_residual = 0.0;
    double final_beta = 0.0;
    bool converged = false;
    std::vector<double> residual_history;
};

/// ADMM on min ||L||_* + tau ||S||_1 + lambda ||E||_F^2  s.t.  X = L + S + E.
/// Updates per iteration, starting from L = S = E = Y = 0:
///   L <- svt(X - E - S + Y/beta, 1/beta)
///   S <- shrink(X - E + Y/beta - L, tau/beta)
///   E <- (X - L - S + Y/beta) / (1 + 2 lambda / beta)
///   Y <- Y + beta (X - L - S - E);  beta <- rho * beta
/// Returns with converged=false after max_iters if tol was not met.
RpcaResult rpca_admm(const Eigen::Ref<const Eigen::MatrixXd>& x, const RpcaParams& params);
RpcaResult rpca_admm(const ObservationMatrix& x, const RpcaParams& params);

struct TiledRpcaResult {
    std::vector<Eigen::MatrixXd> sparse_frames;
    std::vector<unsigned char> tile_converged;  // row-major tile order
    int tile_rows = 0;
    int tile_cols = 0;
};

/// Decomposes each tile of the frame grid independently with identical params
/// and reassembles the per-frame sparse component. Tiles run concurrently;
/// the merge is a deterministic gather keyed by tile index, so the output does
/// not depend on thread count.
TiledRpcaResult rpca_tiled(const std::vector<Eigen::MatrixXd>& frames, int tile_rows,
                           int tile_cols, const RpcaParams& params, int threads = 0);

}  // namespace simtrack
