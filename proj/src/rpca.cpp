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

#include "simtrack/rpca.hpp"

#include <cmath>
#include <string>

#include "simtrack/errors.hpp"
#include "simtrack/parallel.hpp"

namespace simtrack {

void ObservationMatrix::validate() const {
    if (frame_height <= 0 || frame_width <= 0) {
        throw InvalidArgument("frame dimensions must be positive");
    }
    if (data.rows() != static_cast<Eigen::Index>(frame_height) * frame_width) {
        throw InvalidArgument("observation rows != frame_height * frame_width");
    }
    if (data.cols() < 2) throw InvalidArgument("need at least K = 2 frames");
    if (!timestamps.empty() && static_cast<Eigen::Index>(timestamps.size()) != data.cols()) {
        throw InvalidArgument("timestamp count != frame count");
    }
    if (!data.allFinite()) throw InvalidArgument("observation matrix has non-finite entries");
}

ObservationMatrix ObservationMatrix::from_frames(const std::vector<Eigen::MatrixXd>& frames,
                                                 const std::vector<double>& timestamps) {
    if (frames.size() < 2) throw InvalidArgument("need at least 2 frames");
    ObservationMatrix out;
    out.frame_height = static_cast<int>(frames.front().rows());
    out.frame_width = static_cast<int>(frames.front().cols());
    out.timestamps = timestamps;
    const Eigen::Index n = frames.front().size();
    out.data.resize(n, static_cast<Eigen::Index>(frames.size()));
    for (std::size_t k = 0; k < frames.size(); ++k) {
        if (frames[k].rows() != out.frame_height || frames[k].cols() != out.frame_width) {
            throw InvalidArgument("frame " + std::to_string(k) + " has inconsistent dimensions");
        }
        out.data.col(static_cast<Eigen::Index>(k)) = frames[k].reshaped();
    }
    out.validate();
    return out;
}

std::vector<Eigen::MatrixXd> ObservationMatrix::unstack(const Eigen::MatrixXd& m) const {
    std::vector<Eigen::MatrixXd> frames(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
        frames[static_cast<std::size_t>(k)] = m.col(k).reshaped(frame_height, frame_width);
    }
    return frames;
}

void RpcaParams::validate() const {
    if (!(tau > 0.0)) throw InvalidArgument("rpca tau must be > 0");
    if (!(lambda > 0.0)) throw InvalidArgument("rpca lambda must be > 0");
    if (!(rho > 1.0)) throw InvalidArgument("rpca rho must be > 1");
    if (!(beta0 > 0.0)) throw InvalidArgument("rpca beta0 must be > 0");
    if (max_iters < 1) throw InvalidArgument("rpca max_iters must be >= 1");
    if (!(tol > 0.0)) throw InvalidArgument("rpca tol must be > 0");
}

RpcaParams RpcaParams::defaults_for(const Eigen::Ref<const Eigen::MatrixXd>& x) {
    RpcaParams p;
    p.tau = 1.0 / std::sqrt(static_cast<double>(std::max(x.rows(), x.cols())));
    p.lambda = 100.0 * p.tau;
    const double sigma1 = x.squaredNorm() > 0.0
                              ? Eigen::BDCSVD<Eigen::MatrixXd>(x).singularValues()(0)
                              : 1.0;
    p.beta0 = 1.25 / (sigma1 > 0.0 ? sigma1 : 1.0);
    return p;
}

Eigen::MatrixXd svt(const Eigen::Ref<const Eigen::MatrixXd>& m, double tau) {
    if (tau < 0.0) throw InvalidArgument("svt tau must be >= 0");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw SvdFailure("BDCSVD did not converge");
    Eigen::VectorXd sv = (svd.singularValues().array() - tau).max(0.0);
    return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

RpcaResult rpca_admm(const Eigen::Ref<const Eigen::MatrixXd>& x, const RpcaParams& params) {
    params.validate();
    if (x.size() == 0) throw InvalidArgument("rpca input is empty");
    if (!x.allFinite()) throw InvalidArgument("rpca input has non-finite entries");

    const double xnorm = x.norm();
    RpcaResult r;
    r.low_rank = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    r.sparse = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    r.error = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    r.multipliers = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    r.residual_history.reserve(static_cast<std::size_t>(params.max_iters));

    double beta = params.beta0;
    for (int k = 0; k < params.max_iters; ++k) {
        r.low_rank = svt(x - r.error - r.sparse + r.multipliers / beta, 1.0 / beta);
        r.sparse = soft_threshold(
            (x - r.error + r.multipliers / beta - r.low_rank).eval(), params.tau / beta);
        r.error = (x - r.low_rank - r.sparse + r.multipliers / beta) / (1.0 + 2.0 * params.lambda / beta);
        const Eigen::MatrixXd feas = x - r.low_rank - r.sparse - r.error;
        r.multipliers += beta * feas;
        beta *= params.rho;
        r.iterations = k + 1;
        const double residual = xnorm > 0.0 ? feas.norm() / xnorm : feas.norm();
        r.residual_history.push_back(residual);
        r.final_residual = residual;
        if (residual <= params.tol) {
            r.converged = true;
            break;
        }
    }
    r.final_beta = beta;
    return r;
}

RpcaResult rpca_admm(const ObservationMatrix& x, const RpcaParams& params) {
    x.validate();
    return rpca_admm(x.data, params);
}

TiledRpcaResult rpca_tiled(const std::vector<Eigen::MatrixXd>& frames, int tile_rows,
                           int tile_cols, const RpcaParams& params, int threads) {
    if (frames.size() < 2) throw InvalidArgument("tiled rpca needs K >= 2 frames");
    if (tile_rows < 1 || tile_cols < 1) throw InvalidArgument("tile grid must be >= 1x1");
    params.validate();

    const int height = static_cast<int>(frames.front().rows());
    const int width = static_cast<int>(frames.front().cols());
    if (tile_rows > height || tile_cols > width) {
        throw InvalidArgument("tile grid exceeds frame dimensions");
    }
    const std::size_t num_frames = frames.size();
    for (const auto& f : frames) {
        if (f.rows() != height || f.cols() != width) {
            throw InvalidArgument("inconsistent frame dimensions in stack");
        }
    }

    const int tile_h = (height + tile_rows - 1) / tile_rows;
    const int tile_w = (width + tile_cols - 1) / tile_cols;
    const int num_tiles = tile_rows * tile_cols;

    TiledRpcaResult out;
    out.tile_rows = tile_rows;
    out.tile_cols = tile_cols;
    out.tile_converged.assign(static_cast<std::size_t>(num_tiles), 0);
    out.sparse_frames.assign(num_frames, Eigen::MatrixXd::Zero(height, width));

    parallel_for(static_cast<std::size_t>(num_tiles), threads, [&](std::size_t idx) {
        const int tr = static_cast<int>(idx) / tile_cols;
        const int tc = static_cast<int>(idx) % tile_cols;
        const int r0 = tr * tile_h;
        const int c0 = tc * tile_w;
        const int h = std::min(tile_h, height - r0);
        const int w = std::min(tile_w, width - c0);
        if (h <= 0 || w <= 0) return;
        try {
            Eigen::MatrixXd tile(static_cast<Eigen::Index>(h) * w, num_frames);
            for (std::size_t k = 0; k < num_frames; ++k) {
                tile.col(static_cast<Eigen::Index>(k)) = frames[k].block(r0, c0, h, w).reshaped();
            }
            RpcaResult res = rpca_admm(tile, params);
            out.tile_converged[idx] = res.converged ? 1 : 0;
            for (std::size_t k = 0; k < num_frames; ++k) {
                out.sparse_frames[k].block(r0, c0, h, w) =
                    res.sparse.col(static_cast<Eigen::Index>(k)).reshaped(h, w);
            }
        } catch (const Error& e) {
            throw TileError("tile (" + std::to_string(tr) + "," + std::to_string(tc) +
                            "): " + e.what());
        }
    });
    return out;
}

}  // namespace simtrack
