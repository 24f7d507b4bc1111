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

#include "simtrack/hungarian.hpp"

#include <algorithm>
#include <cmath>

#include "simtrack/errors.hpp"

namespace simtrack {

namespace {

constexpr double kForbidden = 1e30;   // gated-out pairing
constexpr double kUnassigned = 1e12;  // dummy slot: leaving a row/col unmatched

// Kuhn-Munkres with potentials on a square matrix, O(n^3). Returns the column
// matched to each row.
std::vector<int> solve_square(const std::vector<std::vector<double>>& a) {
    const int n = static_cast<int>(a.size());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, n), way(n + 1, n);
    for (int i = 0; i < n; ++i) {
        p[n] = i;
        int j0 = n;
        std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = std::numeric_limits<double>::infinity();
            int j1 = n;
            for (int j = 0; j < n; ++j) {
                if (used[j]) continue;
                const double cur = a[i0][j] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != n);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != n);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 0; j < n; ++j) {
        if (p[j] < n) row_to_col[p[j]] = j;
    }
    return row_to_col;
}

struct Padded {
    std::vector<std::vector<double>> a;
    int rows, cols;
};

// Square padding: real block top-left, per-row and per-col dummy diagonals so
// any row/col may stay unassigned at a fixed (large) price. Cardinality then
// dominates the optimum.
Padded pad(const Eigen::Ref<const Eigen::MatrixXd>& cost, double gate) {
    const int rows = static_cast<int>(cost.rows());
    const int cols = static_cast<int>(cost.cols());
    const int n = rows + cols;
    Padded out{std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)), rows, cols};
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double v = cost(r, c);
            out.a[r][c] = (std::isfinite(v) && v <= gate) ? v : kForbidden;
        }
        for (int d = 0; d < rows; ++d) out.a[r][cols + d] = (d == r) ? kUnassigned : kForbidden;
    }
    for (int d = 0; d < cols; ++d) {
        for (int c = 0; c < cols; ++c) out.a[rows + d][c] = (c == d) ? kUnassigned : kForbidden;
        for (int e = 0; e < rows; ++e) out.a[rows + d][cols + e] = 0.0;
    }
    return out;
}

double matched_total(const Eigen::Ref<const Eigen::MatrixXd>& cost,
                     const std::vector<std::pair<int, int>>& pairs) {
    double total = 0.0;
    for (const auto& [r, c] : pairs) total += cost(r, c);
    return total;
}

std::vector<std::pair<int, int>> real_pairs(const Padded& p, const std::vector<int>& row_to_col) {
    std::vector<std::pair<int, int>> pairs;
    for (int r = 0; r < p.rows; ++r) {
        const int c = row_to_col[r];
        if (c >= 0 && c < p.cols && p.a[r][c] < kForbidden * 0.5 && p.a[r][c] < kUnassigned * 0.5) {
            pairs.emplace_back(r, c);
        }
    }
    return pairs;
}

}  // namespace

Assignment hungarian_assign(const Eigen::Ref<const Eigen::MatrixXd>& cost, double gate) {
    const int rows = static_cast<int>(cost.rows());
    const int cols = static_cast<int>(cost.cols());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (std::isnan(cost(r, c))) throw InvalidArgument("assignment cost is NaN");
        }
    }

    Assignment out;
    if (rows == 0 || cols == 0) {
        for (int r = 0; r < rows; ++r) out.unassigned_rows.push_back(r);
        for (int c = 0; c < cols; ++c) out.unassigned_cols.push_back(c);
        return out;
    }

    Padded padded = pad(cost, gate);
    auto pairs = real_pairs(padded, solve_square(padded.a));
    const std::size_t cardinality = pairs.size();
    const double best_total = matched_total(cost, pairs);

    // Canonicalize cost-equal optima to the lexicographically smallest
    // (row, col) sequence: greedily pin each candidate pair and keep the pin
    // if an optimal completion of equal cardinality and total still exists.
    const double tol = 1e-9 * (1.0 + std::abs(best_total));
    std::vector<std::pair<int, int>> pinned;
    for (int r = 0; r < rows && pinned.size() < cardinality; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double v = cost(r, c);
            if (!(std::isfinite(v) && v <= gate)) continue;
            bool taken = false;
            for (const auto& pc : pinned) {
                if (pc.second == c) {
                    taken = true;
                    break;
                }
            }
            if (taken) continue;
            Padded trial = padded;
            for (const auto& [pr, pc] : pinned) {
                for (int cc = 0; cc < cols; ++cc) {
                    if (cc != pc) trial.a[pr][cc] = kForbidden;
                }
                trial.a[pr][cols + pr] = kForbidden;
            }
            for (int cc = 0; cc < cols; ++cc) {
                if (cc != c) trial.a[r][cc] = kForbidden;
            }
            trial.a[r][cols + r] = kForbidden;
            auto trial_pairs = real_pairs(trial, solve_square(trial.a));
            if (trial_pairs.size() == cardinality &&
                matched_total(cost, trial_pairs) <= best_total + tol) {
                pinned.emplace_back(r, c);
                break;
            }
        }
    }
    if (pinned.size() == cardinality) pairs = pinned;

    std::sort(pairs.begin(), pairs.end());
    out.pairs = pairs;
    out.total_cost = matched_total(cost, pairs);
    std::vector<char> row_used(rows, false), col_used(cols, false);
    for (const auto& [r, c] : pairs) {
        row_used[r] = true;
        col_used[c] = true;
    }
    for (int r = 0; r < rows; ++r) {
        if (!row_used[r]) out.unassigned_rows.push_back(r);
    }
    for (int c = 0; c < cols; ++c) {
        if (!col_used[c]) out.unassigned_cols.push_back(c);
    }
    return out;
}

}  // namespace simtrack
