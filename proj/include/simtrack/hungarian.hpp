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
#include <limits>
#include <utility>
#include <vector>

namespace simtrack {

struct Assignment {
    std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
    std::vector<int> unassigned_rows;
    std::vector<int> unassigned_cols;
    double total_cost = 0.0;  // sum of matched costs only
};

/// Minimum-total-cost bipartite assignment over the pairs with cost <= gate;
/// rows/cols whose every pairing is gated out stay unassigned. Cardinality is
/// maximized first, cost minimized second. Among cost-equal optima the
/// lexicographically smallest (row, col) assignment is returned.
Assignment hungarian_assign(const Eigen::Ref<const Eigen::MatrixXd>& cost,
                            double gate = std::numeric_limits<double>::infinity());

}  // namespace simtrack
