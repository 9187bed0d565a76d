#pragma once

#include <Eigen/Core>

#include <vector>

namespace planeforge {

struct Assignment {
  std::vector<int> row_to_col;  ///< -1 for rows left unassigned (rows > cols)
  std::vector<int> col_to_row;  ///< -1 for columns left unassigned (cols > rows)
  double cost{0};
};

/// Minimum-cost one-to-one assignment for a rectangular cost matrix
/// (min(rows, cols) pairs). O(n^2 m) shortest augmenting paths with potentials.
/// Throws InputError on non-finite entries.
Assignment hungarian(const Eigen::MatrixXd& cost);

}  // namespace planeforge
