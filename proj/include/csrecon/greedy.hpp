#pragma once

// Greedy block selection, magnitude thresholding and the exhaustive l0
// search. These are the reference points the learned solvers are measured
// against.

#include "csrecon/core.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <vector>

namespace csr {

// Greedy block pursuit: repeatedly select the block whose columns correlate
// most with the residual (ties -> lowest index), refit by least squares on
// the union of selected blocks. Non-selected blocks are exactly zero.
inline RecoveryResult bomp(const SmvProblem& problem, const BlockPartition& partition,
                           int k_blocks) {
  const Eigen::MatrixXd& a = problem.A.matrix;
  const int d = partition.block_len;
  const int g = partition.num_blocks;
  if (partition.dim() != a.cols())
    throw DimensionError("partition covers " + std::to_string(partition.dim()) +
                         " coefficients but the operator has " + std::to_string(a.cols()) +
                         " columns");
  if (k_blocks < 1 || k_blocks > g)
    throw RangeError("selection count " + std::to_string(k_blocks) + " outside [1, " +
                     std::to_string(g) + "]");

  const auto start_time = std::chrono::steady_clock::now();
  RecoveryResult result;
  result.estimate = Eigen::MatrixXd::Zero(a.cols(), 1);

  std::vector<int> selected;
  std::vector<bool> in_set(g, false);
  Eigen::VectorXd residual = problem.y;
  Eigen::VectorXd coeffs;

  for (int step = 0; step < k_blocks; ++step) {
    int best = -1;
    double best_score = -1.0;
    for (int i = 0; i < g; ++i) {
      if (in_set[i]) continue;
      const double score = (a.middleCols(i * d, d).transpose() * residual).norm();
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    selected.push_back(best);
    in_set[best] = true;

    Eigen::MatrixXd a_sel(a.rows(), selected.size() * d);
    for (std::size_t k = 0; k < selected.size(); ++k)
      a_sel.middleCols(k * d, d) = a.middleCols(selected[k] * d, d);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a_sel);
    if (qr.rank() < std::min(a_sel.rows(), a_sel.cols()))
      throw ConditioningError("selected block columns are rank deficient", best);
    coeffs = qr.solve(problem.y);
    residual = problem.y - a_sel * coeffs;
  }

  for (std::size_t k = 0; k < selected.size(); ++k)
    result.estimate.middleRows(selected[k] * d, d) = coeffs.segment(k * d, d);
  std::sort(selected.begin(), selected.end());
  result.active_blocks = std::move(selected);
  result.iterations = k_blocks;
  result.converged = true;
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

// Best k-term approximation: keep the k largest-magnitude entries, ties
// broken by lowest index.
inline Eigen::VectorXd ksparse_approx(const Eigen::VectorXd& c, int k) {
  const int m = static_cast<int>(c.size());
  if (k < 0 || k > m)
    throw RangeError("k-term count " + std::to_string(k) + " outside [0, " + std::to_string(m) + "]");
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&c](int i, int j) { return std::abs(c[i]) > std::abs(c[j]); });
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
  for (int r = 0; r < k; ++r) out[order[r]] = c[order[r]];
  return out;
}

// Exhaustive search over supports of size 0..k_max in increasing size,
// lexicographic within a size. Returns the first support whose restricted
// least squares drives the residual below 1e-8 * ||y||; otherwise the
// minimum-residual candidate, flagged not converged.
inline RecoveryResult l0_bruteforce(const SmvProblem& problem, int k_max) {
  const Eigen::MatrixXd& a = problem.A.matrix;
  const int m = static_cast<int>(a.cols());
  if (m > 24 || k_max > 4)
    throw ScaleError("exhaustive search limited to M <= 24 and k <= 4, got M=" +
                     std::to_string(m) + ", k=" + std::to_string(k_max));
  if (k_max < 0) throw RangeError("negative sparsity bound");

  const auto start_time = std::chrono::steady_clock::now();
  const double target = 1e-8 * problem.y.norm();

  RecoveryResult result;
  result.estimate = Eigen::MatrixXd::Zero(m, 1);
  double best_residual = problem.y.norm();
  int evaluated = 1;  // the empty support

  bool done = best_residual <= target;
  for (int size = 1; size <= k_max && size <= m && !done; ++size) {
    std::vector<int> support(size);
    std::iota(support.begin(), support.end(), 0);
    while (true) {
      Eigen::MatrixXd a_s(a.rows(), size);
      for (int k = 0; k < size; ++k) a_s.col(k) = a.col(support[k]);
      const Eigen::VectorXd x_s = a_s.householderQr().solve(problem.y);
      const double res = (problem.y - a_s * x_s).norm();
      ++evaluated;
      if (res < best_residual) {
        best_residual = res;
        result.estimate.setZero();
        for (int k = 0; k < size; ++k) result.estimate(support[k], 0) = x_s[k];
      }
      if (res <= target) {
        done = true;
        break;
      }
      // next combination in lexicographic order
      int pos = size - 1;
      while (pos >= 0 && support[pos] == m - size + pos) --pos;
      if (pos < 0) break;
      ++support[pos];
      for (int k = pos + 1; k < size; ++k) support[k] = support[k - 1] + 1;
    }
  }

  result.converged = best_residual <= target;
  result.iterations = evaluated;
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

}  // namespace csr
