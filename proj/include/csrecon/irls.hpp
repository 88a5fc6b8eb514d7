#pragma once

// Reweighted least-squares solvers for lp pseudonorm minimization under the
// noiseless equality constraint Ax = y. Weights come from the current
// iterate (optionally summed per block or per row), known-support indices
// are left unpenalized, and a smoothing parameter is driven down a fixed
// continuation schedule.

#include "csrecon/core.hpp"

#include <chrono>
#include <cmath>
#include <vector>

namespace csr {

struct IrlsState {
  Eigen::VectorXd weights;  // strictly positive, finite
  double epsilon = 1.0;     // smoothing level of the current stage
  Eigen::MatrixXd iterate;  // M x L
};

namespace detail {

// Smoothing floor of the continuation schedule. The schedule starts at 1 and
// divides by 10 on stall; at p = 1 the off-support residue of the smoothed
// problem scales like sqrt(epsilon), so the floor sits well below the
// tolerances the recovery checks use.
constexpr double kIrlsEpsFloor = 1e-14;

// Iterations allowed per smoothing stage before the schedule advances anyway.
constexpr int kIrlsStageCap = 25;

// Budget and tolerance of the convex finishing pass at p = 1.
constexpr int kSplitIters = 4000;
constexpr double kSplitTol = 1e-12;

enum class WeightMode { PerEntry, PerBlock, PerRow };

// Scaled-form splitting iteration for the equality-constrained group-l1
// problem (groups are entries, blocks or rows to match the weight mode;
// support-prior groups are not shrunk). At p = 1 the objective is convex and
// this pass reaches the exact minimizer where the reweighting fixed point
// can stall on flat ties. Works on the unit-norm problem and is warm-started
// from the reweighted iterate.
inline bool l1_split_polish(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y_unit,
                            const std::vector<int>& support, WeightMode mode, int block_len,
                            Eigen::MatrixXd& x) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = a.cols();
  const Eigen::Index l = y_unit.cols();

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(a);
  const Eigen::MatrixXd gram_full = gram.selfadjointView<Eigen::Lower>();
  Eigen::LLT<Eigen::MatrixXd> llt(gram_full);
  if (llt.info() != Eigen::Success)
    throw ConditioningError("measurement Gram matrix is numerically singular",
                            detail::first_bad_pivot(gram_full));

  std::vector<char> unshrunk(static_cast<std::size_t>(m), 0);
  for (const int idx : support) unshrunk[static_cast<std::size_t>(idx)] = 1;

  const double rho = 1.0;
  Eigen::MatrixXd z = x;
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(m, l);
  auto project = [&](const Eigen::MatrixXd& v) -> Eigen::MatrixXd {
    return v - a.transpose() * llt.solve(a * v - y_unit);
  };
  auto shrink_group = [&](Eigen::MatrixXd& s, Eigen::Index start, Eigen::Index len) {
    const double norm = s.middleRows(start, len).norm();
    const double kappa = 1.0 / rho;
    if (norm <= kappa)
      s.middleRows(start, len).setZero();
    else
      s.middleRows(start, len) *= (norm - kappa) / norm;
  };

  for (int it = 0; it < kSplitIters; ++it) {
    x = project(z - u);
    Eigen::MatrixXd s = x + u;
    const Eigen::MatrixXd z_prev = z;
    if (mode == WeightMode::PerBlock) {
      for (Eigen::Index b = 0; b < m / block_len; ++b) {
        if (unshrunk[static_cast<std::size_t>(b * block_len)]) continue;
        shrink_group(s, b * block_len, block_len);
      }
    } else {  // entries and rows share the per-row grouping (l = 1 for entries)
      for (Eigen::Index i = 0; i < m; ++i) {
        if (unshrunk[static_cast<std::size_t>(i)]) continue;
        shrink_group(s, i, 1);
      }
    }
    z = s;
    u += x - z;
    if ((x - z).norm() < kSplitTol && (z - z_prev).norm() < kSplitTol) {
      x = project(z);
      return true;
    }
  }
  x = project(z);
  return false;
}

inline RecoveryResult irls_core(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double p,
                                const std::vector<int>& support, const SolverConfig& config,
                                WeightMode mode, int block_len) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = a.cols();
  const Eigen::Index l = y.cols();
  if (!(p > 0.0 && p <= 1.0)) throw RangeError("p must lie in (0, 1]");
  for (const int idx : support)
    if (idx < 0 || idx >= m)
      throw RangeError("support index " + std::to_string(idx) + " outside [0, " +
                       std::to_string(m) + ")");

  Stopwatch timer;
  RecoveryResult result;
  result.estimate = Eigen::MatrixXd::Zero(m, l);

  if (y.isZero(0.0)) {
    result.iterations = 1;
    result.converged = true;
    if (config.collect_trace) result.estimate_trace.push_back(result.estimate);
    result.runtime_seconds = timer.seconds();
    return result;
  }

  // The continuation schedule is defined on the unit-norm problem, which
  // makes it independent of the measurement scale; the solution is scaled
  // back at the end.
  const double scale = y.norm();
  const Eigen::MatrixXd y_unit = y / scale;

  IrlsState state;
  state.iterate = Eigen::MatrixXd::Zero(m, l);
  state.weights = Eigen::VectorXd::Ones(m);
  state.epsilon = 1.0;
  const double expo = p / 2.0 - 1.0;
  int stage_iters = 0;

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    result.iterations = iter;
    ++stage_iters;

    // Energy per coefficient, block or row, then the lp weight.
    Eigen::VectorXd energy(m);
    if (mode == WeightMode::PerEntry) {
      energy = state.iterate.col(0).array().square();
    } else if (mode == WeightMode::PerRow) {
      energy = state.iterate.rowwise().squaredNorm();
    } else {
      for (Eigen::Index b = 0; b < m / block_len; ++b) {
        const double e = state.iterate.middleRows(b * block_len, block_len).squaredNorm();
        energy.segment(b * block_len, block_len).setConstant(e);
      }
    }
    state.weights = (energy.array() + state.epsilon).pow(expo);
    if (!support.empty()) {
      // Known-support indices are priced well below every penalized entry,
      // which removes them from the penalty while keeping W invertible.
      const double wmin = state.weights.minCoeff();
      for (const int idx : support) state.weights[idx] = 1e-6 * wmin;
    }

    const Eigen::VectorXd inv_w = state.weights.cwiseInverse();
    const Eigen::MatrixXd scaled = a * inv_w.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
    const Eigen::MatrixXd gram_full = gram.selfadjointView<Eigen::Lower>();
    Eigen::LLT<Eigen::MatrixXd> llt(gram_full);
    if (llt.info() != Eigen::Success)
      throw ConditioningError("weighted normal equations are numerically singular",
                              detail::first_bad_pivot(gram_full));

    Eigen::MatrixXd next = inv_w.asDiagonal() * (a.transpose() * llt.solve(y_unit));
    const double step = (next - state.iterate).norm();
    state.iterate = std::move(next);

    if (config.collect_trace) result.estimate_trace.push_back(scale * state.iterate);

    // Advance the schedule on stall; the per-stage cap bounds the descent
    // part of the continuation within the iteration budget. At the floor the
    // iteration runs until it genuinely stalls.
    const bool stalled = step < std::sqrt(state.epsilon) / 100.0;
    if (state.epsilon <= kIrlsEpsFloor) {
      if (stalled) {
        result.converged = true;
        break;
      }
    } else if (stalled || stage_iters >= kIrlsStageCap) {
      state.epsilon = std::max(state.epsilon / 10.0, kIrlsEpsFloor);
      stage_iters = 0;
    }
  }

  if (p == 1.0) {
    const bool polished = l1_split_polish(a, y_unit, support, mode, block_len, state.iterate);
    result.converged = result.converged || polished;
    if (config.collect_trace) result.estimate_trace.push_back(scale * state.iterate);
  }

  result.estimate = scale * state.iterate;
  result.runtime_seconds = timer.seconds();
  return result;
}

}  // namespace detail

// lp minimization with an optional unpenalized support prior.
inline RecoveryResult irls_lp(const SmvProblem& problem, double p,
                              const std::vector<int>& support_prior = {},
                              const SolverConfig& config = {}) {
  validate_config(config);
  return detail::irls_core(problem.A.matrix, problem.y, p, support_prior, config,
                           detail::WeightMode::PerEntry, 1);
}

// Block variant: one weight per block from the block's summed energy; no
// support prior.
inline RecoveryResult birls(const SmvProblem& problem, double p, const BlockPartition& partition,
                            const SolverConfig& config = {}) {
  validate_config(config);
  if (partition.dim() != problem.A.cols())
    throw DimensionError("partition covers " + std::to_string(partition.dim()) +
                         " coefficients but the operator has " + std::to_string(problem.A.cols()) +
                         " columns");
  return detail::irls_core(problem.A.matrix, problem.y, p, {}, config,
                           detail::WeightMode::PerBlock, partition.block_len);
}

// MMV variant: weights from row norms, shared across columns.
inline RecoveryResult mfocuss(const MmvProblem& problem, double p, const SolverConfig& config = {}) {
  validate_config(config);
  return detail::irls_core(problem.A.matrix, problem.Y, p, {}, config,
                           detail::WeightMode::PerRow, 1);
}

}  // namespace csr
