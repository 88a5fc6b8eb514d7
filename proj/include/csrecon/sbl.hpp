#pragma once

// Structured sparse Bayesian learning solvers. The prior on each length-d
// coefficient block is N(0, gamma_i * B) with a shared intra-block
// correlation B; MMV variants add an inter-column correlation B_L. Block
// scales gamma_i are learned by EM or bound-optimization fixed points and
// blocks are pruned once gamma_i falls below the threshold.

#include "csrecon/core.hpp"

#include <chrono>
#include <cmath>
#include <vector>

namespace csr {

// Hyperparameter state of the block-Gaussian prior.
struct SbState {
  Eigen::VectorXd gamma;       // block scales, size g
  Eigen::MatrixXd intra_corr;  // d x d, symmetric positive definite
  Eigen::MatrixXd inter_corr;  // L' x L', symmetric positive definite
  std::vector<bool> active;    // pruning mask; pruned blocks have gamma frozen at 0
};

inline SbState make_sb_state(const BlockPartition& partition, int column_block = 1) {
  SbState s;
  s.gamma = Eigen::VectorXd::Ones(partition.num_blocks);
  s.intra_corr = Eigen::MatrixXd::Identity(partition.block_len, partition.block_len);
  s.inter_corr = Eigen::MatrixXd::Identity(column_block, column_block);
  s.active.assign(static_cast<std::size_t>(partition.num_blocks), true);
  return s;
}

struct PosteriorMoments {
  Eigen::MatrixXd mean;                   // M x L (L = 1 for SMV)
  std::vector<Eigen::MatrixXd> block_cov; // g diagonal blocks of the posterior covariance
};

// First-order autoregressive Toeplitz matrix r^|i-j|.
inline Eigen::MatrixXd ar1_toeplitz(int n, double r) {
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = std::pow(r, std::abs(i - j));
  return b;
}

// AR(1) coefficient of a sample covariance: mean first superdiagonal over
// mean diagonal, clamped to (-0.99, 0.99).
inline double ar1_coefficient(const Eigen::MatrixXd& s) {
  const int n = static_cast<int>(s.rows());
  if (n < 2) return 0.0;
  double diag = 0.0, sup = 0.0;
  for (int i = 0; i < n; ++i) diag += s(i, i);
  for (int i = 0; i + 1 < n; ++i) sup += s(i, i + 1);
  diag /= n;
  sup /= (n - 1);
  if (!(std::abs(diag) > 0.0) || !std::isfinite(sup / diag)) return 0.0;
  const double r = sup / diag;
  if (r > 0.99) return 0.99;
  if (r < -0.99) return -0.99;
  return r;
}

namespace detail {

// One E-step over the active blocks: factorization of
// Sigma_y = lambda I + sum_i gamma_i A_i B A_i^T and the per-block posterior
// statistics needed by every learning rule.
struct BlockPass {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double lambda_used = 0.0;
  std::vector<Eigen::MatrixXd> mu;      // d x L posterior mean per active block
  std::vector<Eigen::MatrixXd> sigma;   // d x d posterior covariance per active block
  std::vector<double> trace_term;       // Tr(A_i^T Sigma_y^{-1} A_i B)
  std::vector<double> quad_term;        // sum_l q_l^T B q_l with q = A_i^T Sigma_y^{-1} Y
};

inline BlockPass block_posterior_pass(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                                      const Eigen::VectorXd& gamma, const Eigen::MatrixXd& intra,
                                      const std::vector<int>& act, int d, double lambda,
                                      bool retry_on_failure) {
  const Eigen::Index n = a.rows();
  BlockPass pass;

  Eigen::MatrixXd sigma_y = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::MatrixXd> s_blocks(act.size());
  for (std::size_t k = 0; k < act.size(); ++k) {
    const int i = act[k];
    const auto a_i = a.middleCols(i * d, d);
    s_blocks[k].noalias() = a_i * intra;
    sigma_y.noalias() += gamma[i] * (s_blocks[k] * a_i.transpose());
  }
  sigma_y.diagonal().array() += lambda;

  pass.lambda_used = lambda;
  pass.llt.compute(sigma_y);
  if (pass.llt.info() != Eigen::Success) {
    if (!retry_on_failure)
      throw ConditioningError("posterior system is numerically singular",
                              first_bad_pivot(sigma_y));
    const double inflated = lambda > 0.0 ? 10.0 * lambda : 1e-10;
    sigma_y.diagonal().array() += inflated - lambda;
    pass.lambda_used = inflated;
    pass.llt.compute(sigma_y);
    if (pass.llt.info() != Eigen::Success)
      throw ConditioningError("posterior system is numerically singular after retry",
                              first_bad_pivot(sigma_y));
  }

  const Eigen::MatrixXd w = pass.llt.solve(y);
  pass.mu.resize(act.size());
  pass.sigma.resize(act.size());
  pass.trace_term.resize(act.size());
  pass.quad_term.resize(act.size());
  for (std::size_t k = 0; k < act.size(); ++k) {
    const int i = act[k];
    const auto a_i = a.middleCols(i * d, d);
    const Eigen::MatrixXd q = a_i.transpose() * w;                   // d x L
    const Eigen::MatrixXd t = pass.llt.solve(s_blocks[k]);           // N x d
    pass.mu[k].noalias() = gamma[i] * (intra * q);
    pass.sigma[k].noalias() = gamma[i] * intra - (gamma[i] * gamma[i]) *
                              (s_blocks[k].transpose() * t);
    pass.trace_term[k] = (a_i.array() * t.array()).sum();
    pass.quad_term[k] = (q.array() * (intra * q).array()).sum();
  }
  return pass;
}

inline std::vector<int> active_indices(const std::vector<bool>& mask) {
  std::vector<int> act;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) act.push_back(static_cast<int>(i));
  return act;
}

// Shared AR(1)-regularized re-estimation of the intra-block correlation from
// normalized second moments of the active blocks.
inline Eigen::MatrixXd reestimate_intra(const BlockPass& pass, const std::vector<int>& act,
                                        const Eigen::VectorXd& gamma_new, int d,
                                        Eigen::Index columns) {
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(d, d);
  int count = 0;
  for (std::size_t k = 0; k < act.size(); ++k) {
    const double g = gamma_new[act[k]];
    if (!(g > 0.0)) continue;
    raw.noalias() += (pass.sigma[k] + pass.mu[k] * pass.mu[k].transpose() /
                      static_cast<double>(columns)) / g;
    ++count;
  }
  if (count == 0) return ar1_toeplitz(d, 0.0);
  return ar1_toeplitz(d, ar1_coefficient(raw / count));
}

}  // namespace detail

// Posterior mean and diagonal covariance blocks of the coefficient vector
// under the block-Gaussian prior defined by state, for measurements y (one
// column per measurement vector). Pruned blocks contribute zero mean and
// zero covariance.
inline PosteriorMoments posterior_moments(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y,
                                          const SbState& state, double noise_var) {
  const int d = static_cast<int>(state.intra_corr.rows());
  const int g = static_cast<int>(state.gamma.size());
  if (state.intra_corr.rows() != state.intra_corr.cols())
    throw DimensionError("intra-block correlation must be square");
  if (static_cast<Eigen::Index>(d) * g != a.cols())
    throw DimensionError("state covers " + std::to_string(static_cast<long>(d) * g) +
                         " coefficients but the operator has " + std::to_string(a.cols()) +
                         " columns");
  if (y.rows() != a.rows()) throw DimensionError("measurement rows do not match operator rows");
  if (state.active.size() != static_cast<std::size_t>(g))
    throw DimensionError("active mask size does not match block count");
  if (noise_var < 0.0) throw RangeError("negative noise variance");

  const auto act = detail::active_indices(state.active);
  const auto pass = detail::block_posterior_pass(a, y, state.gamma, state.intra_corr, act, d,
                                                 noise_var, /*retry_on_failure=*/false);
  PosteriorMoments out;
  out.mean = Eigen::MatrixXd::Zero(a.cols(), y.cols());
  out.block_cov.assign(g, Eigen::MatrixXd::Zero(d, d));
  for (std::size_t k = 0; k < act.size(); ++k) {
    out.mean.middleRows(act[k] * d, d) = pass.mu[k];
    out.block_cov[act[k]] = pass.sigma[k];
  }
  return out;
}

namespace detail {

enum class GammaRule { Em, BoundOpt };

inline RecoveryResult run_bsbl(const SmvProblem& problem, const BlockPartition& partition,
                               const SolverConfig& config, GammaRule rule) {
  validate_config(config);
  const Eigen::MatrixXd& a = problem.A.matrix;
  const int m = static_cast<int>(a.cols());
  const int d = partition.block_len;
  const int g = partition.num_blocks;
  if (partition.dim() != m)
    throw DimensionError("partition covers " + std::to_string(partition.dim()) +
                         " coefficients but the operator has " + std::to_string(m) + " columns");
  if (problem.y.size() != a.rows()) throw DimensionError("measurement length mismatch");

  Stopwatch timer;
  RecoveryResult result;
  result.estimate = Eigen::MatrixXd::Zero(m, 1);

  if (problem.y.isZero(0.0)) {
    result.iterations = 1;
    result.converged = true;
    result.all_pruned = true;
    if (config.collect_trace) {
      result.gamma_trace.push_back(Eigen::VectorXd::Zero(g));
      result.estimate_trace.push_back(result.estimate);
    }
    result.runtime_seconds = timer.seconds();
    return result;
  }

  Eigen::VectorXd gamma = Eigen::VectorXd::Ones(g);
  Eigen::MatrixXd intra = Eigen::MatrixXd::Identity(d, d);
  std::vector<bool> active(g, true);

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    result.iterations = iter;
    const auto act = active_indices(active);
    if (act.empty()) {
      result.estimate.setZero();
      result.converged = true;
      result.all_pruned = true;
      break;
    }

    const auto pass = block_posterior_pass(a, problem.y, gamma, intra, act, d,
                                           problem.noise_var, /*retry_on_failure=*/true);

    Eigen::VectorXd gamma_new = gamma;
    for (std::size_t k = 0; k < act.size(); ++k) {
      const int i = act[k];
      if (rule == GammaRule::Em) {
        gamma_new[i] = gamma[i] - gamma[i] * gamma[i] * pass.trace_term[k] / d +
                       gamma[i] * gamma[i] * pass.quad_term[k] / d;
      } else {
        const double den = pass.trace_term[k];
        if (den > 0.0 && pass.quad_term[k] >= 0.0)
          gamma_new[i] = gamma[i] * std::sqrt(pass.quad_term[k] / den);
      }
      if (!(gamma_new[i] > 0.0) || !std::isfinite(gamma_new[i])) gamma_new[i] = 0.0;
    }

    if (config.learn_intra_corr && d > 1)
      intra = reestimate_intra(pass, act, gamma_new, d, 1);

    // Prune, then embed the posterior mean of the blocks that survived.
    for (const int i : act)
      if (gamma_new[i] < config.prune_threshold) {
        gamma_new[i] = 0.0;
        active[i] = false;
      }
    result.estimate.setZero();
    for (std::size_t k = 0; k < act.size(); ++k)
      if (active[act[k]]) result.estimate.middleRows(act[k] * d, d) = pass.mu[k];

    if (config.collect_trace) {
      result.gamma_trace.push_back(gamma_new);
      result.estimate_trace.push_back(result.estimate);
    }

    const double scale = gamma.maxCoeff();
    const double delta = (gamma_new - gamma).cwiseAbs().maxCoeff();
    gamma = gamma_new;
    if (delta <= config.tol * (scale > 0.0 ? scale : 1.0)) {
      result.converged = true;
      break;
    }
  }

  result.active_blocks = active_indices(active);
  result.all_pruned = result.active_blocks.empty();
  result.runtime_seconds = timer.seconds();
  return result;
}

}  // namespace detail

// Block SBL with exact EM updates for the block scales.
inline RecoveryResult bsbl_em(const SmvProblem& problem, const BlockPartition& partition,
                              const SolverConfig& config = {}) {
  return detail::run_bsbl(problem, partition, config, detail::GammaRule::Em);
}

// Same loop with the bound-optimization fixed point for the block scales.
inline RecoveryResult bsbl_bo(const SmvProblem& problem, const BlockPartition& partition,
                              const SolverConfig& config = {}) {
  return detail::run_bsbl(problem, partition, config, detail::GammaRule::BoundOpt);
}

namespace detail {

// Symmetric square root / inverse square root of a correlation matrix.
inline void sqrt_pair(const Eigen::MatrixXd& b, Eigen::MatrixXd& half, Eigen::MatrixXd& inv_half) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw ConditioningError("inter-column correlation is not positive definite",
                            first_bad_pivot(b));
  const Eigen::VectorXd root = es.eigenvalues().cwiseSqrt();
  half.noalias() = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  inv_half.noalias() =
      es.eigenvectors() * root.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

struct GroupOutcome {
  Eigen::MatrixXd estimate;
  int iterations = 0;
  bool converged = false;
  std::vector<int> active_blocks;
  std::vector<Eigen::VectorXd> gamma_trace;
};

// One spatiotemporal SBL run over a column group: whiten the columns by the
// current inter-column correlation, apply EM block updates on the whitened
// group, unwhiten, re-estimate the correlation, prune.
inline GroupOutcome st_sbl_group(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y_group,
                                 const BlockPartition& partition, const SolverConfig& config,
                                 double noise_var) {
  const int m = static_cast<int>(a.cols());
  const int d = partition.block_len;
  const int g = partition.num_blocks;
  const Eigen::Index lc = y_group.cols();

  GroupOutcome out;
  out.estimate = Eigen::MatrixXd::Zero(m, lc);

  if (y_group.isZero(0.0)) {
    out.iterations = 1;
    out.converged = true;
    if (config.collect_trace) out.gamma_trace.push_back(Eigen::VectorXd::Zero(g));
    return out;
  }

  Eigen::VectorXd gamma = Eigen::VectorXd::Ones(g);
  Eigen::MatrixXd intra = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd inter = Eigen::MatrixXd::Identity(lc, lc);
  std::vector<bool> active(g, true);

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    out.iterations = iter;
    const auto act = active_indices(active);
    if (act.empty()) {
      out.estimate.setZero();
      out.converged = true;
      break;
    }

    Eigen::MatrixXd inter_half, inter_inv_half;
    sqrt_pair(inter, inter_half, inter_inv_half);
    const Eigen::MatrixXd y_white = y_group * inter_inv_half;

    const auto pass = block_posterior_pass(a, y_white, gamma, intra, act, d, noise_var,
                                           /*retry_on_failure=*/true);

    Eigen::VectorXd gamma_new = gamma;
    for (std::size_t k = 0; k < act.size(); ++k) {
      const int i = act[k];
      gamma_new[i] = gamma[i] - gamma[i] * gamma[i] * pass.trace_term[k] / d +
                     gamma[i] * gamma[i] * pass.quad_term[k] / (d * static_cast<double>(lc));
      if (!(gamma_new[i] > 0.0) || !std::isfinite(gamma_new[i])) gamma_new[i] = 0.0;
    }

    if (config.learn_intra_corr && d > 1)
      intra = reestimate_intra(pass, act, gamma_new, d, lc);

    // Posterior means in original (unwhitened) column coordinates.
    std::vector<Eigen::MatrixXd> mu_x(act.size());
    for (std::size_t k = 0; k < act.size(); ++k) mu_x[k].noalias() = pass.mu[k] * inter_half;

    if (config.learn_inter_corr && lc > 1) {
      Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(lc, lc);
      int count = 0;
      for (std::size_t k = 0; k < act.size(); ++k) {
        const double gi = gamma_new[act[k]];
        if (!(gi > 0.0)) continue;
        raw.noalias() += mu_x[k].transpose() * mu_x[k] / gi;
        ++count;
      }
      if (count > 0) inter = ar1_toeplitz(static_cast<int>(lc), ar1_coefficient(raw));
    }

    for (const int i : act)
      if (gamma_new[i] < config.prune_threshold) {
        gamma_new[i] = 0.0;
        active[i] = false;
      }
    out.estimate.setZero();
    for (std::size_t k = 0; k < act.size(); ++k)
      if (active[act[k]]) out.estimate.middleRows(act[k] * d, d) = mu_x[k];

    if (config.collect_trace) out.gamma_trace.push_back(gamma_new);

    const double scale = gamma.maxCoeff();
    const double delta = (gamma_new - gamma).cwiseAbs().maxCoeff();
    gamma = gamma_new;
    if (delta <= config.tol * (scale > 0.0 ? scale : 1.0)) {
      out.converged = true;
      break;
    }
  }

  out.active_blocks = active_indices(active);
  return out;
}

}  // namespace detail

// Spatiotemporal SBL on the MMV model. Columns are processed in independent
// groups of config.column_block; a group of one column reduces to bsbl_em.
inline RecoveryResult st_sbl(const MmvProblem& problem, const BlockPartition& partition,
                             const SolverConfig& config = {}) {
  validate_config(config);
  const Eigen::MatrixXd& a = problem.A.matrix;
  const int m = static_cast<int>(a.cols());
  if (partition.dim() != m)
    throw DimensionError("partition covers " + std::to_string(partition.dim()) +
                         " coefficients but the operator has " + std::to_string(m) + " columns");
  const Eigen::Index l = problem.Y.cols();
  const int lc = config.column_block;
  if (l % lc != 0)
    throw DimensionError("column block " + std::to_string(lc) + " does not divide column count " +
                         std::to_string(l));

  detail::Stopwatch timer;
  RecoveryResult result;
  result.estimate = Eigen::MatrixXd::Zero(m, l);
  result.converged = true;
  std::vector<bool> active_union(static_cast<std::size_t>(partition.num_blocks), false);

  for (Eigen::Index start = 0; start < l; start += lc) {
    auto group = detail::st_sbl_group(a, problem.Y.middleCols(start, lc), partition, config,
                                      problem.noise_var);
    result.estimate.middleCols(start, lc) = group.estimate;
    result.iterations = std::max(result.iterations, group.iterations);
    result.converged = result.converged && group.converged;
    for (const int i : group.active_blocks) active_union[static_cast<std::size_t>(i)] = true;
    if (config.collect_trace)
      for (auto& gtrace : group.gamma_trace) result.gamma_trace.push_back(std::move(gtrace));
  }

  result.active_blocks = detail::active_indices(active_union);
  result.all_pruned = result.active_blocks.empty();
  result.runtime_seconds = timer.seconds();
  return result;
}

// Element-wise MMV Bayesian learning with inter-column correlation
// compensation: the temporal correlation of the measurement vectors is
// learned as an AR(1) model and whitened inside the scale updates.
inline RecoveryResult t_msbl(const MmvProblem& problem, const SolverConfig& config = {}) {
  validate_config(config);
  const Eigen::MatrixXd& a = problem.A.matrix;
  const int m = static_cast<int>(a.cols());
  const Eigen::Index n = a.rows();
  const Eigen::Index l = problem.Y.cols();
  if (problem.Y.rows() != n) throw DimensionError("measurement rows mismatch");

  detail::Stopwatch timer;
  RecoveryResult result;
  result.estimate = Eigen::MatrixXd::Zero(m, l);

  if (problem.Y.isZero(0.0)) {
    result.iterations = 1;
    result.converged = true;
    result.all_pruned = true;
    result.runtime_seconds = timer.seconds();
    return result;
  }

  Eigen::VectorXd gamma = Eigen::VectorXd::Ones(m);
  Eigen::MatrixXd inter = Eigen::MatrixXd::Identity(l, l);
  std::vector<bool> active(m, true);

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    result.iterations = iter;
    const auto act = detail::active_indices(active);
    if (act.empty()) {
      result.estimate.setZero();
      result.converged = true;
      result.all_pruned = true;
      break;
    }

    Eigen::MatrixXd a_act(n, act.size());
    for (std::size_t k = 0; k < act.size(); ++k)
      a_act.col(k) = a.col(act[k]) * std::sqrt(gamma[act[k]]);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(a_act);
    Eigen::MatrixXd sigma_y = gram.selfadjointView<Eigen::Lower>();
    double lambda = problem.noise_var;
    sigma_y.diagonal().array() += lambda;

    Eigen::LLT<Eigen::MatrixXd> llt(sigma_y);
    if (llt.info() != Eigen::Success) {
      lambda = lambda > 0.0 ? 10.0 * lambda : 1e-10;
      sigma_y.diagonal().array() += lambda - problem.noise_var;
      llt.compute(sigma_y);
      if (llt.info() != Eigen::Success)
        throw ConditioningError("posterior system is numerically singular after retry",
                                detail::first_bad_pivot(sigma_y));
    }

    const Eigen::MatrixXd w = llt.solve(problem.Y);  // N x L
    Eigen::LLT<Eigen::MatrixXd> inter_llt(inter);
    if (inter_llt.info() != Eigen::Success)
      throw ConditioningError("inter-column correlation is not positive definite",
                              detail::first_bad_pivot(inter));

    Eigen::VectorXd gamma_new = gamma;
    Eigen::MatrixXd rows(act.size(), l);
    for (std::size_t k = 0; k < act.size(); ++k) {
      const int i = act[k];
      const Eigen::RowVectorXd xr = gamma[i] * (a.col(i).transpose() * w);
      rows.row(k) = xr;
      const Eigen::VectorXd sol = llt.solve(a.col(i));
      const double post_var = gamma[i] - gamma[i] * gamma[i] * a.col(i).dot(sol);
      const double fit = (xr * inter_llt.solve(xr.transpose())).value();
      gamma_new[i] = fit / static_cast<double>(l) + post_var;
      if (!(gamma_new[i] > 0.0) || !std::isfinite(gamma_new[i])) gamma_new[i] = 0.0;
    }

    if (config.learn_inter_corr && l > 1) {
      Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(l, l);
      int count = 0;
      for (std::size_t k = 0; k < act.size(); ++k) {
        const double gi = gamma_new[act[k]];
        if (!(gi > 0.0)) continue;
        raw.noalias() += rows.row(k).transpose() * rows.row(k) / gi;
        ++count;
      }
      if (count > 0) inter = ar1_toeplitz(static_cast<int>(l), ar1_coefficient(raw));
    }

    for (const int i : act)
      if (gamma_new[i] < config.prune_threshold) {
        gamma_new[i] = 0.0;
        active[i] = false;
      }
    result.estimate.setZero();
    for (std::size_t k = 0; k < act.size(); ++k)
      if (active[act[k]]) result.estimate.row(act[k]) = rows.row(k);

    if (config.collect_trace) {
      result.gamma_trace.push_back(gamma_new);
      result.estimate_trace.push_back(result.estimate);
    }

    const double scale = gamma.maxCoeff();
    const double delta = (gamma_new - gamma).cwiseAbs().maxCoeff();
    gamma = gamma_new;
    if (delta <= config.tol * (scale > 0.0 ? scale : 1.0)) {
      result.converged = true;
      break;
    }
  }

  result.active_blocks = detail::active_indices(active);
  result.all_pruned = result.active_blocks.empty();
  result.runtime_seconds = timer.seconds();
  return result;
}

}  // namespace csr
