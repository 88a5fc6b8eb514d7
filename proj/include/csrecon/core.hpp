#pragma once

// Domain types, problem containers, block partitioning and dimension
// arithmetic shared by every solver and the bench runner.

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csr {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class RangeError : public Error {
public:
  using Error::Error;
};

class InputError : public Error {
public:
  using Error::Error;
};

class OverflowError : public Error {
public:
  using Error::Error;
};

class ScaleError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

// Raised when a symmetric system refuses a Cholesky factorization.
// failed_index() is the first non-positive pivot, or -1 when unknown.
class ConditioningError : public Error {
public:
  ConditioningError(const std::string& msg, int failed_index = -1)
      : Error(msg), failed_index_(failed_index) {}
  int failed_index() const noexcept { return failed_index_; }

private:
  int failed_index_;
};

// ---------------------------------------------------------------------------
// Exact rationals for subsampling ratios ("33%" is 1/3, not 0.33)

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  std::string str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
  }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
};

inline Rational make_rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw RangeError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{num, den};
}

// Accepts "1/3", "1" and decimal forms like "0.25" (exact power-of-ten denominator).
inline Rational parse_rational(const std::string& text) {
  if (text.empty()) throw RangeError("empty rational");
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      const std::int64_t num = std::stoll(text.substr(0, slash));
      const std::int64_t den = std::stoll(text.substr(slash + 1));
      return make_rational(num, den);
    }
    const auto dot = text.find('.');
    if (dot == std::string::npos) return make_rational(std::stoll(text), 1);
    const std::string head = text.substr(0, dot);
    const std::string frac = text.substr(dot + 1);
    if (frac.size() > 15) throw RangeError("rational literal too precise: " + text);
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    const std::int64_t whole = head.empty() || head == "-" ? 0 : std::stoll(head);
    std::int64_t num = whole * den + (frac.empty() ? 0 : std::stoll(frac));
    if (!head.empty() && head[0] == '-') num = whole * den - std::stoll(frac);
    return make_rational(num, den);
  } catch (const std::invalid_argument&) {
    throw RangeError("unparseable rational: " + text);
  } catch (const std::out_of_range&) {
    throw RangeError("rational out of range: " + text);
  }
}

// ---------------------------------------------------------------------------
// Signal containers

// One RF frame: M depth samples per scan line, L lines, one line per column.
struct RfFrame {
  Eigen::MatrixXd samples;
  std::string meta;

  Eigen::Index depth() const { return samples.rows(); }
  Eigen::Index lines() const { return samples.cols(); }
};

inline RfFrame make_frame(Eigen::MatrixXd samples, std::string meta = "") {
  if (samples.rows() < 1 || samples.cols() < 1)
    throw DimensionError("frame must have at least one sample and one line");
  if (!samples.allFinite()) throw InputError("frame contains non-finite samples");
  return RfFrame{std::move(samples), std::move(meta)};
}

// Display image with entries in [0,1].
struct BModeImage {
  Eigen::MatrixXd pixels;
};

// ---------------------------------------------------------------------------
// Sensing operator

enum class SensingScheme : std::uint32_t {
  Custom = 0,       // hand-built matrix; not regenerable, not persistable
  GaussianInvN = 1  // iid N(0, 1/N) entries from the seeded generator
};

struct SensingOperator {
  Eigen::MatrixXd matrix;  // N x M
  std::uint32_t seed = 0;
  SensingScheme scheme = SensingScheme::Custom;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
};

inline SensingOperator operator_from_matrix(Eigen::MatrixXd m) {
  if (m.rows() < 1 || m.cols() < 1) throw DimensionError("empty sensing matrix");
  if (m.rows() > m.cols())
    throw DimensionError("sensing matrix has more rows (" + std::to_string(m.rows()) +
                         ") than columns (" + std::to_string(m.cols()) + ")");
  if (!m.allFinite()) throw InputError("sensing matrix contains non-finite entries");
  return SensingOperator{std::move(m), 0, SensingScheme::Custom};
}

// ---------------------------------------------------------------------------
// Block partition: M coefficients split into g contiguous blocks of length d.

struct BlockPartition {
  int block_len = 1;   // d
  int num_blocks = 1;  // g

  int dim() const { return block_len * num_blocks; }
  int block_start(int i) const { return i * block_len; }
};

inline BlockPartition make_block_partition(int m, int d) {
  if (m < 1 || d < 1) throw RangeError("block partition needs positive dimensions");
  if (m % d != 0)
    throw DimensionError("block length " + std::to_string(d) + " does not divide signal dimension " +
                         std::to_string(m));
  return BlockPartition{d, m / d};
}

// ---------------------------------------------------------------------------
// Problems

struct SmvProblem {
  SensingOperator A;
  Eigen::VectorXd y;
  double noise_var = 0.0;  // lambda
};

inline SmvProblem make_smv_problem(SensingOperator A, Eigen::VectorXd y, double noise_var = 0.0) {
  if (y.size() != A.rows())
    throw DimensionError("measurement length " + std::to_string(y.size()) +
                         " does not match operator rows " + std::to_string(A.rows()));
  if (noise_var < 0.0) throw RangeError("negative noise variance");
  if (!y.allFinite()) throw InputError("measurements contain non-finite entries");
  return SmvProblem{std::move(A), std::move(y), noise_var};
}

struct MmvProblem {
  SensingOperator A;
  Eigen::MatrixXd Y;
  double noise_var = 0.0;

  Eigen::Index columns() const { return Y.cols(); }
};

inline MmvProblem make_mmv_problem(SensingOperator A, Eigen::MatrixXd Y, double noise_var = 0.0) {
  if (Y.rows() != A.rows())
    throw DimensionError("measurement rows " + std::to_string(Y.rows()) +
                         " do not match operator rows " + std::to_string(A.rows()));
  if (noise_var < 0.0) throw RangeError("negative noise variance");
  if (!Y.allFinite()) throw InputError("measurements contain non-finite entries");
  return MmvProblem{std::move(A), std::move(Y), noise_var};
}

// ---------------------------------------------------------------------------
// Solver knobs and results

struct SolverConfig {
  int max_iters = 400;
  double tol = 1e-8;              // stop when max |dgamma| / max gamma drops below
  double prune_threshold = 1e-8;  // gamma level below which a block is removed
  double p = 0.99;                // lp pseudonorm exponent, 0 < p <= 1
  int column_block = 1;           // columns processed together by MMV solvers
  std::vector<int> support_prior; // indices left unpenalized by the IRLS dual prior
  bool learn_intra_corr = true;
  bool learn_inter_corr = true;
  bool collect_trace = false;     // record per-iteration gamma / iterate snapshots
};

inline void validate_config(const SolverConfig& c) {
  if (c.max_iters < 1) throw RangeError("max_iters must be positive");
  if (!(c.tol > 0.0)) throw RangeError("tol must be positive");
  if (c.prune_threshold < 0.0) throw RangeError("prune threshold must be nonnegative");
  if (!(c.p > 0.0 && c.p <= 1.0)) throw RangeError("p must lie in (0, 1]");
  if (c.column_block < 1) throw RangeError("column block must be positive");
}

struct RecoveryResult {
  Eigen::MatrixXd estimate;        // M x 1 for SMV solvers, M x L for MMV solvers
  int iterations = 0;
  bool converged = false;
  double runtime_seconds = 0.0;
  std::vector<int> active_blocks;  // pruning solvers only
  bool all_pruned = false;

  // Filled only when SolverConfig::collect_trace is set.
  std::vector<Eigen::VectorXd> gamma_trace;
  std::vector<Eigen::MatrixXd> estimate_trace;
};

// ---------------------------------------------------------------------------
// Dimension arithmetic

// Measurement count for a subsampling ratio: round-half-up(ratio * M), clamped to [1, M].
inline int ratio_to_measurements(int m, const Rational& ratio) {
  if (m < 1) throw RangeError("signal dimension must be positive");
  if (ratio.num <= 0 || ratio.num > ratio.den)
    throw RangeError("subsampling ratio " + ratio.str() + " outside (0, 1]");
  const std::int64_t a = ratio.num * static_cast<std::int64_t>(m);
  const std::int64_t n = (2 * a + ratio.den) / (2 * ratio.den);
  if (n < 1) return 1;
  if (n > m) return m;
  return static_cast<int>(n);
}

namespace detail {

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// First pivot index at which an unblocked Cholesky of s fails, or -1 if none.
// Used only on the error path to report which pivot broke a factorization.
inline int first_bad_pivot(Eigen::MatrixXd s) {
  const Eigen::Index n = s.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(s(k, k) > 0.0)) return static_cast<int>(k);
    const double root = std::sqrt(s(k, k));
    s(k, k) = root;
    if (k + 1 < n) {
      s.col(k).tail(n - k - 1) /= root;
      s.bottomRightCorner(n - k - 1, n - k - 1).noalias() -=
          s.col(k).tail(n - k - 1) * s.col(k).tail(n - k - 1).transpose();
    }
  }
  return -1;
}

}  // namespace detail

// Number of candidate supports of size <= k: sum_{j=0..k} C(M, j), exact.
inline std::uint64_t search_space_size(int m, int k) {
  if (m < 1 || k < 0) throw RangeError("search_space_size needs M >= 1 and k >= 0");
  if (k > m) throw RangeError("sparsity " + std::to_string(k) + " exceeds dimension " + std::to_string(m));
  const unsigned __int128 cap = std::numeric_limits<std::uint64_t>::max();
  unsigned __int128 total = 0;
  unsigned __int128 binom = 1;  // C(m, 0)
  for (int j = 0;; ++j) {
    total += binom;
    if (total > cap) throw OverflowError("support count exceeds 64 bits for M=" + std::to_string(m) +
                                         ", k=" + std::to_string(k));
    if (j == k) break;
    binom = binom * static_cast<unsigned>(m - j) / static_cast<unsigned>(j + 1);
    if (binom > cap) throw OverflowError("binomial coefficient exceeds 64 bits for M=" +
                                         std::to_string(m) + ", k=" + std::to_string(k));
  }
  return static_cast<std::uint64_t>(total);
}

}  // namespace csr
