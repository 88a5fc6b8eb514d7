#pragma once

// Seeded Gaussian sensing operators and the line-wise compressive
// acquisition: per-line DCT followed by projection onto the operator.

#include "csrecon/core.hpp"
#include "csrecon/rng.hpp"
#include "csrecon/transforms.hpp"

#include <cmath>

namespace csr {

enum class SignalDomain : std::uint32_t {
  DctOfRf = 0,      // raw RF was transformed; display steps apply on reconstruction
  DctOfDisplay = 1  // pre-compressed image was transformed; display steps are skipped
};

struct Measurements {
  Eigen::MatrixXd Y;  // N x L
  int signal_dim = 0; // M of the operator that produced Y
  std::uint32_t seed = 0;
  SensingScheme scheme = SensingScheme::GaussianInvN;
  SignalDomain domain = SignalDomain::DctOfRf;

  Eigen::Index rows() const { return Y.rows(); }
  Eigen::Index columns() const { return Y.cols(); }
};

// iid N(0, 1/N) entries, filled column-major from the seeded stream.
inline SensingOperator make_gaussian_operator(int n, int m, std::uint32_t seed) {
  if (n < 1 || m < 1) throw RangeError("operator needs positive dimensions");
  if (n > m)
    throw DimensionError("operator rows " + std::to_string(n) + " exceed columns " + std::to_string(m));
  SeededRng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd a(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) a(i, j) = scale * rng.normal();
  return SensingOperator{std::move(a), seed, SensingScheme::GaussianInvN};
}

inline SensingOperator regenerate_operator(const Measurements& meas) {
  if (meas.scheme != SensingScheme::GaussianInvN)
    throw IoError("measurements carry a non-regenerable operator scheme");
  return make_gaussian_operator(static_cast<int>(meas.rows()), meas.signal_dim, meas.seed);
}

// Column j of the result is A * dct(line j). Optional additive measurement
// noise (standard deviation noise_std) from a stream derived off noise_seed.
inline Measurements sense_frame(const RfFrame& frame, const SensingOperator& A,
                                SignalDomain domain = SignalDomain::DctOfRf,
                                double noise_std = 0.0, std::uint32_t noise_seed = 0) {
  if (frame.depth() != A.cols())
    throw DimensionError("frame depth " + std::to_string(frame.depth()) +
                         " does not match operator columns " + std::to_string(A.cols()));
  if (noise_std < 0.0) throw RangeError("negative noise level");
  Eigen::MatrixXd y = A.matrix * dct_columns(frame.samples);
  if (noise_std > 0.0) {
    SeededRng rng(derive_seed(noise_seed, 0xAD0153));
    for (Eigen::Index j = 0; j < y.cols(); ++j)
      for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, j) += noise_std * rng.normal();
  }
  return Measurements{std::move(y), static_cast<int>(A.cols()), A.seed, A.scheme, domain};
}

// Per-column inverse DCT of recovered coefficients; the raw reconstruction.
inline RfFrame inverse_transform(const Eigen::MatrixXd& coeffs, std::string meta = "") {
  if (!coeffs.allFinite()) throw InputError("coefficients contain non-finite entries");
  return RfFrame{idct_columns(coeffs), std::move(meta)};
}

// Display-ready reconstruction: B-mode formation for RF-domain coefficients,
// plain min-max rescale for pre-compressed ones.
inline BModeImage reconstruct_frame(const Eigen::MatrixXd& coeffs, SignalDomain domain,
                                    const EnvelopeParams& params = {}) {
  RfFrame raw = inverse_transform(coeffs);
  if (domain == SignalDomain::DctOfRf) return to_bmode(raw, params);
  return BModeImage{minmax_rescale(raw.samples)};
}

}  // namespace csr
