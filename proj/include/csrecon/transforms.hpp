#pragma once

// Per-line orthonormal DCT-II / inverse, analytic-signal envelope detection,
// log compression and B-mode image formation.

#include "csrecon/core.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <map>
#include <mutex>

namespace csr {

struct EnvelopeParams {
  // The log argument is floored at log_floor_rel * (max envelope of the image),
  // which keeps B-mode formation invariant under positive rescaling of the frame.
  double log_floor_rel = 1e-12;
  enum class Rescale { MinMax } rescale = Rescale::MinMax;
};

// Orthonormal DCT-II matrix, cached per size. dct_line(x) == dct_matrix(M) * x
// and the inverse is the transpose.
inline const Eigen::MatrixXd& dct_matrix(int m) {
  static std::map<int, Eigen::MatrixXd> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(m);
  if (it != cache.end()) return it->second;
  Eigen::MatrixXd c(m, m);
  const double s0 = std::sqrt(1.0 / m);
  const double s = std::sqrt(2.0 / m);
  for (int k = 0; k < m; ++k) {
    const double scale = k == 0 ? s0 : s;
    for (int n = 0; n < m; ++n)
      c(k, n) = scale * std::cos(M_PI * (2.0 * n + 1.0) * k / (2.0 * m));
  }
  return cache.emplace(m, std::move(c)).first->second;
}

inline Eigen::VectorXd dct_line(const Eigen::VectorXd& x) {
  if (x.size() < 1) throw InputError("dct of an empty vector");
  if (!x.allFinite()) throw InputError("dct input contains non-finite entries");
  return dct_matrix(static_cast<int>(x.size())) * x;
}

inline Eigen::VectorXd idct_line(const Eigen::VectorXd& c) {
  if (c.size() < 1) throw InputError("idct of an empty vector");
  if (!c.allFinite()) throw InputError("idct input contains non-finite entries");
  return dct_matrix(static_cast<int>(c.size())).transpose() * c;
}

inline Eigen::MatrixXd dct_columns(const Eigen::MatrixXd& frame) {
  if (frame.rows() < 1 || frame.cols() < 1) throw InputError("dct of an empty matrix");
  if (!frame.allFinite()) throw InputError("dct input contains non-finite entries");
  return dct_matrix(static_cast<int>(frame.rows())) * frame;
}

inline Eigen::MatrixXd idct_columns(const Eigen::MatrixXd& coeffs) {
  if (coeffs.rows() < 1 || coeffs.cols() < 1) throw InputError("idct of an empty matrix");
  if (!coeffs.allFinite()) throw InputError("idct input contains non-finite entries");
  return dct_matrix(static_cast<int>(coeffs.rows())).transpose() * coeffs;
}

// |analytic signal|: double the positive frequencies, zero the negative ones,
// keep DC (and Nyquist for even M) untouched.
inline Eigen::VectorXd hilbert_envelope(const Eigen::VectorXd& x) {
  const int m = static_cast<int>(x.size());
  if (m < 2) throw InputError("envelope needs at least two samples");
  if (!x.allFinite()) throw InputError("envelope input contains non-finite entries");

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  std::vector<double> time(x.data(), x.data() + m);
  fft.fwd(spectrum, time);

  const int half = m / 2;
  for (int k = 1; k < half; ++k) spectrum[k] *= 2.0;
  if (m % 2 == 1 && half >= 1) spectrum[half] *= 2.0;
  for (int k = half + 1; k < m; ++k) spectrum[k] = 0.0;

  std::vector<std::complex<double>> analytic;
  fft.inv(analytic, spectrum);

  Eigen::VectorXd env(m);
  for (int n = 0; n < m; ++n) env[n] = std::abs(analytic[n]);
  return env;
}

// Min-max rescale to [0,1]; a constant matrix maps to all zeros.
inline Eigen::MatrixXd minmax_rescale(const Eigen::MatrixXd& img) {
  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  if (!(hi > lo)) return Eigen::MatrixXd::Zero(img.rows(), img.cols());
  return (img.array() - lo) / (hi - lo);
}

// Envelope per line, 20*log10 compression, global min-max rescale.
inline BModeImage to_bmode(const RfFrame& frame, const EnvelopeParams& params = {}) {
  if (!(params.log_floor_rel > 0.0)) throw RangeError("log floor must be positive");
  const auto m = frame.depth();
  const auto l = frame.lines();
  Eigen::MatrixXd env(m, l);
  for (Eigen::Index j = 0; j < l; ++j) env.col(j) = hilbert_envelope(frame.samples.col(j));

  const double peak = env.maxCoeff();
  if (!(peak > 0.0)) return BModeImage{Eigen::MatrixXd::Zero(m, l)};

  const double floor = params.log_floor_rel * peak;
  const Eigen::MatrixXd log_img = 20.0 * (env.array() + floor).log10();
  return BModeImage{minmax_rescale(log_img)};
}

}  // namespace csr
