#pragma once

// Seeded synthetic data: block-sparse vectors, correlated MMV matrices and
// RF phantoms whose per-line DCT spectra decay rapidly.

#include "csrecon/core.hpp"
#include "csrecon/rng.hpp"

#include <cmath>

namespace csr {

// Zero vector except n_active uniformly chosen blocks, each filled with a
// zero-mean unit-variance AR(1) draw with coefficient intra_r.
inline Eigen::VectorXd gen_block_sparse(int m, int d, int n_active, double intra_r,
                                        std::uint32_t seed) {
  const BlockPartition part = make_block_partition(m, d);
  if (n_active < 0 || n_active > part.num_blocks)
    throw RangeError("active block count " + std::to_string(n_active) + " outside [0, " +
                     std::to_string(part.num_blocks) + "]");
  if (!(std::abs(intra_r) < 1.0)) throw RangeError("intra-block correlation must satisfy |r| < 1");

  SeededRng rng(seed);
  // Fisher-Yates prefix to pick the active blocks.
  std::vector<int> blocks(part.num_blocks);
  std::iota(blocks.begin(), blocks.end(), 0);
  for (int i = 0; i < n_active; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_index(part.num_blocks - i));
    std::swap(blocks[i], blocks[j]);
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  const double innov = std::sqrt(1.0 - intra_r * intra_r);
  for (int k = 0; k < n_active; ++k) {
    const int start = blocks[k] * d;
    x[start] = rng.normal();
    for (int t = 1; t < d; ++t) x[start + t] = intra_r * x[start + t - 1] + innov * rng.normal();
  }
  return x;
}

// Shared row support across L columns; each active row is an AR(1) sequence
// with coefficient inter_r.
inline Eigen::MatrixXd gen_correlated_mmv(int m, int l, int row_support_size, double inter_r,
                                          std::uint32_t seed) {
  if (m < 1 || l < 1) throw RangeError("matrix dimensions must be positive");
  if (row_support_size < 0 || row_support_size > m)
    throw RangeError("row support size " + std::to_string(row_support_size) + " outside [0, " +
                     std::to_string(m) + "]");
  if (!(std::abs(inter_r) < 1.0)) throw RangeError("inter-column correlation must satisfy |r| < 1");

  SeededRng rng(seed);
  std::vector<int> rows(m);
  std::iota(rows.begin(), rows.end(), 0);
  for (int i = 0; i < row_support_size; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_index(m - i));
    std::swap(rows[i], rows[j]);
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m, l);
  const double innov = std::sqrt(1.0 - inter_r * inter_r);
  for (int k = 0; k < row_support_size; ++k) {
    const int r = rows[k];
    x(r, 0) = rng.normal();
    for (int t = 1; t < l; ++t) x(r, t) = inter_r * x(r, t - 1) + innov * rng.normal();
  }
  return x;
}

// Gaussian-windowed sinusoid pulse. center_freq is in cycles per sample; the
// window spans pulse_cycles carrier periods with the +-3 sigma points at the
// ends.
inline Eigen::VectorXd phantom_pulse(int pulse_cycles, double center_freq) {
  if (pulse_cycles < 1) throw RangeError("pulse must span at least one cycle");
  if (!(center_freq > 0.0 && center_freq < 0.5))
    throw RangeError("center frequency must lie in (0, 0.5) cycles/sample");
  const int len = std::max(3, static_cast<int>(std::lround(pulse_cycles / center_freq)) | 1);
  const double center = (len - 1) / 2.0;
  const double sigma = len / 6.0;
  Eigen::VectorXd pulse(len);
  for (int n = 0; n < len; ++n) {
    const double t = n - center;
    pulse[n] = std::exp(-0.5 * t * t / (sigma * sigma)) * std::sin(2.0 * M_PI * center_freq * t);
  }
  return pulse;
}

// Synthetic RF frame: point scatterers with smooth lateral profiles across
// neighboring lines, convolved per line with the pulse. An empty medium (no
// scatterers) yields a zero frame; a single line collapses the lateral
// profile, so one scatterer on one line is an exact impulse.
inline RfFrame gen_phantom_rf(int m, int l, int n_scatterers, int pulse_cycles,
                              double center_freq, std::uint32_t seed) {
  if (m < 8 || l < 1) throw RangeError("phantom needs M >= 8 and L >= 1");
  if (n_scatterers < 0) throw RangeError("negative scatterer count");
  const Eigen::VectorXd pulse = phantom_pulse(pulse_cycles, center_freq);

  Eigen::MatrixXd reflect = Eigen::MatrixXd::Zero(m, l);
  SeededRng rng(seed);
  for (int s = 0; s < n_scatterers; ++s) {
    const int depth = static_cast<int>(rng.uniform_index(m));
    const double amp = rng.normal();
    const double lateral_center = rng.uniform() * l;
    const double lateral_width = 1.0 + 2.0 * rng.uniform();
    if (l == 1) {
      reflect(depth, 0) += amp;
      continue;
    }
    for (int j = 0; j < l; ++j) {
      const double dist = (j + 0.5 - lateral_center) / lateral_width;
      const double w = std::exp(-0.5 * dist * dist);
      if (w > 1e-6) reflect(depth, j) += amp * w;
    }
  }

  // 'same' convolution with the pulse, centered.
  Eigen::MatrixXd samples = Eigen::MatrixXd::Zero(m, l);
  const int len = static_cast<int>(pulse.size());
  const int offset = (len - 1) / 2;
  for (int j = 0; j < l; ++j)
    for (int i = 0; i < m; ++i) {
      const double r = reflect(i, j);
      if (r == 0.0) continue;
      const int lo = std::max(0, i - offset);
      const int hi = std::min(m - 1, i - offset + len - 1);
      for (int t = lo; t <= hi; ++t) samples(t, j) += r * pulse[t - i + offset];
    }

  std::string meta = "phantom M=" + std::to_string(m) + " L=" + std::to_string(l) +
                     " scatterers=" + std::to_string(n_scatterers) +
                     " cycles=" + std::to_string(pulse_cycles) + " seed=" + std::to_string(seed);
  return RfFrame{std::move(samples), std::move(meta)};
}

}  // namespace csr
