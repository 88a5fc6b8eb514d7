#pragma once

// Reconstruction quality metrics for [0,1] images.

#include "csrecon/core.hpp"

#include <cmath>

namespace csr {

struct Psnr {
  double db = 0.0;
  bool exact = false;  // mean squared error at machine-roundoff level
};

// MSE below this is indistinguishable from an exact reconstruction of a
// [0,1] image (RMS 1e-12); such rows are flagged instead of reporting a
// meaningless >240 dB figure.
inline constexpr double kExactMse = 1e-24;

// 20 log10(MAX) - 10 log10(MSE) with MAX = 1 for [0,1] images. A vanishing
// MSE is reported as an exact match rather than a floating infinity.
inline Psnr psnr(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& reference) {
  if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols())
    throw DimensionError("image shapes differ: " + std::to_string(estimate.rows()) + "x" +
                         std::to_string(estimate.cols()) + " vs " +
                         std::to_string(reference.rows()) + "x" +
                         std::to_string(reference.cols()));
  const double mse = (estimate - reference).squaredNorm() /
                     static_cast<double>(estimate.size());
  if (mse <= kExactMse) return Psnr{0.0, true};
  return Psnr{-10.0 * std::log10(mse), false};
}

inline Psnr psnr(const BModeImage& estimate, const BModeImage& reference) {
  return psnr(estimate.pixels, reference.pixels);
}

}  // namespace csr
