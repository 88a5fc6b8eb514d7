#pragma once

// File formats. All binary fields are little-endian; doubles are IEEE-754
// binary64.
//
//   frame (.rff):   "RFF1" | u32 M | u32 L | 4 zero bytes | M*L f64,
//                   line-major (line 0's M samples first)
//   measurements:   "CSM1" | u32 N | u32 M | u32 L | u32 seed | u32 scheme |
//                   u32 domain | N*L f64 column-major; the operator is
//                   regenerated from (N, M, seed, scheme), never stored
//   image (.pgm):   binary P5, maxval 255, pixel = round(255 * value)
//   matrix (.csv):  rows x columns, comma separated, round-trip precision

#include "csrecon/core.hpp"
#include "csrecon/sensing.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace csr {

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated file reading " + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_doubles(std::ostream& out, const double* data, std::size_t count) {
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

inline void read_doubles(std::istream& in, double* data, std::size_t count, const std::string& what) {
  if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8)))
    throw IoError("truncated file reading " + what);
}

inline std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

inline std::ifstream open_in(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// RF frames

inline void write_frame_rff(const RfFrame& frame, const std::string& path) {
  auto out = detail::open_out(path, true);
  out.write("RFF1", 4);
  detail::write_u32(out, static_cast<std::uint32_t>(frame.depth()));
  detail::write_u32(out, static_cast<std::uint32_t>(frame.lines()));
  detail::write_u32(out, 0);
  // column-major storage == line-major file order
  detail::write_doubles(out, frame.samples.data(), static_cast<std::size_t>(frame.samples.size()));
  if (!out) throw IoError("failed writing " + path);
}

inline RfFrame read_frame_rff(const std::string& path) {
  auto in = detail::open_in(path, true);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RFF1", 4) != 0)
    throw IoError(path + " is not an RFF1 frame file");
  const auto m = detail::read_u32(in, "frame depth");
  const auto l = detail::read_u32(in, "frame lines");
  detail::read_u32(in, "reserved field");
  if (m < 1 || l < 1 || m > (1u << 24) || l > (1u << 24))
    throw IoError(path + " has implausible dimensions");
  Eigen::MatrixXd samples(m, l);
  detail::read_doubles(in, samples.data(), static_cast<std::size_t>(samples.size()), "frame samples");
  return make_frame(std::move(samples), "file " + path);
}

// ---------------------------------------------------------------------------
// CSV matrices (frames and images share the layout)

inline void write_matrix_csv(const Eigen::MatrixXd& mat, const std::string& path) {
  auto out = detail::open_out(path, false);
  char buf[40];
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    for (Eigen::Index j = 0; j < mat.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", mat(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

inline Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  auto in = detail::open_in(path, false);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(path + ": unparseable value '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path + ": ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path + ": empty matrix");
  Eigen::MatrixXd mat(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) mat(i, j) = rows[i][j];
  return mat;
}

inline void write_frame_csv(const RfFrame& frame, const std::string& path) {
  write_matrix_csv(frame.samples, path);
}

inline RfFrame read_frame_csv(const std::string& path) {
  return make_frame(read_matrix_csv(path), "file " + path);
}

// Frame dispatch on extension: .rff binary, anything else CSV.
inline void write_frame(const RfFrame& frame, const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".rff") == 0)
    write_frame_rff(frame, path);
  else
    write_frame_csv(frame, path);
}

inline RfFrame read_frame(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".rff") == 0)
    return read_frame_rff(path);
  return read_frame_csv(path);
}

// ---------------------------------------------------------------------------
// Measurements

inline void write_measurements(const Measurements& meas, const std::string& path) {
  if (meas.scheme == SensingScheme::Custom)
    throw IoError("measurements with a custom operator cannot be persisted");
  auto out = detail::open_out(path, true);
  out.write("CSM1", 4);
  detail::write_u32(out, static_cast<std::uint32_t>(meas.rows()));
  detail::write_u32(out, static_cast<std::uint32_t>(meas.signal_dim));
  detail::write_u32(out, static_cast<std::uint32_t>(meas.columns()));
  detail::write_u32(out, meas.seed);
  detail::write_u32(out, static_cast<std::uint32_t>(meas.scheme));
  detail::write_u32(out, static_cast<std::uint32_t>(meas.domain));
  detail::write_doubles(out, meas.Y.data(), static_cast<std::size_t>(meas.Y.size()));
  if (!out) throw IoError("failed writing " + path);
}

inline Measurements read_measurements(const std::string& path) {
  auto in = detail::open_in(path, true);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "CSM1", 4) != 0)
    throw IoError(path + " is not a CSM1 measurements file");
  Measurements meas;
  const auto n = detail::read_u32(in, "measurement rows");
  const auto m = detail::read_u32(in, "signal dimension");
  const auto l = detail::read_u32(in, "column count");
  meas.seed = detail::read_u32(in, "seed");
  const auto scheme = detail::read_u32(in, "scheme id");
  const auto domain = detail::read_u32(in, "domain id");
  if (n < 1 || m < n || l < 1) throw IoError(path + " has inconsistent header dimensions");
  if (scheme != static_cast<std::uint32_t>(SensingScheme::GaussianInvN))
    throw IoError(path + " carries unknown operator scheme " + std::to_string(scheme));
  if (domain > 1) throw IoError(path + " carries unknown signal domain " + std::to_string(domain));
  meas.signal_dim = static_cast<int>(m);
  meas.scheme = static_cast<SensingScheme>(scheme);
  meas.domain = static_cast<SignalDomain>(domain);
  meas.Y.resize(n, l);
  detail::read_doubles(in, meas.Y.data(), static_cast<std::size_t>(meas.Y.size()), "measurements");
  return meas;
}

// ---------------------------------------------------------------------------
// 8-bit PGM images

inline void write_pgm(const BModeImage& image, const std::string& path) {
  auto out = detail::open_out(path, true);
  out << "P5\n" << image.pixels.cols() << ' ' << image.pixels.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < image.pixels.rows(); ++i)
    for (Eigen::Index j = 0; j < image.pixels.cols(); ++j) {
      const double v = image.pixels(i, j);
      const long q = std::lround(255.0 * (v < 0.0 ? 0.0 : v > 1.0 ? 1.0 : v));
      out.put(static_cast<char>(static_cast<unsigned char>(q)));
    }
  if (!out) throw IoError("failed writing " + path);
}

inline BModeImage read_pgm(const std::string& path) {
  auto in = detail::open_in(path, true);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError(path + " is not a binary PGM image");
  long w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  if (!in || w < 1 || h < 1 || maxval < 1 || maxval > 255)
    throw IoError(path + " has an unsupported PGM header");
  in.get();  // single whitespace after maxval
  Eigen::MatrixXd pixels(h, w);
  std::vector<unsigned char> row(static_cast<std::size_t>(w));
  for (long i = 0; i < h; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()), w)) throw IoError(path + " is truncated");
    for (long j = 0; j < w; ++j) pixels(i, j) = row[static_cast<std::size_t>(j)] / static_cast<double>(maxval);
  }
  return BModeImage{std::move(pixels)};
}

// Image dispatch on extension: .pgm binary, anything else CSV of raw values.
inline void write_image(const BModeImage& image, const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0)
    write_pgm(image, path);
  else
    write_matrix_csv(image.pixels, path);
}

inline BModeImage read_image(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0) return read_pgm(path);
  return BModeImage{read_matrix_csv(path)};
}

}  // namespace csr
