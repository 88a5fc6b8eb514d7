#pragma once

// Experiment runner: builds operators per subsampling ratio, senses a frame,
// recovers it line by line (or column-group-wise) with each configured
// solver, and reports PSNR / timing rows as CSV.

#include "csrecon/core.hpp"
#include "csrecon/greedy.hpp"
#include "csrecon/io.hpp"
#include "csrecon/irls.hpp"
#include "csrecon/metrics.hpp"
#include "csrecon/sbl.hpp"
#include "csrecon/sensing.hpp"
#include "csrecon/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace csr {

struct PhantomSpec {
  int depth = 512;
  int lines = 64;
  int scatterers = 40;
  int pulse_cycles = 10;
  double center_freq = 0.25;
  std::uint32_t seed = 0;

  std::string id() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "phantom-d%d-l%d-s%d-c%d-f%g-seed%u", depth, lines, scatterers,
                  pulse_cycles, center_freq, seed);
    return buf;
  }
};

struct SolverEntry {
  std::string id;
  std::map<std::string, std::string> params;
};

struct ExperimentSpec {
  int spec_version = 1;
  std::string input_path;  // empty: generate the phantom below
  PhantomSpec phantom;
  std::vector<Rational> ratios;
  std::vector<SolverEntry> solvers;
  std::uint32_t seed = 0;
  SignalDomain psnr_domain = SignalDomain::DctOfRf;
  double noise_var = 1e-8;      // lambda handed to the solvers
  double sense_noise_std = 0.0; // optional additive measurement noise
  std::string output_csv;
  int threads = 1;
  bool with_timing = true;
};

struct BenchRow {
  std::string image;
  std::string solver;
  std::string params;
  Psnr quality;
  bool failed = false;
  double runtime_s = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  bool with_timing = true;

  std::string to_csv() const;
  std::string summary() const;
};

inline const std::set<std::string>& registered_solvers() {
  static const std::set<std::string> ids = {"bsbl-em", "bsbl-bo", "st-sbl", "t-msbl",
                                            "irls",    "irls-dual", "l1",   "birls",
                                            "mfocuss", "bomp",    "ksparse", "l0"};
  return ids;
}

namespace detail {

inline const std::map<std::string, std::set<std::string>>& solver_param_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"bsbl-em", {"block", "prune", "max-iters", "tol"}},
      {"bsbl-bo", {"block", "prune", "max-iters", "tol"}},
      {"st-sbl", {"block", "col-block", "prune", "max-iters", "tol"}},
      {"t-msbl", {"col-block", "prune", "max-iters", "tol"}},
      {"irls", {"p", "max-iters"}},
      {"irls-dual", {"p", "support-size", "max-iters"}},
      {"l1", {"max-iters"}},
      {"birls", {"block", "p", "max-iters"}},
      {"mfocuss", {"col-block", "p", "max-iters"}},
      {"bomp", {"block", "k-blocks"}},
      {"ksparse", {"k"}},
      {"l0", {"k-max"}},
  };
  return keys;
}

inline void validate_solver_entry(const SolverEntry& entry) {
  if (registered_solvers().count(entry.id) == 0)
    throw RangeError("unknown solver id '" + entry.id + "'");
  const auto& allowed = solver_param_keys().at(entry.id);
  for (const auto& [key, value] : entry.params)
    if (allowed.count(key) == 0)
      throw RangeError("solver '" + entry.id + "' does not take parameter '" + key + "'");
}

inline int param_int(const SolverEntry& e, const std::string& key, int fallback) {
  const auto it = e.params.find(key);
  if (it == e.params.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw RangeError("solver '" + e.id + "': bad integer for " + key + ": " + it->second);
  }
}

inline double param_double(const SolverEntry& e, const std::string& key, double fallback) {
  const auto it = e.params.find(key);
  if (it == e.params.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw RangeError("solver '" + e.id + "': bad number for " + key + ": " + it->second);
  }
}

inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Run fn(0..n-1) on up to `threads` workers. Tasks own disjoint output
// slices, so results do not depend on the schedule.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  const int workers = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

// Indices of the s largest-magnitude entries, ties broken by lowest index.
inline std::vector<int> top_magnitude_indices(const Eigen::VectorXd& c, int s) {
  std::vector<int> order(static_cast<std::size_t>(c.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&c](int i, int j) { return std::abs(c[i]) > std::abs(c[j]); });
  order.resize(static_cast<std::size_t>(std::min<Eigen::Index>(s, c.size())));
  std::sort(order.begin(), order.end());
  return order;
}

struct SolverRun {
  Eigen::MatrixXd coeffs;
  int iterations = 0;
  bool converged = true;
  double seconds = 0.0;
  bool failed = false;
  std::string params_string;
};

// Recover all columns of Y with one solver entry. Per-line solvers fan out
// over lines, MMV solvers over column groups.
inline SolverRun run_solver_entry(const SolverEntry& entry, const SensingOperator& op,
                                  const Eigen::MatrixXd& y, const Eigen::MatrixXd& true_coeffs,
                                  double noise_var, const Rational& ratio, int threads) {
  validate_solver_entry(entry);
  const int m = static_cast<int>(op.cols());
  const int n = static_cast<int>(op.rows());
  const int l = static_cast<int>(y.cols());

  SolverConfig config;
  config.max_iters = param_int(entry, "max-iters", 400);
  config.tol = param_double(entry, "tol", 1e-8);
  config.prune_threshold = param_double(entry, "prune", 1e-8);
  const int block = param_int(entry, "block", 32);
  const double p = param_double(entry, "p", 0.99);
  const int default_support = std::max(1, n / 4);
  const int support_size = param_int(entry, "support-size", default_support);
  const int k_default = (n + 1) / 2;
  const int k = param_int(entry, "k", k_default);
  const int k_blocks_default = std::max(1, (support_size + block / 2) / std::max(1, block));
  const int k_blocks = param_int(entry, "k-blocks", k_blocks_default);
  const int k_max = param_int(entry, "k-max", 2);
  int col_block = param_int(entry, "col-block", entry.id == "st-sbl" ? 1 : l);
  if (col_block < 1 || col_block > l) col_block = l;
  if (entry.id == "st-sbl" && l % col_block != 0)
    throw DimensionError("column block " + std::to_string(col_block) +
                         " does not divide line count " + std::to_string(l));
  config.column_block = col_block;

  // Canonical parameter echo: ratio first, then the resolved knobs this
  // solver actually honors, alphabetically.
  std::map<std::string, std::string> echo;
  const auto& allowed = solver_param_keys().at(entry.id);
  if (allowed.count("block")) echo["block"] = std::to_string(block);
  if (allowed.count("col-block")) echo["col-block"] = std::to_string(col_block);
  if (allowed.count("prune")) echo["prune"] = format_g(config.prune_threshold);
  if (allowed.count("p") && entry.id != "l1") echo["p"] = format_g(p);
  if (allowed.count("support-size")) echo["support-size"] = std::to_string(support_size);
  if (allowed.count("k")) echo["k"] = std::to_string(k);
  if (allowed.count("k-blocks")) echo["k-blocks"] = std::to_string(k_blocks);
  if (allowed.count("k-max")) echo["k-max"] = std::to_string(k_max);
  std::string params_string = "ratio=" + ratio.str();
  for (const auto& [key, value] : echo) params_string += ";" + key + "=" + value;

  SolverRun run;
  run.params_string = std::move(params_string);
  run.coeffs = Eigen::MatrixXd::Zero(m, l);

  const bool per_line = entry.id != "st-sbl" && entry.id != "t-msbl" && entry.id != "mfocuss";
  const int group = per_line ? 1 : col_block;
  const int tasks = l / group + (l % group ? 1 : 0);

  std::vector<RecoveryResult> outcomes(static_cast<std::size_t>(tasks));
  std::vector<char> task_failed(static_cast<std::size_t>(tasks), 0);

  parallel_for(tasks, threads, [&](int t) {
    const int start = t * group;
    const int width = std::min(group, l - start);
    try {
      RecoveryResult r;
      if (per_line) {
        SmvProblem prob = make_smv_problem(op, y.col(start), noise_var);
        if (entry.id == "bsbl-em") {
          r = bsbl_em(prob, make_block_partition(m, block), config);
        } else if (entry.id == "bsbl-bo") {
          r = bsbl_bo(prob, make_block_partition(m, block), config);
        } else if (entry.id == "l1") {
          r = irls_lp(prob, 1.0, {}, config);
        } else if (entry.id == "irls") {
          r = irls_lp(prob, p, {}, config);
        } else if (entry.id == "irls-dual") {
          r = irls_lp(prob, p, top_magnitude_indices(true_coeffs.col(start), support_size), config);
        } else if (entry.id == "birls") {
          r = birls(prob, p, make_block_partition(m, block), config);
        } else if (entry.id == "bomp") {
          r = bomp(prob, make_block_partition(m, block), k_blocks);
        } else if (entry.id == "l0") {
          r = l0_bruteforce(prob, k_max);
        } else {  // ksparse
          const auto t0 = std::chrono::steady_clock::now();
          r.estimate = ksparse_approx(true_coeffs.col(start), std::min(k, m));
          r.iterations = 1;
          r.converged = true;
          r.runtime_seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
      } else {
        SolverConfig group_config = config;
        group_config.column_block = width;  // tail group may be narrower
        MmvProblem prob = make_mmv_problem(op, y.middleCols(start, width), noise_var);
        if (entry.id == "st-sbl") {
          r = st_sbl(prob, make_block_partition(m, block), group_config);
        } else if (entry.id == "t-msbl") {
          r = t_msbl(prob, group_config);
        } else {  // mfocuss
          r = mfocuss(prob, p, group_config);
        }
      }
      outcomes[static_cast<std::size_t>(t)] = std::move(r);
    } catch (const std::exception&) {
      task_failed[static_cast<std::size_t>(t)] = 1;
    }
  });

  for (int t = 0; t < tasks; ++t) {
    if (task_failed[static_cast<std::size_t>(t)]) {
      run.failed = true;
      continue;
    }
    const auto& r = outcomes[static_cast<std::size_t>(t)];
    const int start = t * group;
    run.coeffs.middleCols(start, r.estimate.cols()) = r.estimate;
    run.iterations = std::max(run.iterations, r.iterations);
    run.converged = run.converged && r.converged;
    run.seconds += r.runtime_seconds;
  }
  // The failure convention of the reports: a method that returns only zeros
  // against nonzero measurements has failed.
  if (!run.failed && run.coeffs.isZero(0.0) && !y.isZero(0.0)) run.failed = true;
  if (run.failed) run.converged = false;
  return run;
}

}  // namespace detail

inline ExperimentSpec parse_spec_text(std::istream& in, const std::string& origin) {
  ExperimentSpec spec;
  bool saw_version = false;
  bool saw_input = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    auto need_value = [&](const std::string& what) {
      std::string v;
      if (!(ss >> v)) throw IoError(where + ": " + what + " needs a value");
      return v;
    };
    if (key == "spec_version") {
      const std::string v = need_value("spec_version");
      if (v != "1") throw IoError(where + ": unsupported spec_version " + v);
      saw_version = true;
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint32_t>(std::stoul(need_value("seed")));
    } else if (key == "threads") {
      spec.threads = std::stoi(need_value("threads"));
    } else if (key == "noise_var") {
      spec.noise_var = std::stod(need_value("noise_var"));
    } else if (key == "sense_noise_std") {
      spec.sense_noise_std = std::stod(need_value("sense_noise_std"));
    } else if (key == "psnr_domain") {
      const std::string v = need_value("psnr_domain");
      if (v == "bmode")
        spec.psnr_domain = SignalDomain::DctOfRf;
      else if (v == "raw-rescaled")
        spec.psnr_domain = SignalDomain::DctOfDisplay;
      else
        throw IoError(where + ": psnr_domain must be bmode or raw-rescaled, got " + v);
    } else if (key == "timing") {
      const std::string v = need_value("timing");
      if (v == "wall")
        spec.with_timing = true;
      else if (v == "none")
        spec.with_timing = false;
      else
        throw IoError(where + ": timing must be wall or none, got " + v);
    } else if (key == "input") {
      spec.input_path = need_value("input");
      saw_input = true;
    } else if (key == "output") {
      spec.output_csv = need_value("output");
    } else if (key == "ratio") {
      spec.ratios.push_back(parse_rational(need_value("ratio")));
    } else if (key == "phantom") {
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw IoError(where + ": phantom expects key=value, got " + kv);
        const std::string k = kv.substr(0, eq);
        const std::string v = kv.substr(eq + 1);
        if (k == "depth") spec.phantom.depth = std::stoi(v);
        else if (k == "lines") spec.phantom.lines = std::stoi(v);
        else if (k == "scatterers") spec.phantom.scatterers = std::stoi(v);
        else if (k == "pulse-cycles") spec.phantom.pulse_cycles = std::stoi(v);
        else if (k == "center-freq") spec.phantom.center_freq = std::stod(v);
        else if (k == "seed") spec.phantom.seed = static_cast<std::uint32_t>(std::stoul(v));
        else throw IoError(where + ": unknown phantom key " + k);
      }
      saw_input = true;
    } else if (key == "solver") {
      SolverEntry entry;
      entry.id = need_value("solver id");
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw IoError(where + ": solver parameters expect key=value, got " + kv);
        entry.params[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      detail::validate_solver_entry(entry);
      spec.solvers.push_back(std::move(entry));
    } else {
      throw IoError(where + ": unknown key '" + key + "'");
    }
  }
  if (!saw_version) throw IoError(origin + ": missing spec_version");
  if (!saw_input) throw IoError(origin + ": missing input or phantom");
  if (spec.ratios.empty()) throw IoError(origin + ": no subsampling ratios");
  if (spec.solvers.empty()) throw IoError(origin + ": no solvers");
  return spec;
}

inline ExperimentSpec parse_spec_file(const std::string& path) {
  auto in = detail::open_in(path, false);
  return parse_spec_text(in, path);
}

inline BenchReport run_benchmark(const ExperimentSpec& spec) {
  for (const auto& entry : spec.solvers) detail::validate_solver_entry(entry);
  for (const auto& ratio : spec.ratios)
    if (ratio.num <= 0 || ratio.num > ratio.den)
      throw RangeError("subsampling ratio " + ratio.str() + " outside (0, 1]");

  RfFrame frame = spec.input_path.empty()
                      ? gen_phantom_rf(spec.phantom.depth, spec.phantom.lines,
                                       spec.phantom.scatterers, spec.phantom.pulse_cycles,
                                       spec.phantom.center_freq, spec.phantom.seed)
                      : read_frame(spec.input_path);
  const std::string image_id = spec.input_path.empty() ? spec.phantom.id() : spec.input_path;
  const int m = static_cast<int>(frame.depth());

  const Eigen::MatrixXd true_coeffs = dct_columns(frame.samples);
  const Eigen::MatrixXd reference = spec.psnr_domain == SignalDomain::DctOfRf
                                        ? to_bmode(frame).pixels
                                        : minmax_rescale(frame.samples);

  BenchReport report;
  report.with_timing = spec.with_timing;
  for (const auto& ratio : spec.ratios) {
    const int n = ratio_to_measurements(m, ratio);
    const SensingOperator op = make_gaussian_operator(n, m, spec.seed);
    const Measurements meas =
        sense_frame(frame, op, spec.psnr_domain, spec.sense_noise_std, spec.seed);

    for (const auto& entry : spec.solvers) {
      BenchRow row;
      row.image = image_id;
      row.solver = entry.id;
      try {
        auto run = detail::run_solver_entry(entry, op, meas.Y, true_coeffs, spec.noise_var, ratio,
                                            spec.threads);
        row.params = run.params_string;
        row.failed = run.failed;
        row.iterations = run.iterations;
        row.converged = run.converged;
        row.runtime_s = run.seconds;
        const Eigen::MatrixXd estimate_img = spec.psnr_domain == SignalDomain::DctOfRf
                                                 ? to_bmode(inverse_transform(run.coeffs)).pixels
                                                 : minmax_rescale(idct_columns(run.coeffs));
        row.quality = psnr(estimate_img, reference);
      } catch (const std::exception&) {
        row.params = "ratio=" + ratio.str();
        for (const auto& [key, value] : entry.params) row.params += ";" + key + "=" + value;
        row.failed = true;
      }
      report.rows.push_back(std::move(row));
    }
  }

  std::sort(report.rows.begin(), report.rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.image, a.solver, a.params) < std::tie(b.image, b.solver, b.params);
  });
  return report;
}

inline std::string BenchReport::to_csv() const {
  std::string out = "image,solver,params,psnr_db,exact,runtime_s,iterations,converged\n";
  char buf[64];
  for (const auto& row : rows) {
    out += row.image + ',' + row.solver + ',' + row.params + ',';
    if (row.failed) {
      out += "FAIL,0,";
    } else if (row.quality.exact) {
      out += "inf,1,";
    } else {
      std::snprintf(buf, sizeof buf, "%.6f", row.quality.db);
      out += buf;
      out += ",0,";
    }
    std::snprintf(buf, sizeof buf, "%.6f", with_timing ? row.runtime_s : 0.0);
    out += buf;
    out += ',' + std::to_string(row.iterations) + ',' + (row.converged ? "1" : "0") + '\n';
  }
  return out;
}

// Per-solver means over finite rows; failed and exact-match rows are listed
// separately so downstream averaging can treat them explicitly.
inline std::string BenchReport::summary() const {
  struct Acc {
    double sum = 0.0;
    int finite = 0, failed = 0, exact = 0;
  };
  std::map<std::string, Acc> by_solver;
  for (const auto& row : rows) {
    auto& acc = by_solver[row.solver];
    if (row.failed)
      ++acc.failed;
    else if (row.quality.exact)
      ++acc.exact;
    else {
      acc.sum += row.quality.db;
      ++acc.finite;
    }
  }
  std::string out = "solver            mean_psnr_db  rows  failed  exact\n";
  char buf[128];
  for (const auto& [id, acc] : by_solver) {
    if (acc.finite > 0)
      std::snprintf(buf, sizeof buf, "%-17s %12.2f %5d %7d %6d\n", id.c_str(),
                    acc.sum / acc.finite, acc.finite + acc.failed + acc.exact, acc.failed,
                    acc.exact);
    else
      std::snprintf(buf, sizeof buf, "%-17s %12s %5d %7d %6d\n", id.c_str(), "-",
                    acc.finite + acc.failed + acc.exact, acc.failed, acc.exact);
    out += buf;
  }
  return out;
}

}  // namespace csr
