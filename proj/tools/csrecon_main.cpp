// Command line front end: phantom generation, sensing, recovery, the
// benchmark runner and PSNR evaluation.

#include "csrecon/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int run_phantom(const csr::PhantomSpec& phantom, const std::string& output) {
  const csr::RfFrame frame =
      csr::gen_phantom_rf(phantom.depth, phantom.lines, phantom.scatterers, phantom.pulse_cycles,
                          phantom.center_freq, phantom.seed);
  csr::write_frame(frame, output);
  std::cout << phantom.id() << " -> " << output << "\n";
  return 0;
}

int run_sense(const std::string& input, const std::string& ratio_text, std::uint32_t seed,
              const std::string& domain_text, double noise_std, const std::string& output) {
  const csr::RfFrame frame = csr::read_frame(input);
  const csr::Rational ratio = csr::parse_rational(ratio_text);
  const int m = static_cast<int>(frame.depth());
  const int n = csr::ratio_to_measurements(m, ratio);
  const csr::SignalDomain domain = domain_text == "display" ? csr::SignalDomain::DctOfDisplay
                                                            : csr::SignalDomain::DctOfRf;
  const csr::SensingOperator op = csr::make_gaussian_operator(n, m, seed);
  const csr::Measurements meas = csr::sense_frame(frame, op, domain, noise_std, seed);
  csr::write_measurements(meas, output);
  std::cout << "sensed " << input << " at " << ratio.str() << " (N=" << n << ", M=" << m
            << ", seed=" << seed << ") -> " << output << "\n";
  return 0;
}

int run_recover(const std::string& input, csr::SolverEntry entry, double noise_var, int threads,
                const std::string& truth_path, const std::string& out_frame,
                const std::string& out_image, const std::string& trace_path) {
  const csr::Measurements meas = csr::read_measurements(input);
  const csr::SensingOperator op = csr::regenerate_operator(meas);
  const int m = meas.signal_dim;
  const int l = static_cast<int>(meas.columns());

  Eigen::MatrixXd true_coeffs = Eigen::MatrixXd::Zero(m, l);
  const bool needs_truth = entry.id == "ksparse" || entry.id == "irls-dual";
  if (!truth_path.empty()) {
    const csr::RfFrame truth = csr::read_frame(truth_path);
    if (truth.depth() != m || truth.lines() != l)
      throw csr::DimensionError("truth frame shape does not match the measurements");
    true_coeffs = csr::dct_columns(truth.samples);
  } else if (needs_truth) {
    throw csr::RangeError("solver '" + entry.id + "' needs --truth to derive its oracle inputs");
  }

  const csr::Rational full{1, 1};
  const auto run = csr::detail::run_solver_entry(entry, op, meas.Y, true_coeffs, noise_var, full,
                                                 threads);
  if (run.failed) {
    std::cout << "recovery FAILED (" << entry.id << ")\n";
    return 1;
  }

  if (!out_frame.empty()) csr::write_frame(csr::inverse_transform(run.coeffs), out_frame);
  if (!out_image.empty())
    csr::write_image(csr::reconstruct_frame(run.coeffs, meas.domain), out_image);

  if (!trace_path.empty()) {
    // gamma iterates of the first line/group, one row per iteration
    csr::SolverConfig config;
    config.collect_trace = true;
    config.prune_threshold = csr::detail::param_double(entry, "prune", 1e-8);
    const int block = csr::detail::param_int(entry, "block", 32);
    csr::RecoveryResult traced;
    if (entry.id == "bsbl-em")
      traced = csr::bsbl_em(csr::make_smv_problem(op, meas.Y.col(0), noise_var),
                            csr::make_block_partition(m, block), config);
    else if (entry.id == "bsbl-bo")
      traced = csr::bsbl_bo(csr::make_smv_problem(op, meas.Y.col(0), noise_var),
                            csr::make_block_partition(m, block), config);
    else if (entry.id == "st-sbl") {
      config.column_block = std::min<int>(csr::detail::param_int(entry, "col-block", 1), l);
      traced = csr::st_sbl(csr::make_mmv_problem(op, meas.Y.leftCols(config.column_block),
                                                 noise_var),
                           csr::make_block_partition(m, block), config);
    } else if (entry.id == "t-msbl") {
      traced = csr::t_msbl(csr::make_mmv_problem(op, meas.Y, noise_var), config);
    } else {
      throw csr::RangeError("--trace-gamma applies to the Bayesian solvers only");
    }
    Eigen::MatrixXd trace(static_cast<Eigen::Index>(traced.gamma_trace.size()),
                          traced.gamma_trace.empty() ? 0 : traced.gamma_trace.front().size());
    for (std::size_t i = 0; i < traced.gamma_trace.size(); ++i)
      trace.row(static_cast<Eigen::Index>(i)) = traced.gamma_trace[i].transpose();
    csr::write_matrix_csv(trace, trace_path);
  }

  std::cout << "recovered " << l << " lines with " << entry.id << " (" << run.params_string
            << "), iterations=" << run.iterations << ", converged=" << run.converged << "\n";
  if (!truth_path.empty()) {
    const csr::RfFrame truth = csr::read_frame(truth_path);
    const Eigen::MatrixXd ref = meas.domain == csr::SignalDomain::DctOfRf
                                    ? csr::to_bmode(truth).pixels
                                    : csr::minmax_rescale(truth.samples);
    const auto q = csr::psnr(csr::reconstruct_frame(run.coeffs, meas.domain).pixels, ref);
    if (q.exact)
      std::cout << "psnr: exact match\n";
    else
      std::cout << "psnr: " << q.db << " dB\n";
  }
  return 0;
}

int run_bench(const std::string& spec_path, const std::vector<std::string>& ratio_override,
              int threads_override, long long seed_override, const std::string& domain_override,
              const std::string& output_override, bool no_timing) {
  csr::ExperimentSpec spec = csr::parse_spec_file(spec_path);
  if (!ratio_override.empty()) {
    spec.ratios.clear();
    for (const auto& r : ratio_override) spec.ratios.push_back(csr::parse_rational(r));
  }
  if (threads_override > 0) spec.threads = threads_override;
  if (seed_override >= 0) spec.seed = static_cast<std::uint32_t>(seed_override);
  if (!domain_override.empty())
    spec.psnr_domain = domain_override == "raw-rescaled" ? csr::SignalDomain::DctOfDisplay
                                                         : csr::SignalDomain::DctOfRf;
  if (!output_override.empty()) spec.output_csv = output_override;
  if (no_timing) spec.with_timing = false;

  const csr::BenchReport report = csr::run_benchmark(spec);
  const std::string csv = report.to_csv();
  if (spec.output_csv.empty()) {
    std::cout << csv;
  } else {
    auto out = csr::detail::open_out(spec.output_csv, false);
    out << csv;
    if (!out) throw csr::IoError("failed writing " + spec.output_csv);
    std::cout << report.rows.size() << " rows -> " << spec.output_csv << "\n";
  }
  std::cout << "\n" << report.summary();
  return 0;
}

int run_psnr(const std::string& estimate_path, const std::string& reference_path) {
  const csr::BModeImage est = csr::read_image(estimate_path);
  const csr::BModeImage ref = csr::read_image(reference_path);
  const auto q = csr::psnr(est, ref);
  if (q.exact)
    std::cout << "exact\n";
  else
    std::cout << q.db << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed-sensing recovery bench for line-structured RF frames"};
  app.require_subcommand(1);

  // phantom
  csr::PhantomSpec phantom;
  std::string phantom_out;
  auto* cmd_phantom = app.add_subcommand("phantom", "generate a synthetic RF frame");
  cmd_phantom->add_option("--depth", phantom.depth, "samples per line");
  cmd_phantom->add_option("--lines", phantom.lines, "number of scan lines");
  cmd_phantom->add_option("--scatterers", phantom.scatterers, "number of point scatterers");
  cmd_phantom->add_option("--pulse-cycles", phantom.pulse_cycles, "carrier cycles in the pulse");
  cmd_phantom->add_option("--center-freq", phantom.center_freq,
                          "pulse center frequency, cycles/sample");
  cmd_phantom->add_option("--seed", phantom.seed, "generator seed");
  cmd_phantom->add_option("--output", phantom_out, "output frame (.rff or .csv)")->required();

  // sense
  std::string sense_in, sense_ratio = "1/2", sense_domain = "rf", sense_out;
  std::uint32_t sense_seed = 0;
  double sense_noise = 0.0;
  auto* cmd_sense = app.add_subcommand("sense", "compressively sense a frame");
  cmd_sense->add_option("--input", sense_in, "frame file")->required();
  cmd_sense->add_option("--ratio", sense_ratio, "subsampling ratio, e.g. 1/3");
  cmd_sense->add_option("--seed", sense_seed, "operator seed");
  cmd_sense->add_option("--domain", sense_domain, "signal domain: rf or display")
      ->check(CLI::IsMember({"rf", "display"}));
  cmd_sense->add_option("--noise-std", sense_noise, "additive measurement noise level");
  cmd_sense->add_option("--output", sense_out, "measurements file")->required();

  // recover
  std::string rec_in, rec_solver = "bsbl-bo", rec_truth, rec_frame_out, rec_image_out, rec_trace;
  int rec_block = 32, rec_colb = 0, rec_support = 0, rec_k = 0, rec_kblocks = 0, rec_kmax = 0;
  int rec_threads = 1, rec_maxiters = 0;
  double rec_prune = -1.0, rec_p = -1.0, rec_noise = 1e-8;
  auto* cmd_recover = app.add_subcommand("recover", "reconstruct a frame from measurements");
  cmd_recover->add_option("--input", rec_in, "measurements file")->required();
  cmd_recover->add_option("--solver", rec_solver, "solver id");
  cmd_recover->add_option("--block-size", rec_block, "block length d");
  cmd_recover->add_option("--col-block", rec_colb, "columns processed together");
  cmd_recover->add_option("--prune", rec_prune, "block pruning threshold");
  cmd_recover->add_option("--p", rec_p, "lp exponent");
  cmd_recover->add_option("--support-size", rec_support, "dual-prior support size");
  cmd_recover->add_option("--k", rec_k, "k-term count");
  cmd_recover->add_option("--k-blocks", rec_kblocks, "greedy block selections");
  cmd_recover->add_option("--k-max", rec_kmax, "exhaustive search sparsity bound");
  cmd_recover->add_option("--max-iters", rec_maxiters, "iteration cap");
  cmd_recover->add_option("--noise-var", rec_noise, "solver noise variance");
  cmd_recover->add_option("--threads", rec_threads, "worker threads");
  cmd_recover->add_option("--truth", rec_truth, "original frame (oracle inputs, PSNR report)");
  cmd_recover->add_option("--out-frame", rec_frame_out, "write reconstructed frame");
  cmd_recover->add_option("--out-image", rec_image_out, "write display image (.pgm or .csv)");
  cmd_recover->add_option("--trace-gamma", rec_trace, "write gamma iterates of the first group");

  // bench
  std::string bench_spec, bench_domain, bench_out;
  std::vector<std::string> bench_ratios;
  int bench_threads = 0;
  long long bench_seed = -1;
  bool bench_no_timing = false;
  auto* cmd_bench = app.add_subcommand("bench", "run an experiment spec");
  cmd_bench->add_option("--spec", bench_spec, "experiment spec file")->required();
  cmd_bench->add_option("--ratio", bench_ratios, "override subsampling ratios");
  cmd_bench->add_option("--threads", bench_threads, "override worker threads");
  cmd_bench->add_option("--seed", bench_seed, "override experiment seed");
  cmd_bench->add_option("--psnr-domain", bench_domain, "override psnr domain")
      ->check(CLI::IsMember({"bmode", "raw-rescaled"}));
  cmd_bench->add_option("--output", bench_out, "override report path");
  cmd_bench->add_flag("--no-timing", bench_no_timing, "zero the runtime column (determinism runs)");

  // psnr
  std::string psnr_est, psnr_ref;
  auto* cmd_psnr = app.add_subcommand("psnr", "PSNR between two image files");
  cmd_psnr->add_option("estimate", psnr_est, "estimated image")->required();
  cmd_psnr->add_option("reference", psnr_ref, "reference image")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_phantom->parsed()) return run_phantom(phantom, phantom_out);
    if (cmd_sense->parsed())
      return run_sense(sense_in, sense_ratio, sense_seed, sense_domain, sense_noise, sense_out);
    if (cmd_recover->parsed()) {
      csr::SolverEntry entry;
      entry.id = rec_solver;
      const auto& allowed = csr::detail::solver_param_keys();
      const auto it = allowed.find(entry.id);
      if (it == allowed.end()) throw csr::RangeError("unknown solver id '" + entry.id + "'");
      auto set_if = [&](const std::string& key, const std::string& value, bool given) {
        if (given && it->second.count(key)) entry.params[key] = value;
      };
      set_if("block", std::to_string(rec_block), true);
      set_if("col-block", std::to_string(rec_colb), rec_colb > 0);
      set_if("prune", csr::detail::format_g(rec_prune), rec_prune >= 0.0);
      set_if("p", csr::detail::format_g(rec_p), rec_p > 0.0);
      set_if("support-size", std::to_string(rec_support), rec_support > 0);
      set_if("k", std::to_string(rec_k), rec_k > 0);
      set_if("k-blocks", std::to_string(rec_kblocks), rec_kblocks > 0);
      set_if("k-max", std::to_string(rec_kmax), rec_kmax > 0);
      set_if("max-iters", std::to_string(rec_maxiters), rec_maxiters > 0);
      return run_recover(rec_in, std::move(entry), rec_noise, rec_threads, rec_truth,
                         rec_frame_out, rec_image_out, rec_trace);
    }
    if (cmd_bench->parsed())
      return run_bench(bench_spec, bench_ratios, bench_threads, bench_seed, bench_domain,
                       bench_out, bench_no_timing);
    if (cmd_psnr->parsed()) return run_psnr(psnr_est, psnr_ref);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
