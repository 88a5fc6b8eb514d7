// Acceptance suite: end-to-end checks of the solver library and the bench
// runner at desk scale. Each criterion prints one PASS/FAIL line; the
// process exit code is the number of failures.

#include "csrecon/runner.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace csr;

namespace {

int failures = 0;

void criterion(int id, const std::string& label, double budget_seconds,
               const std::function<bool(std::string&)>& body) {
  std::string detail;
  const auto start = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0.0 && elapsed >= budget_seconds) {
    ok = false;
    detail += (detail.empty() ? "" : "; ") + std::string("over budget ") +
              std::to_string(budget_seconds) + "s";
  }
  if (!ok) ++failures;
  std::printf("%s criterion %2d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", id, label.c_str(),
              elapsed, detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
}

struct SparseInstance {
  SmvProblem problem;
  Eigen::VectorXd truth;
  std::vector<int> support;
};

SparseInstance sparse_instance(int m, int n, int k, std::uint32_t seed) {
  SeededRng rng(derive_seed(seed, 0x51));
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(m);
  std::vector<int> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(m - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::vector<int> support(idx.begin(), idx.begin() + k);
  std::sort(support.begin(), support.end());
  for (const int i : support) {
    double v = rng.normal();
    if (std::abs(v) < 0.3) v = v < 0 ? v - 0.3 : v + 0.3;
    truth[i] = v;
  }
  auto op = make_gaussian_operator(n, m, derive_seed(seed, 0x52) & 0xffffffffu);
  Eigen::VectorXd y = op.matrix * truth;
  return SparseInstance{SmvProblem{std::move(op), std::move(y), 0.0}, std::move(truth),
                        std::move(support)};
}

struct BlockInstance {
  SmvProblem problem;
  BlockPartition partition;
  Eigen::VectorXd truth;
};

BlockInstance block_instance(int m, int d, int n_active, int n, std::uint32_t seed,
                             double lambda = 1e-8) {
  BlockInstance inst{SmvProblem{}, make_block_partition(m, d), Eigen::VectorXd()};
  inst.truth = gen_block_sparse(m, d, n_active, 0.6, seed);
  auto op = make_gaussian_operator(n, m, seed + 1000);
  Eigen::VectorXd y = op.matrix * inst.truth;
  inst.problem = make_smv_problem(std::move(op), std::move(y), lambda);
  return inst;
}

std::vector<int> pruned_set(const Eigen::VectorXd& gamma) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < gamma.size(); ++i)
    if (gamma[i] == 0.0) out.push_back(static_cast<int>(i));
  return out;
}

bool check_transforms(std::string& detail) {
  for (const int m : {8, 512, 1024}) {
    const Eigen::VectorXd x = oracle::gaussian_matrix(m, 1, 7 + m).col(0);
    const Eigen::VectorXd back = idct_line(dct_line(x));
    if ((back - x).cwiseAbs().maxCoeff() >= 1e-10) {
      detail = "round trip failed at M=" + std::to_string(m);
      return false;
    }
    if (std::abs(dct_line(x).norm() - x.norm()) >= 1e-10 * x.norm()) {
      detail = "energy not preserved at M=" + std::to_string(m);
      return false;
    }
  }
  const int m = 256;
  Eigen::VectorXd cosine(m);
  for (int t = 0; t < m; ++t) cosine[t] = std::cos(2.0 * M_PI * 8.0 * t / m);
  const Eigen::VectorXd env = hilbert_envelope(cosine);
  for (int t = 16; t <= 239; ++t)
    if (std::abs(env[t] - 1.0) >= 2e-2) {
      detail = "envelope off at sample " + std::to_string(t);
      return false;
    }
  return true;
}

bool check_posterior_oracle(std::string& detail) {
  double worst = 0.0;
  for (std::uint32_t seed = 0; seed < 50; ++seed) {
    SeededRng rng(seed);
    const int d = 1 + static_cast<int>(rng.uniform_index(4));
    const int g = 2 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(64 / d - 1)));
    const int m = d * g;
    const int n = std::max(2, m / 2);
    const Eigen::MatrixXd a = oracle::gaussian_matrix(n, m, 300 + seed);
    const Eigen::VectorXd y = oracle::gaussian_matrix(n, 1, 400 + seed).col(0);
    SbState state = make_sb_state(make_block_partition(m, d));
    for (int i = 0; i < g; ++i) state.gamma[i] = 0.05 + rng.uniform();
    state.intra_corr = ar1_toeplitz(d, -0.9 + 1.8 * rng.uniform());
    if (g > 2 && rng.uniform() < 0.5) state.active[static_cast<std::size_t>(g - 1)] = false;
    const double lambda = 1e-4 + 0.1 * rng.uniform();

    const auto post = posterior_moments(a, y, state, lambda);
    const auto dense =
        oracle::dense_posterior(a, y, state.gamma, state.intra_corr, state.active, lambda);
    Eigen::MatrixXd mean = dense.mean;
    for (int i = 0; i < g; ++i)
      if (!state.active[static_cast<std::size_t>(i)]) mean.middleRows(i * d, d).setZero();
    worst = std::max(worst, (post.mean - mean).cwiseAbs().maxCoeff());
    for (int i = 0; i < g; ++i) {
      if (!state.active[static_cast<std::size_t>(i)]) continue;
      const Eigen::MatrixXd ref = dense.covariance.block(i * d, i * d, d, d);
      worst = std::max(worst, (post.block_cov[static_cast<std::size_t>(i)] - ref)
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  detail = "max deviation " + std::to_string(worst);
  return worst < 1e-9;
}

bool check_reductions(std::string& detail) {
  // ST-SBL with single-column groups against BSBL-EM, iterate by iterate
  {
    const int m = 32, d = 4, n = 16, l = 2;
    Eigen::MatrixXd truth(m, l);
    for (int j = 0; j < l; ++j) truth.col(j) = gen_block_sparse(m, d, 2, 0.5, 60 + j);
    auto op = make_gaussian_operator(n, m, 61);
    const Eigen::MatrixXd y = op.matrix * truth;
    SolverConfig config;
    config.max_iters = 20;
    config.tol = 1e-300;
    config.collect_trace = true;
    config.column_block = 1;
    const auto joint = st_sbl(make_mmv_problem(op, y, 1e-8), make_block_partition(m, d), config);
    for (int j = 0; j < l; ++j) {
      const auto single =
          bsbl_em(make_smv_problem(op, y.col(j), 1e-8), make_block_partition(m, d), config);
      if (joint.gamma_trace.size() != static_cast<std::size_t>(20 * l) ||
          single.gamma_trace.size() != 20) {
        detail = "trace lengths off";
        return false;
      }
      for (int t = 0; t < 20; ++t) {
        const double diff = (joint.gamma_trace[static_cast<std::size_t>(j * 20 + t)] -
                             single.gamma_trace[static_cast<std::size_t>(t)])
                                .cwiseAbs()
                                .maxCoeff();
        if (diff >= 1e-6) {
          detail = "st-sbl/bsbl-em iterate " + std::to_string(t) + " differs by " +
                   std::to_string(diff);
          return false;
        }
      }
    }
  }
  // BIRLS with unit blocks and MFOCUSS with one column against plain IRLS
  {
    const auto inst = sparse_instance(24, 10, 3, 77);
    SolverConfig config;
    config.max_iters = 60;
    config.collect_trace = true;
    const auto plain = irls_lp(inst.problem, 0.9, {}, config);
    const auto block = birls(inst.problem, 0.9, make_block_partition(24, 1), config);
    const auto row = mfocuss(MmvProblem{inst.problem.A, inst.problem.y, 0.0}, 0.9, config);
    if (block.estimate_trace.size() != plain.estimate_trace.size() ||
        row.estimate_trace.size() != plain.estimate_trace.size()) {
      detail = "iterate counts differ";
      return false;
    }
    for (std::size_t t = 0; t < plain.estimate_trace.size(); ++t) {
      const double d1 =
          (block.estimate_trace[t] - plain.estimate_trace[t]).cwiseAbs().maxCoeff();
      const double d2 = (row.estimate_trace[t] - plain.estimate_trace[t]).cwiseAbs().maxCoeff();
      if (d1 >= 1e-10 || d2 >= 1e-10) {
        detail = "irls reductions differ at iterate " + std::to_string(t);
        return false;
      }
    }
  }
  return true;
}

bool check_phase_transitions(std::string& detail) {
  int l0_exact = 0, l1_match = 0;
  for (std::uint32_t seed = 0; seed < 100; ++seed) {
    const auto inst = sparse_instance(16, 8, 2, 20000 + seed);
    const auto l0 = l0_bruteforce(inst.problem, 2);
    if (l0.converged && (l0.estimate.col(0) - inst.truth).norm() < 1e-6 * inst.truth.norm())
      ++l0_exact;
    const auto l1 = irls_lp(inst.problem, 1.0);
    if ((l1.estimate - l0.estimate).cwiseAbs().maxCoeff() < 1e-6) ++l1_match;
  }

  int em_ok = 0, bo_ok = 0;
  for (std::uint32_t seed = 0; seed < 100; ++seed) {
    const auto inst = block_instance(64, 4, 2, 32, 3000 + seed);
    const auto em = bsbl_em(inst.problem, inst.partition);
    const auto bo = bsbl_bo(inst.problem, inst.partition);
    if ((em.estimate.col(0) - inst.truth).norm() < 1e-3 * inst.truth.norm()) ++em_ok;
    if ((bo.estimate.col(0) - inst.truth).norm() < 1e-3 * inst.truth.norm()) ++bo_ok;
  }
  detail = "l0 " + std::to_string(l0_exact) + "/100, l1-match " + std::to_string(l1_match) +
           "/100, em " + std::to_string(em_ok) + "/100, bo " + std::to_string(bo_ok) + "/100";
  return l0_exact == 100 && l1_match >= 90 && em_ok >= 95 && bo_ok >= 95;
}

bool check_dual_prior(std::string& detail) {
  const int m = 32, k = 4, n = k + 2;
  int dual_exact = 0, plain_failed = 0;
  for (std::uint32_t seed = 0; seed < 100; ++seed) {
    const auto inst = sparse_instance(m, n, k, 4000 + seed);
    const auto dual = irls_lp(inst.problem, 0.99, inst.support);
    if ((dual.estimate.col(0) - inst.truth).norm() < 1e-8 * inst.truth.norm()) ++dual_exact;
    const auto plain = irls_lp(inst.problem, 1.0);
    if ((plain.estimate.col(0) - inst.truth).norm() > 1e-6 * inst.truth.norm()) ++plain_failed;
  }
  detail = "dual exact " + std::to_string(dual_exact) + "/100, plain failed " +
           std::to_string(plain_failed) + "/100";
  return dual_exact == 100 && plain_failed >= 50;
}

bool check_em_monotonicity(std::string& detail) {
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    const auto inst = block_instance(32, 4, 2, 16, 5000 + seed);
    SolverConfig config;
    config.learn_intra_corr = false;
    config.prune_threshold = 0.0;
    config.collect_trace = true;
    config.max_iters = 60;
    const auto result = bsbl_em(inst.problem, inst.partition, config);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
    double prev = oracle::evidence_nll(inst.problem.A.matrix, inst.problem.y,
                                       Eigen::VectorXd::Ones(inst.partition.num_blocks), eye,
                                       inst.problem.noise_var);
    for (std::size_t t = 0; t < result.gamma_trace.size(); ++t) {
      const double cur = oracle::evidence_nll(inst.problem.A.matrix, inst.problem.y,
                                              result.gamma_trace[t], eye, inst.problem.noise_var);
      if (cur > prev + 1e-8) {
        detail = "objective rose at seed " + std::to_string(seed) + ", iterate " +
                 std::to_string(t) + " by " + std::to_string(cur - prev);
        return false;
      }
      prev = cur;
    }
  }
  return true;
}

bool check_pruning_semantics(std::string& detail) {
  bool pruned_anywhere = false;
  for (const std::uint32_t seed : {5u, 12u, 27u}) {
    const auto inst = block_instance(64, 4, 2, 32, seed);
    SolverConfig high;
    high.prune_threshold = 1e-8;
    high.collect_trace = true;
    SolverConfig low = high;
    low.prune_threshold = 2.22e-16;

    const auto r_high = bsbl_em(inst.problem, inst.partition, high);
    const auto r_low = bsbl_em(inst.problem, inst.partition, low);

    std::vector<bool> active(static_cast<std::size_t>(inst.partition.num_blocks), false);
    for (const int i : r_high.active_blocks) active[static_cast<std::size_t>(i)] = true;
    for (int i = 0; i < inst.partition.num_blocks; ++i) {
      if (active[static_cast<std::size_t>(i)]) continue;
      pruned_anywhere = true;
      for (int j = 0; j < 4; ++j)
        if (r_high.estimate(i * 4 + j, 0) != 0.0) {
          detail = "pruned block " + std::to_string(i) + " not bitwise zero";
          return false;
        }
    }

    const std::size_t common = std::min(r_high.gamma_trace.size(), r_low.gamma_trace.size());
    for (std::size_t t = 0; t < common; ++t) {
      const auto lo = pruned_set(r_low.gamma_trace[t]);
      const auto hi = pruned_set(r_high.gamma_trace[t]);
      if (!std::includes(hi.begin(), hi.end(), lo.begin(), lo.end())) {
        detail = "threshold nesting violated at iterate " + std::to_string(t) + " (seed " +
                 std::to_string(seed) + ")";
        return false;
      }
    }
    const auto lo_final = pruned_set(r_low.gamma_trace.back());
    const auto hi_final = pruned_set(r_high.gamma_trace.back());
    if (!std::includes(hi_final.begin(), hi_final.end(), lo_final.begin(), lo_final.end())) {
      detail = "final pruned sets not nested (seed " + std::to_string(seed) + ")";
      return false;
    }
  }
  if (!pruned_anywhere) {
    detail = "no block was ever pruned; the check is vacuous";
    return false;
  }
  return true;
}

bool check_end_to_end_ordering(std::string& detail) {
  ExperimentSpec spec;
  spec.phantom = PhantomSpec{512, 64, 40, 10, 0.25, 0};
  spec.ratios = {make_rational(1, 3), make_rational(1, 2)};
  spec.psnr_domain = SignalDomain::DctOfDisplay;
  spec.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  spec.solvers = {
      {"st-sbl", {{"block", "32"}, {"col-block", "1"}, {"max-iters", "200"}}},
      {"st-sbl", {{"block", "32"}, {"col-block", "4"}, {"max-iters", "200"}}},
      {"birls", {{"block", "32"}, {"max-iters", "200"}}},
      {"l1", {}},
  };
  const BenchReport report = run_benchmark(spec);

  auto find_row = [&](const std::string& solver, const std::string& ratio,
                      const std::string& col_block) -> const BenchRow* {
    for (const auto& row : report.rows) {
      if (row.solver != solver) continue;
      if (row.params.rfind("ratio=" + ratio, 0) != 0) continue;
      if (!col_block.empty() && row.params.find("col-block=" + col_block) == std::string::npos)
        continue;
      return &row;
    }
    return nullptr;
  };

  std::ostringstream note;
  note.precision(4);
  for (const std::string ratio : {"1/3", "1/2"}) {
    const BenchRow* st1 = find_row("st-sbl", ratio, "1");
    const BenchRow* st4 = find_row("st-sbl", ratio, "4");
    const BenchRow* bir = find_row("birls", ratio, "");
    const BenchRow* l1 = find_row("l1", ratio, "");
    if (!st1 || !st4 || !bir || !l1) {
      detail = "missing rows at ratio " + ratio;
      return false;
    }
    if (st1->failed || st4->failed || bir->failed || l1->failed) {
      detail = "a solver failed at ratio " + ratio;
      return false;
    }
    note << ratio << ": st1 " << st1->quality.db << " st4 " << st4->quality.db << " birls "
         << bir->quality.db << " l1 " << l1->quality.db << " dB, t " << st4->runtime_s << "s vs "
         << st1->runtime_s << "s. ";
    if (!(st1->quality.db > l1->quality.db)) {
      detail = note.str() + "st-sbl not above l1 at " + ratio;
      return false;
    }
    if (!(bir->quality.db > l1->quality.db)) {
      detail = note.str() + "birls not above l1 at " + ratio;
      return false;
    }
    if (!(st4->runtime_s < st1->runtime_s)) {
      detail = note.str() + "multi-column grouping not faster at " + ratio;
      return false;
    }
  }
  detail = note.str();
  return true;
}

bool check_kterm_optimality(std::string& detail) {
  SeededRng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 4 + static_cast<int>(rng.uniform_index(9));  // 4..12
    const int k = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(m + 1)));
    const Eigen::VectorXd c = oracle::gaussian_matrix(m, 1, 600 + trial).col(0);
    const double mine = (c - ksparse_approx(c, k)).norm();
    const double best = oracle::best_ksupport_error(c, k);
    if (mine > best + 1e-12) {
      detail = "suboptimal at trial " + std::to_string(trial);
      return false;
    }
  }
  return true;
}

bool check_cli_determinism(std::string& detail) {
  const char* tmpdir_env = std::getenv("TMPDIR");
  const std::string dir = tmpdir_env ? tmpdir_env : "/tmp";
  const std::string spec_path = dir + "/csrecon_acceptance.bench";
  {
    std::ofstream spec(spec_path);
    spec << "spec_version 1\n"
         << "seed 7\n"
         << "psnr_domain raw-rescaled\n"
         << "phantom depth=64 lines=8 scatterers=10 pulse-cycles=4 center-freq=0.25 seed=7\n"
         << "ratio 1/2\n"
         << "solver bsbl-bo block=16\n"
         << "solver l1\n"
         << "solver ksparse\n"
         << "timing none\n";
  }
  auto run = [&](int threads, const std::string& out) {
    const std::string cmd = std::string(CSRECON_CLI_PATH) + " bench --spec " + spec_path +
                            " --threads " + std::to_string(threads) + " --output " + out +
                            " --no-timing > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string out1 = dir + "/csrecon_acceptance_t1.csv";
  const std::string out1b = dir + "/csrecon_acceptance_t1b.csv";
  const std::string out8 = dir + "/csrecon_acceptance_t8.csv";
  if (!run(1, out1) || !run(1, out1b) || !run(8, out8)) {
    detail = "bench invocation failed";
    return false;
  }
  const std::string a = slurp(out1), b = slurp(out1b), c = slurp(out8);
  std::remove(spec_path.c_str());
  std::remove(out1.c_str());
  std::remove(out1b.c_str());
  std::remove(out8.c_str());
  if (a.empty()) {
    detail = "empty report";
    return false;
  }
  if (a != b) {
    detail = "rerun differs at the same thread count";
    return false;
  }
  if (a != c) {
    detail = "reports differ between 1 and 8 threads";
    return false;
  }
  return true;
}

}  // namespace

int main() {
  criterion(1, "transform round trip, energy preservation, envelope", 5.0, check_transforms);
  criterion(2, "posterior moments match the dense closed form", 10.0, check_posterior_oracle);
  criterion(3, "solver reduction identities", 30.0, check_reductions);
  criterion(4, "exact-recovery phase behavior", 180.0, check_phase_transitions);
  criterion(5, "support prior turns failure into exact recovery", 120.0, check_dual_prior);
  criterion(6, "EM evidence objective is monotone", 0.0, check_em_monotonicity);
  criterion(7, "pruning is hard-zero and thresholds nest", 0.0, check_pruning_semantics);
  criterion(8, "end-to-end quality ordering and grouping speedup", 900.0,
            check_end_to_end_ordering);
  criterion(9, "k-term thresholding is support-optimal", 0.0, check_kterm_optimality);
  criterion(10, "bench reports are byte-identical across reruns and thread counts", 0.0,
            check_cli_determinism);
  if (failures == 0) std::printf("all criteria passed\n");
  return failures;
}
