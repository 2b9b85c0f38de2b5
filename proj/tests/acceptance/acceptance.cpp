// Acceptance suite: one PASS/FAIL line per criterion.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "lorenza/adazo.hpp"
#include "lorenza/baselines.hpp"
#include "lorenza/errors.hpp"
#include "lorenza/harness/basin.hpp"
#include "lorenza/harness/memory.hpp"
#include "lorenza/harness/run.hpp"
#include "lorenza/lorenza.hpp"
#include "lorenza/rge.hpp"
#include "lorenza/schedule.hpp"
#include "lorenza/ssrf.hpp"
#include "test_support.hpp"

using namespace lorenza;
using namespace lorenza::harness;
namespace ts = testing_support;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(LORENZA_CONFIG_DIR) / name;
}

RunConfig load_into(const std::string& name, const std::filesystem::path& out) {
  RunConfig cfg = load_run_config(config_path(name));
  cfg.output_dir = out;
  return cfg;
}

Json quadratic_spec() {
  return Json{{"name", "quadratic"},
              {"shapes", Json::array({Json::array({8, 32}), Json::array({16, 16})})},
              {"curvature", 1.0},
              {"target_seed", 3}};
}

// 1. Oracle calls per step.
Outcome criterion_backprop_counts() {
  const auto dir = ts::scratch_dir("c1");
  auto run = [&](Json optimizer) {
    Json j{{"objective", quadratic_spec()},
           {"optimizer", std::move(optimizer)},
           {"total_steps", 1000},
           {"seed", 5},
           {"log_every", 100},
           {"output_dir", dir.string()},
           {"run_name", "counts"}};
    const TrialResult r = run_trial(parse_run_config(j), 5);
    // Audit from the metrics file alone.
    const MetricsFile mf = read_metrics_file(r.metrics_path);
    const MetricsRecord& last = mf.records.back();
    return std::make_tuple(last.gradient_calls_cum, last.value_calls_cum, last.refreshes_cum);
  };
  const auto [zg, zv, zr] = run({{"name", "adazo_sam"}, {"lr", 1e-3}, {"q", 1}});
  const auto [sg, sv, sr] = run({{"name", "sam"}, {"lr", 1e-3}});
  const std::int64_t T = 200;
  const auto [lg, lv, lr] =
      run({{"name", "lorenza"}, {"lr", 1e-3}, {"rank", 4}, {"refresh", {{"every", T}}}});
  const std::uint64_t lorenza_expected = 1000 + (1000 + T - 1) / T;
  const bool ok = zg == 1000 && zv == 2000 && sg == 2000 && lg == lorenza_expected &&
                  lr == lorenza_expected - 1000;
  return {ok, "adazo_sam grad=" + std::to_string(zg) + " value=" + std::to_string(zv) +
                  "; sam grad=" + std::to_string(sg) + "; lorenza grad=" + std::to_string(lg) +
                  " (expected " + std::to_string(lorenza_expected) + ")"};
}

// 2. Optimizer-state accounting against hand arithmetic.
Outcome criterion_memory() {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 300);
  int bad = 0;
  std::string first;
  for (int i = 0; i < 10; ++i) {
    const std::size_t a = dim(gen), b = dim(gen);
    const std::size_t small = std::min(a, b), big = std::max(a, b);
    std::uniform_int_distribution<std::size_t> rk(1, small);
    const std::size_t r = rk(gen);
    ParamSet p;
    p.add("w", Matrix(a, b));
    const MemoryReport rep = memory_report(p, OptimizerKind::Lorenza, r);
    // Table convention: n >= m. Stored convention: rows <= cols.
    const std::uint64_t model = big * r + 2 * small * r;
    const std::uint64_t actual = small * r + 3 * r * big;
    if (rep.state_model != model || rep.state_actual != actual) {
      ++bad;
      if (first.empty())
        first = std::to_string(a) + "x" + std::to_string(b) + " r=" + std::to_string(r);
    }
  }
  ParamSet ex;
  ex.add("w", Matrix(8, 32));
  const MemoryReport e = memory_report(ex, OptimizerKind::Lorenza, 4);
  const bool example = e.state_actual == 416 && e.state_model == 192u &&
                       memory_report(ex, OptimizerKind::Adam, 0).state_actual == 512;
  return {bad == 0 && example,
          bad ? "mismatch at " + first : "10 random shapes and the 8x32 r=4 example match"};
}

// 3. RGE fidelity.
Outcome criterion_rge() {
  std::mt19937_64 gen(77);
  ParamSet target;
  target.add("w", ts::fixture_matrix(gen, 2, 3));
  auto f = quadratic_objective(target, 2.0);
  ParamSet w = target;
  w[0].value = target[0].value + ts::fixture_matrix(gen, 2, 3);

  const GradSet g = f->probe_gradient(w, {});
  RngStream rng(31, 0);
  double worst_coeff = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const GradSet d = draw_direction(w, FullGaussian{}, rng);
    const double c = directional_coefficient(*f, w, {}, d, 1e-3);
    const double exact = joint_dot(g, d);
    // Scaled by |<g,D>|'s Cauchy-Schwarz bound; plain relative error is
    // meaningless for near-orthogonal draws.
    worst_coeff = std::max(worst_coeff, std::abs(c - exact) / (joint_norm(g) * joint_norm(d)));
  }

  // Monte-Carlo mean on a layer whose gradient entries are (1, -1, 0.05).
  ParamSet t2;
  t2.add("v", Matrix::from_rows({{0.0, 0.0, 0.0}}));
  auto f2 = quadratic_objective(t2, 1.0);
  ParamSet w2 = t2;
  w2[0].value = Matrix::from_rows({{1.0, -1.0, 0.05}});
  const GradSet g2 = f2->probe_gradient(w2, {});
  const int n = 100000;
  RngStream mc(41, 0);
  const ZoEstimate est = estimate_gradient(*f2, w2, {}, 1e-5, n, FullGaussian{}, mc);
  double worst_mc = 0.0;
  auto gv = g2[0].value.data();
  auto ev = est.grads[0].value.data();
  for (std::size_t k = 0; k < gv.size(); ++k)
    if (std::abs(gv[k]) > 0.1) worst_mc = std::max(worst_mc, std::abs(ev[k] - gv[k]) / std::abs(gv[k]));
  const bool calls_ok = f2->value_calls() == 2u * n;
  return {worst_coeff <= 1e-10 && worst_mc <= 0.02 && calls_ok,
          fmt("per-direction rel err %.2e", worst_coeff) + fmt(", MC rel err %.4f", worst_mc)};
}

Matrix to_matrix(const Eigen::MatrixXd& e) {
  Matrix m(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

// Error of the best rank-r approximation, from the singular values.
double svd_oracle_error(const Matrix& a, std::size_t r) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(a));
  const auto& s = svd.singularValues();
  double tail = 0.0;
  for (Eigen::Index k = static_cast<Eigen::Index>(r); k < s.size(); ++k) tail += s(k) * s(k);
  return std::sqrt(tail);
}

// 4. SSRF quality.
Outcome criterion_ssrf() {
  std::mt19937_64 gen(4242);
  std::uniform_int_distribution<std::size_t> dim(4, 64);
  int failures = 0;
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    const std::size_t m = dim(gen), n = dim(gen);
    std::uniform_int_distribution<std::size_t> rk(1, std::min<std::size_t>({m, n, 8}));
    const std::size_t r = rk(gen);
    const Matrix a = matmul(ts::fixture_matrix(gen, m, r), ts::fixture_matrix(gen, r, n));
    RngStream rng(static_cast<std::uint64_t>(seed), 9);
    try {
      const Subspace s = ssrf(a, r, rng);
      const double rel = approximation_error(a, s) / frobenius_norm(a);
      worst = std::max(worst, rel);
      if (rel > 1e-9) ++failures;
    } catch (const Error&) {
      ++failures;
    }
  }

  // Singular values (10, 5, 1e-12, ...) at r = 2, on a 4x4 matrix and on
  // random sizes up to 64x64.
  std::vector<double> ratios;
  for (int seed = 0; seed < 100; ++seed) {
    const std::size_t m = seed == 0 ? 4 : dim(gen), n = seed == 0 ? 4 : dim(gen), r = 2;
    const std::size_t k = std::min(m, n);
    Eigen::MatrixXd u = Eigen::HouseholderQR<Eigen::MatrixXd>(to_eigen(ts::fixture_matrix(gen, m, m)))
                            .householderQ();
    Eigen::MatrixXd v = Eigen::HouseholderQR<Eigen::MatrixXd>(to_eigen(ts::fixture_matrix(gen, n, n)))
                            .householderQ();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, n);
    for (std::size_t i = 0; i < k; ++i) s(i, i) = i == 0 ? 10.0 : i == 1 ? 5.0 : 1e-12;
    const Matrix a = to_matrix(u * s * v.transpose());
    RngStream rng(static_cast<std::uint64_t>(seed), 10);
    const Subspace sub = ssrf(a, r, rng);
    ratios.push_back(approximation_error(a, sub) / svd_oracle_error(a, r));
  }
  std::nth_element(ratios.begin(), ratios.begin() + 50, ratios.end());
  const double median = ratios[50];
  return {failures == 0 && median <= 3.0,
          std::to_string(failures) + " exact-rank failures" + fmt(" (worst %.2e)", worst) +
              fmt(", noisy median ratio %.3f", median)};
}

// 5. Zero-radius reductions.
Outcome criterion_reductions() {
  std::mt19937_64 gen(55);
  auto f = mlp_objective({4, 8, 3}, 17, 32);
  ParamSet a = f->layout();
  for (auto& l : a) l.value = ts::fixture_matrix(gen, l.value.rows(), l.value.cols(), 0.3);
  ParamSet b = a;
  AdamState as = adam_init(a);
  AdazoState zs = adazo_init(b);
  AdamConfig ac;
  ac.lr = 3e-3;
  AdazoConfig zc;
  zc.lr = 3e-3;
  zc.rho = 0.0;
  RngStream zr(8, 0);
  RngStream batches(9, 0);
  bool adam_same = true;
  for (int t = 0; t < 500 && adam_same; ++t) {
    Batch batch;
    for (int k = 0; k < 8; ++k) batch.indices.push_back(batches.next_u64() % 32);
    adam_step(as, a, *f, batch, ac);
    adazo_step(zs, b, *f, batch, zc, zr);
    adam_same = a == b;
  }

  auto q = quadratic_objective(
      [&] {
        ParamSet t;
        t.add("w0", ts::fixture_matrix(gen, 6, 20));
        t.add("w1", ts::fixture_matrix(gen, 12, 9));
        return t;
      }(),
      1.0);
  ParamSet c = q->layout();
  ParamSet d = c;
  LorenzaConfig lc;
  lc.rank = 3;
  lc.rho = 0.0;
  lc.refresh = PeriodicRefresh{25};
  LorenzaState l1 = lorenza_init(c, lc, *q, {}, RngStream(12, 0));
  LorenzaState l2 = lorenza_init(d, lc, *q, {}, RngStream(12, 0));
  bool lowrank_same = true;
  for (int t = 0; t < 500 && lowrank_same; ++t) {
    lorenza_step(l1, c, *q, {}, lc, 1e-2);
    lowrank_adam_step(l2, d, *q, {}, lc, 1e-2);
    lowrank_same = c == d;
  }
  return {adam_same && lowrank_same,
          std::string("adazo(rho=0)==adam: ") + (adam_same ? "bitwise" : "differs") +
              "; lorenza(rho=0)==lowrank_adam: " + (lowrank_same ? "bitwise" : "differs")};
}

// 6(a): running mean of the RGE norm with eta = 1/(beta sqrt T).
double adazo_running_mean(std::int64_t T, double beta, double rho, int seeds) {
  ParamSet target;
  target.add("w", Matrix::from_rows({{1.0, -0.5}, {0.25, 2.0}}));
  auto f = quadratic_objective(target, beta);
  double total = 0.0;
  for (int s = 0; s < seeds; ++s) {
    ParamSet w = target.zeros_like<ParamTag>();
    AdazoState st = adazo_init(w);
    AdazoConfig cfg;
    cfg.lr = 1.0 / (beta * std::sqrt(static_cast<double>(T)));
    cfg.rho = rho;
    RngStream rng(static_cast<std::uint64_t>(s), 66);
    double sum = 0.0;
    for (std::int64_t t = 0; t < T; ++t) {
      const StepReport rep = adazo_step(st, w, *f, {}, cfg, rng);
      sum += rep.perturbation_norm * rep.perturbation_norm;
    }
    total += sum / static_cast<double>(T);
  }
  return total / seeds;
}

Outcome criterion_convergence() {
  const double beta = 1.0, rho = 0.05;
  const int seeds = 8;
  const double floor = beta * beta * rho * rho;
  const double m100 = adazo_running_mean(100, beta, rho, seeds);
  const double c_fit = (m100 - floor) * std::sqrt(100.0);
  bool ok_a = c_fit > 0.0;
  std::string detail = fmt("C'=%.4g", c_fit);
  for (std::int64_t T : {1000, 10000}) {
    const double mean = adazo_running_mean(T, beta, rho, seeds);
    const double bound = 2.0 * (c_fit / std::sqrt(static_cast<double>(T)) + floor);
    ok_a = ok_a && mean <= bound;
    detail += "; T=" + std::to_string(T) + fmt(" mean=%.4g", mean) + fmt(" bound=%.4g", bound);
  }

  const auto dir = ts::scratch_dir("c6");
  const RunConfig cfg = load_into("mf_lorenza.json", dir);
  const ExperimentResult res = run_experiment(cfg);
  int reached = 0;
  for (const auto& t : res.trials)
    if (t.termination == "epsilon_reached" && t.final_grad_norm_sq <= 1e-4 && t.steps <= 5000)
      ++reached;
  detail += "; matrix factorization reached eps in " + std::to_string(reached) + "/" +
            std::to_string(res.trials.size());
  return {ok_a && reached >= 95 && res.trials.size() == 100, detail};
}

// 7. Flat-minimum selection on the double well.
Outcome criterion_flat_minimum() {
  const auto dir = ts::scratch_dir("c7");
  const RunConfig adam = load_into("double_well_adam.json", dir);
  const RunConfig lorenza = load_into("double_well_lorenza.json", dir);
  const ExperimentResult ra = run_experiment(adam);
  const ExperimentResult rl = run_experiment(lorenza);
  std::vector<std::filesystem::path> files;
  for (const auto& t : ra.trials) files.push_back(t.metrics_path);
  for (const auto& t : rl.trials) files.push_back(t.metrics_path);
  const BasinReport rep = basin_statistics_from_files(files);
  const BasinCounts& a = rep.counts.at("adam");
  const BasinCounts& l = rep.counts.at("lorenza");
  const long margin = static_cast<long>(l.flat) - static_cast<long>(a.flat);
  return {a.total() == 100 && l.total() == 100 && margin >= 10,
          "flat basin: lorenza " + std::to_string(l.flat) + ", adam " + std::to_string(a.flat) +
              " (margin " + std::to_string(margin) + ", need >= 10)"};
}

// 8. Scheduler endpoints and midpoint.
Outcome criterion_schedules() {
  const RhoSchedule s{1e-6, 0.01, 0.0, 1e-3};
  const double mid = rho_schedule(s, 5e-4);
  const bool rho_ok = rho_schedule(s, 0.0) == 1e-6 && rho_schedule(s, 1e-3) == 0.01 &&
                      std::abs(mid - 0.0050005) <= 2.0 * 0.0050005 * 1.1102230246251565e-16;
  const RhoSchedule s2{1e-5, 0.1, 1e-4, 1e-2};
  const bool rho2_ok = rho_schedule(s2, 1e-4) == 1e-5 && rho_schedule(s2, 1e-2) == 0.1;
  bool cos_ok = true;
  for (std::int64_t total : {1, 7, 1000, 5000})
    cos_ok = cos_ok && cosine_lr(0, total, 1e-2, 1e-4) == 1e-2 &&
             cosine_lr(total, total, 1e-2, 1e-4) == 1e-4 && cosine_lr(0, total, 3e-3, 0.0) == 3e-3 &&
             cosine_lr(total, total, 3e-3, 0.0) == 0.0;
  return {rho_ok && rho2_ok && cos_ok, fmt("rho midpoint %.17g", mid)};
}

// 9. Checkpoint resume is byte-identical.
Outcome criterion_resume() {
  const auto dir = ts::scratch_dir("c9");
  std::string detail;
  bool ok = true;
  const std::vector<Json> optimizers = {
      Json{{"name", "lorenza"},
           {"lr", 1e-2},
           {"lr_min", 1e-4},
           {"schedule", "cosine"},
           {"rank", 2},
           {"refresh", {{"every", 20}}},
           {"rho", {{"min", 1e-6}, {"max", 0.01}}}},
      Json{{"name", "adazo_sam"}, {"lr", 1e-2}, {"rho", 0.05}},
      Json{{"name", "adamw"}, {"lr", 1e-2}}};
  for (const Json& opt : optimizers) {
    Json j{{"objective", {{"name", "mlp"}, {"layer_dims", {4, 8, 3}}, {"dataset_seed", 3}, {"n_samples", 40}}},
           {"optimizer", opt},
           {"total_steps", 100},
           {"batch_size", 8},
           {"log_every", 5},
           {"checkpoint_at", {50}},
           {"output_dir", dir.string()},
           {"run_name", "straight"}};
    const RunConfig straight = parse_run_config(j);
    const TrialResult s = run_trial(straight, 11);
    const std::string expected = ts::slurp(s.metrics_path);

    j["run_name"] = "interrupted";
    const RunConfig interrupted = parse_run_config(j);
    TrialOptions stop;
    stop.stop_after = 50;
    run_trial(interrupted, 11, stop);
    const TrialResult resumed =
        resume_trial(interrupted, trial_checkpoint_path(interrupted, 11, 50));
    const bool same = ts::slurp(resumed.metrics_path) == expected && !expected.empty();
    ok = ok && same;
    detail += opt["name"].get<std::string>() + (same ? "=identical " : "=DIFFERENT ");
  }
  return {ok, detail};
}

// 10. Analytic gradients against finite differences.
Outcome criterion_gradients() {
  std::mt19937_64 gen(10);
  struct Case {
    std::string name;
    std::shared_ptr<Objective> f;
    Batch batch;
  };
  std::vector<Case> cases;
  {
    ParamSet t;
    t.add("w0", ts::fixture_matrix(gen, 3, 5));
    t.add("w1", ts::fixture_matrix(gen, 6, 2));
    cases.push_back({"quadratic", quadratic_objective(t, 1.7), {}});
  }
  cases.push_back({"double_well", double_well_objective(), {}});
  {
    Batch b;
    for (std::size_t k = 0; k < 16; ++k) b.indices.push_back(k);
    cases.push_back({"mlp", mlp_objective({4, 8, 3}, 21, 16), b});
  }
  cases.push_back(
      {"matrix_factorization",
       matrix_factorization_objective(matmul(ts::fixture_matrix(gen, 8, 2), ts::fixture_matrix(gen, 2, 8)), 2),
       {}});

  double worst = 0.0;
  std::string detail;
  for (auto& c : cases) {
    double case_worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      ParamSet w = c.f->layout();
      for (auto& l : w) l.value = ts::fixture_matrix(gen, l.value.rows(), l.value.cols(), 0.8);
      if (c.name == "double_well") w[0].value(0, 0) = -3.0 + 1.5 * trial;
      const GradSet analytic = c.f->probe_gradient(w, c.batch);
      const GradSet fd = ts::central_differences(*c.f, w, c.batch, 1e-6);
      const GradSet fd_lib = finite_diff_gradient(*c.f, w, c.batch, 1e-6);
      case_worst = std::max({case_worst, ts::max_rel_error(analytic, fd), ts::max_rel_error(analytic, fd_lib)});
    }
    worst = std::max(worst, case_worst);
    detail += c.name + fmt("=%.2e ", case_worst);
  }
  return {worst <= 1e-5, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 single backprop per step", criterion_backprop_counts},
      {"2 optimizer-state accounting", criterion_memory},
      {"3 RGE fidelity", criterion_rge},
      {"4 SSRF quality", criterion_ssrf},
      {"5 reduction identities", criterion_reductions},
      {"6 convergence", criterion_convergence},
      {"7 flat-minimum selection", criterion_flat_minimum},
      {"8 schedulers", criterion_schedules},
      {"9 determinism and resume", criterion_resume},
      {"10 gradient correctness", criterion_gradients},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << name << ": " << o.detail
              << fmt(" [%.2fs]", secs) << std::endl;
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
