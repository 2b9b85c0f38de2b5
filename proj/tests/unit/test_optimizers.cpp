#include <doctest.h>

#include <cmath>
#include <random>

#include "lorenza/adazo.hpp"
#include "lorenza/baselines.hpp"
#include "lorenza/errors.hpp"
#include "lorenza/lorenza.hpp"
#include "test_support.hpp"

using namespace lorenza;
namespace ts = testing_support;

namespace {

ParamSet one(const char* name, Matrix m) {
  ParamSet p;
  p.add(name, std::move(m));
  return p;
}

// NaN gradient once w(0, 0) crosses 0.5.
struct Cliff : Objective {
  std::string name() const override { return "cliff"; }
  ParamSet layout() const override { return one("w", Matrix(1, 2)); }
  double evaluate(const ParamSet& p, const Batch&) const override {
    return p[0].value(0, 0) > 0.5 ? NAN : 0.5 * frobenius_dot(p[0].value, p[0].value);
  }
  GradSet differentiate(const ParamSet& p, const Batch&) const override {
    GradSet g = p.zeros_like<GradTag>();
    g[0].value = p[0].value;
    if (p[0].value(0, 0) > 0.5) g[0].value(0, 0) = NAN;
    return g;
  }
};

}  // namespace

TEST_CASE("adam: first step moves by lr in the sign of the gradient") {
  auto f = linear_objective(one("w", Matrix::from_rows({{2.0, -0.5, 1e-3}})));
  ParamSet w = one("w", Matrix(1, 3));
  AdamState s = adam_init(w);
  AdamConfig cfg;
  cfg.lr = 0.1;
  adam_step(s, w, *f, {}, cfg);
  CHECK(w[0].value(0, 0) == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(w[0].value(0, 1) == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(w[0].value(0, 2) == doctest::Approx(-0.1).epsilon(1e-4));
  CHECK(f->gradient_calls() == 1);
  CHECK(s.t == 1);

  // Constant gradient: bias correction makes every step identical.
  for (int k = 0; k < 20; ++k) {
    const Matrix before = w[0].value;
    adam_step(s, w, *f, {}, cfg);
    CHECK(std::abs(w[0].value(0, 0) - before(0, 0) + 0.1 * 2.0 / (2.0 + 1e-8)) <= 1e-12);
  }
}

TEST_CASE("adamw: decoupled decay") {
  auto f = linear_objective(one("w", Matrix(1, 2)));
  ParamSet w = one("w", Matrix::from_rows({{1.0, -2.0}}));
  AdamState s = adam_init(w);
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  adam_step(s, w, *f, {}, cfg);
  CHECK(w[0].value(0, 0) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(w[0].value(0, 1) == doctest::Approx(-1.9).epsilon(1e-15));
  cfg.weight_decay = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("sam") {
  const Matrix target = Matrix::from_rows({{1.0, -1.0}, {0.0, 2.0}});
  const double beta = 2.0;
  auto f = quadratic_objective(one("w", target), beta);
  const Matrix w0 = Matrix::from_rows({{0.5, 0.0}, {1.0, 1.0}});

  SUBCASE("rho = 0 without adaptivity is SGD") {
    ParamSet w = one("w", w0);
    SamState s = sam_init(w);
    SamConfig cfg;
    cfg.lr = 0.1;
    cfg.rho = 0.0;
    sam_step(s, w, *f, {}, cfg);
    CHECK(max_abs(w[0].value - (w0 - (w0 - target) * (0.1 * beta))) <= 1e-15);
    CHECK(f->gradient_calls() == 2);
    CHECK(f->value_calls() == 0);
  }
  SUBCASE("perturbed gradient") {
    ParamSet w = one("w", w0);
    SamState s = sam_init(w);
    SamConfig cfg;
    cfg.lr = 0.1;
    cfg.rho = 0.3;
    const StepReport rep = sam_step(s, w, *f, {}, cfg);
    const Matrix g = (w0 - target) * beta;
    const Matrix gs = g + g * (beta * 0.3 / frobenius_norm(g));
    CHECK(max_abs(w[0].value - (w0 - gs * 0.1)) <= 1e-14);
    CHECK(rep.rho == 0.3);
  }
  SUBCASE("zero gradient degrades") {
    ParamSet w = one("w", target);
    SamState s = sam_init(w);
    SamConfig cfg;
    const StepReport rep = sam_step(s, w, *f, {}, cfg);
    CHECK(rep.degenerate_perturbation);
    CHECK(w[0].value == target);
  }
}

TEST_CASE("adazo: first step with beta1 = beta2 = 0.9 and constant gradient") {
  auto f = linear_objective(one("w", Matrix::from_rows({{3.0, -4.0}})));
  ParamSet w = one("w", Matrix(1, 2));
  AdazoState s = adazo_init(w);
  AdazoConfig cfg;
  cfg.lr = 0.01;
  cfg.rho = 0.05;
  cfg.q = 3;
  cfg.moments.beta1 = 0.9;
  cfg.moments.beta2 = 0.9;
  RngStream rng(4, 0);
  const StepReport rep = adazo_step(s, w, *f, {}, cfg, rng);
  // A linear loss has the same gradient at the perturbed point.
  CHECK(w[0].value(0, 0) == doctest::Approx(-0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
  CHECK(w[0].value(0, 1) == doctest::Approx(0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(f->gradient_calls() == 1);
  CHECK(f->value_calls() == 6);
  CHECK(rep.rho == 0.05);
  CHECK(rep.perturbation_norm > 0.0);
  CHECK_FALSE(rep.degenerate_perturbation);
}

TEST_CASE("adazo: ascent moves the gradient point uphill") {
  auto f = quadratic_objective(one("w", Matrix(1, 2)), 1.0);
  const Matrix w0 = Matrix::from_rows({{1.0, 0.0}});
  ParamSet w = one("w", w0);
  AdazoState s = adazo_init(w);
  AdazoConfig cfg;
  cfg.lr = 1e-3;
  cfg.rho = 0.1;
  cfg.q = 64;
  RngStream rng(5, 0);
  adazo_step(s, w, *f, {}, cfg, rng);
  // The gradient is w itself; the step direction ~ m1/|m1| = sign(w + rho dir).
  CHECK(w[0].value(0, 0) < 1.0);
}

TEST_CASE("optimizers are transactional on numerical failure") {
  Cliff f;
  const Matrix w0 = Matrix::from_rows({{0.45, 0.0}});

  ParamSet w = one("w", w0);
  SamState s = sam_init(w);
  SamConfig sc;
  sc.rho = 1.0;
  CHECK_THROWS_AS(sam_step(s, w, f, {}, sc), NumericalError);
  CHECK(w[0].value == w0);
  CHECK(s.t == 0);
  CHECK(max_abs(s.m[0].value) == 0.0);

  AdazoState a = adazo_init(w);
  AdazoConfig ac;
  ac.rho = 5.0;
  RngStream rng(1, 0);
  CHECK_THROWS_AS(adazo_step(a, w, f, {}, ac, rng), NumericalError);
  CHECK(w[0].value == w0);
  CHECK(a.t == 0);
}

TEST_CASE("lorenza: init") {
  LorenzaConfig cfg;
  cfg.rank = 2;
  SUBCASE("zero gradient falls back to a random orthonormal basis") {
    auto f = linear_objective(one("w", Matrix(4, 6)));
    const ParamSet w = one("w", Matrix(4, 6));
    const LorenzaState s = lorenza_init(w, cfg, *f, {}, RngStream(1, 0));
    CHECK(f->gradient_calls() == 1);
    const Matrix& q = s.layers[0].sub.q;
    CHECK(q.rows() == 4);
    CHECK(q.cols() == 2);
    CHECK(max_abs(matmul_tn(q, q) - Matrix::identity(2)) <= 1e-12);
  }
  SUBCASE("rank above the smaller dimension") {
    auto f = quadratic_objective(one("w", Matrix(3, 6, 1.0)), 1.0);
    cfg.rank = 4;
    CHECK_THROWS_AS(lorenza_init(one("w", Matrix(3, 6)), cfg, *f, {}, RngStream(1, 0)),
                    ConfigError);
  }
}

TEST_CASE("lorenza: periodic refresh every 200 steps") {
  std::mt19937_64 gen(1);
  auto f = quadratic_objective(one("w", ts::fixture_matrix(gen, 4, 8)), 1.0);
  ParamSet w = one("w", Matrix(4, 8));
  LorenzaConfig cfg;
  cfg.rank = 2;
  cfg.alpha = 1e-3;
  cfg.refresh = PeriodicRefresh{200};
  LorenzaState s = lorenza_init(w, cfg, *f, {}, RngStream(2, 0));
  std::vector<std::int64_t> refreshed_at;
  for (int k = 0; k < 401; ++k) {
    const std::uint64_t before = f->gradient_calls();
    const StepReport r = lorenza_step(s, w, *f, {}, cfg, cfg.alpha);
    if (r.refreshed) refreshed_at.push_back(k);
    CHECK(f->gradient_calls() - before == (r.refreshed ? 2u : 1u));
  }
  CHECK(refreshed_at == std::vector<std::int64_t>{200, 400});
  CHECK(f->gradient_calls() == 1 + 401 + 2);
  CHECK(f->value_calls() == 2 * 401);
}

TEST_CASE("lorenza: grad-norm trigger and moment reset") {
  std::mt19937_64 gen(2);
  auto f = quadratic_objective(one("w", ts::fixture_matrix(gen, 3, 5)), 1.0);
  ParamSet w = one("w", Matrix(3, 5));
  LorenzaConfig cfg;
  cfg.rank = 2;
  cfg.refresh = GradNormRefresh{INFINITY};
  cfg.reset_moments_on_refresh = true;
  LorenzaState s = lorenza_init(w, cfg, *f, {}, RngStream(3, 0));
  // Step 0 reuses the init subspace; every later step re-sketches.
  CHECK_FALSE(lorenza_step(s, w, *f, {}, cfg, cfg.alpha).refreshed);
  CHECK(s.layers[0].t == 1);
  for (int k = 0; k < 5; ++k) {
    CHECK(lorenza_step(s, w, *f, {}, cfg, cfg.alpha).refreshed);
    CHECK(s.layers[0].t == 1);
  }

  cfg.refresh = GradNormRefresh{0.0};
  cfg.reset_moments_on_refresh = false;
  LorenzaState never = lorenza_init(w, cfg, *f, {}, RngStream(3, 0));
  for (int k = 0; k < 5; ++k) CHECK_FALSE(lorenza_step(never, w, *f, {}, cfg, cfg.alpha).refreshed);
  CHECK(never.layers[0].t == 5);
}

TEST_CASE("lorenza: updates stay in span(Q) without decay") {
  std::mt19937_64 gen(3);
  auto f = quadratic_objective(one("w", ts::fixture_matrix(gen, 5, 9)), 1.0);
  ParamSet w = one("w", ts::fixture_matrix(gen, 5, 9));
  LorenzaConfig cfg;
  cfg.rank = 2;
  cfg.alpha = 0.01;
  cfg.refresh = PeriodicRefresh{1000};
  LorenzaState s = lorenza_init(w, cfg, *f, {}, RngStream(4, 0));
  for (int k = 0; k < 10; ++k) {
    const Matrix before = w[0].value;
    lorenza_step(s, w, *f, {}, cfg, cfg.alpha);
    const Matrix d = w[0].value - before;
    const Matrix& q = s.layers[0].sub.q;
    CHECK(max_abs(d - matmul(q, matmul_tn(q, d))) <= 1e-14);
  }
}

TEST_CASE("lorenza: one gradient call per step, 2q value calls") {
  std::mt19937_64 gen(4);
  auto f = quadratic_objective(one("w", ts::fixture_matrix(gen, 4, 4)), 1.0);
  ParamSet w = one("w", Matrix(4, 4));
  LorenzaConfig cfg;
  cfg.rank = 2;
  cfg.q = 2;
  cfg.refresh = PeriodicRefresh{1000};
  LorenzaState s = lorenza_init(w, cfg, *f, {}, RngStream(5, 0));
  f->reset_counters();
  for (int k = 0; k < 7; ++k) lorenza_step(s, w, *f, {}, cfg, cfg.alpha);
  CHECK(f->gradient_calls() == 7);
  CHECK(f->value_calls() == 28);
  f->reset_counters();
  for (int k = 0; k < 7; ++k) lowrank_adam_step(s, w, *f, {}, cfg, cfg.alpha);
  CHECK(f->gradient_calls() == 7);
  CHECK(f->value_calls() == 0);
}

TEST_CASE("full-rank low-rank adam is adam in rotated coordinates") {
  // With square orthogonal Q fixed, W = Q W~ and ||Q W~ - T|| = ||W~ - Q^T T||,
  // so plain Adam on the rotated quadratic must reproduce Q^T W.
  std::mt19937_64 gen(5);
  const Matrix target = ts::fixture_matrix(gen, 4, 6);
  auto f = quadratic_objective(one("w", target), 1.0);
  ParamSet wl = one("w", ts::fixture_matrix(gen, 4, 6, 0.3));
  LorenzaConfig lc;
  lc.alpha = 0.01;
  lc.rank = 4;
  lc.rho = 0.0;
  lc.refresh = PeriodicRefresh{100000};
  LorenzaState ls = lorenza_init(wl, lc, *f, {}, RngStream(6, 0));
  const Matrix q = ls.layers[0].sub.q;

  auto rotated = quadratic_objective(one("w", matmul_tn(q, target)), 1.0);
  ParamSet wa = one("w", matmul_tn(q, wl[0].value));
  AdamConfig ac;
  ac.lr = 0.01;
  AdamState as = adam_init(wa);
  for (int k = 0; k < 100; ++k) {
    adam_step(as, wa, *rotated, {}, ac);
    lowrank_adam_step(ls, wl, *f, {}, lc, lc.alpha);
  }
  CHECK(max_abs(matmul_tn(q, wl[0].value) - wa[0].value) <= 1e-10);
  CHECK(f->probe_value(wl, {}) < 0.5 * f->probe_value(one("w", Matrix(4, 6)), {}));
}

TEST_CASE("gsam decomposition identities") {
  const ParamSet shape = one("w", Matrix(2, 2));
  GradSet s = shape.zeros_like<GradTag>(), g = s;
  s[0].value = Matrix::from_rows({{1.0, 2.0}, {0.0, -1.0}});

  g[0].value = s[0].value * 3.0;
  CHECK(max_abs(gsam_decompose(g, s, 0.7)[0].value - s[0].value) <= 1e-15);

  g[0].value = Matrix::from_rows({{2.0, -1.0}, {5.0, 0.0}});
  CHECK(frobenius_dot(g[0].value, s[0].value) == 0.0);
  CHECK(max_abs(gsam_decompose(g, s, 0.7)[0].value - (s[0].value - g[0].value * 0.7)) <= 1e-15);

  std::mt19937_64 gen(6);
  g[0].value = ts::fixture_matrix(gen, 2, 2);
  s[0].value = ts::fixture_matrix(gen, 2, 2);
  const double c = frobenius_dot(g[0].value, s[0].value) / frobenius_dot(s[0].value, s[0].value);
  const Matrix perp = g[0].value - s[0].value * c;
  const GradSet out = gsam_decompose(g, s, 0.3);
  CHECK(max_abs(out[0].value - (s[0].value - perp * 0.3)) <= 1e-14);
  CHECK(std::abs(frobenius_dot(perp, s[0].value)) <= 1e-14);
}

TEST_CASE("schedules") {
  const RhoSchedule sched{1e-6, 0.01, 0.0, 1e-3};
  CHECK(rho_schedule(sched, 0.0) == 1e-6);
  CHECK(rho_schedule(sched, 1e-3) == 0.01);
  CHECK(rho_schedule(sched, 5e-4) == doctest::Approx(1e-6 + 0.5 * (0.01 - 1e-6)).epsilon(1e-15));
  CHECK(rho_schedule(sched, 1.0) == 0.01);
  CHECK_THROWS_AS(rho_schedule({1e-6, 0.01, 1e-3, 1e-3}, 1e-3), ConfigError);
  CHECK(cosine_lr(0, 100, 0.1, 0.001) == 0.1);
  CHECK(cosine_lr(100, 100, 0.1, 0.001) == 0.001);
  CHECK(cosine_lr(50, 100, 0.1, 0.0) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(resolve_rho(RhoSetting{0.2}, 123.0) == 0.2);
}
