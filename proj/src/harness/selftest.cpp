#include "lorenza/harness/selftest.hpp"

#include <cmath>
#include <functional>

#include "lorenza/errors.hpp"
#include "lorenza/harness/checkpoint.hpp"
#include "lorenza/harness/memory.hpp"
#include "lorenza/rge.hpp"
#include "lorenza/schedule.hpp"
#include "lorenza/ssrf.hpp"

namespace lorenza::harness {

namespace {

ParamSet random_params(std::uint64_t seed, std::vector<std::pair<std::size_t, std::size_t>> shapes) {
  RngStream rng(seed, 7);
  ParamSet p;
  for (std::size_t i = 0; i < shapes.size(); ++i)
    p.add("w" + std::to_string(i), sample_gaussian(rng, shapes[i].first, shapes[i].second, 1.0));
  return p;
}

std::shared_ptr<Objective> small_quadratic() {
  return quadratic_objective(random_params(11, {{3, 5}, {4, 4}}), 1.5);
}

std::string check_philox() {
  const auto out = philox4x32({0, 0, 0, 0}, {0, 0});
  const std::array<std::uint32_t, 4> want{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8};
  return out == want ? "" : "known-answer mismatch";
}

std::string check_rge_linear() {
  const ParamSet c = random_params(3, {{2, 3}});
  auto f = linear_objective(c);
  const ParamSet w = random_params(4, {{2, 3}});
  RngStream rng(5, 0);
  const GradSet d = draw_direction(w, FullGaussian{}, rng);
  const double coeff = directional_coefficient(*f, w, {}, d, 1e-3);
  const double exact = joint_dot(c.as<GradTag>(), d);
  const double rel = std::abs(coeff - exact) / std::max(1.0, std::abs(exact));
  return rel <= 1e-10 ? "" : "relative error " + std::to_string(rel);
}

std::string check_qr_and_ssrf() {
  RngStream rng(9, 1);
  const Matrix u = sample_gaussian(rng, 12, 3, 1.0);
  const Matrix v = sample_gaussian(rng, 3, 20, 1.0);
  const Matrix a = matmul(u, v);
  const Subspace s = ssrf(a, 3, rng);
  const Matrix qtq = matmul_tn(s.q, s.q);
  const double orth = max_abs(qtq - Matrix::identity(3));
  const double err = approximation_error(a, s) / frobenius_norm(a);
  if (orth > 1e-12) return "Q not orthonormal";
  if (err > 1e-9) return "exact-rank error " + std::to_string(err);
  return "";
}

std::string check_counters() {
  auto f = small_quadratic();
  ParamSet w = f->layout();
  AdazoState s = adazo_init(w);
  AdazoConfig cfg;
  cfg.lr = 1e-2;
  RngStream rng(1, 0);
  for (int i = 0; i < 10; ++i) adazo_step(s, w, *f, {}, cfg, rng);
  if (f->gradient_calls() != 10 || f->value_calls() != 20) return "adazo counts off";

  auto g = small_quadratic();
  ParamSet w2 = g->layout();
  SamState ss = sam_init(w2);
  SamConfig sc;
  for (int i = 0; i < 10; ++i) sam_step(ss, w2, *g, {}, sc);
  if (g->gradient_calls() != 20) return "sam counts off";

  auto h = small_quadratic();
  ParamSet w3 = random_params(2, {{3, 5}, {4, 4}});
  LorenzaConfig lc;
  lc.rank = 2;
  lc.refresh = PeriodicRefresh{4};
  LorenzaState ls = lorenza_init(w3, lc, *h, {}, RngStream(3, 0));
  for (int i = 0; i < 10; ++i) lorenza_step(ls, w3, *h, {}, lc, lc.alpha);
  // refreshes at t = 0, 4, 8
  if (h->gradient_calls() != 13) return "lorenza gradient count " + std::to_string(h->gradient_calls());
  return "";
}

std::string check_reductions() {
  auto f = small_quadratic();
  ParamSet a = random_params(21, {{3, 5}, {4, 4}});
  ParamSet b = a;
  AdamState as = adam_init(a);
  AdazoState zs = adazo_init(b);
  AdamConfig ac;
  ac.lr = 1e-2;
  AdazoConfig zc;
  zc.lr = 1e-2;
  zc.rho = 0.0;
  RngStream rng(4, 0);
  for (int i = 0; i < 20; ++i) {
    adam_step(as, a, *f, {}, ac);
    adazo_step(zs, b, *f, {}, zc, rng);
  }
  if (!(a == b)) return "adazo(rho=0) differs from adam";

  ParamSet c = random_params(22, {{3, 5}, {4, 4}});
  ParamSet d = c;
  LorenzaConfig lc;
  lc.rank = 2;
  lc.rho = 0.0;
  lc.refresh = PeriodicRefresh{5};
  LorenzaState l1 = lorenza_init(c, lc, *f, {}, RngStream(8, 0));
  LorenzaState l2 = lorenza_init(d, lc, *f, {}, RngStream(8, 0));
  for (int i = 0; i < 20; ++i) {
    lorenza_step(l1, c, *f, {}, lc, 1e-2);
    lowrank_adam_step(l2, d, *f, {}, lc, 1e-2);
  }
  return c == d ? "" : "lorenza(rho=0) differs from low-rank adam";
}

std::string check_checkpoint() {
  TrialSnapshot snap;
  snap.config_hash = 42;
  snap.seed = 3;
  snap.step = 7;
  snap.metrics = "{\"step\":0}\n";
  snap.params = random_params(1, {{2, 3}});
  snap.optimizer_rng = RngStream(1, 2, 3);
  snap.optimizer = adam_init(snap.params);
  const std::string bytes = encode_checkpoint(snap);
  const TrialSnapshot back = decode_checkpoint(bytes, 42);
  if (!(back.params == snap.params) || back.metrics != snap.metrics || back.step != 7)
    return "round trip mismatch";
  std::string bad = bytes;
  bad[bad.size() / 2] ^= 1;
  try {
    decode_checkpoint(bad);
    return "corruption not detected";
  } catch (const CheckpointError&) {
  }
  try {
    decode_checkpoint(bytes, 43);
    return "hash mismatch not detected";
  } catch (const CheckpointError&) {
  }
  return "";
}

std::string check_memory() {
  ParamSet p;
  p.add("w", Matrix(8, 32));
  const MemoryReport lr = memory_report(p, OptimizerKind::Lorenza, 4);
  if (lr.state_actual != 416 || lr.state_model != 192u) return "lorenza accounting";
  if (memory_report(p, OptimizerKind::Adam, 0).state_actual != 512) return "adam accounting";
  return "";
}

std::string check_schedules() {
  const RhoSchedule s{1e-6, 1e-2, 0.0, 1e-3};
  if (rho_schedule(s, 0.0) != 1e-6 || rho_schedule(s, 1e-3) != 1e-2) return "rho endpoints";
  if (cosine_lr(0, 100, 1e-2, 1e-4) != 1e-2 || cosine_lr(100, 100, 1e-2, 1e-4) != 1e-4)
    return "cosine endpoints";
  return "";
}

}  // namespace

std::vector<SelftestCheck> run_selftest() {
  const std::vector<std::pair<const char*, std::function<std::string()>>> checks = {
      {"philox known answer", check_philox},
      {"central difference exact on linear objective", check_rge_linear},
      {"range finder recovers exact-rank matrix", check_qr_and_ssrf},
      {"oracle call counts", check_counters},
      {"zero-radius reductions are bitwise", check_reductions},
      {"checkpoint round trip and rejection", check_checkpoint},
      {"optimizer-state accounting", check_memory},
      {"schedule endpoints", check_schedules},
  };
  std::vector<SelftestCheck> out;
  for (const auto& [name, fn] : checks) {
    SelftestCheck c{name, false, ""};
    try {
      c.detail = fn();
      c.passed = c.detail.empty();
    } catch (const std::exception& e) {
      c.detail = std::string("threw: ") + e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace lorenza::harness
