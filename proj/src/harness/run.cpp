#include "lorenza/harness/run.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "lorenza/errors.hpp"
#include "lorenza/harness/basin.hpp"
#include "lorenza/harness/checkpoint.hpp"
#include "lorenza/harness/driver.hpp"

namespace lorenza::harness {

namespace {

// Sub-stream ids under the per-seed root stream.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kOptimizerStream = 2;
constexpr std::uint64_t kBatchStream = 3;

constexpr std::size_t kMaxSummaryParams = 4096;

RngStream batch_stream(std::uint64_t seed, std::int64_t step) {
  return RngStream(seed, kBatchStream).split(static_cast<std::uint64_t>(step));
}

Json opt_double(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

bool uses_subspace(OptimizerKind k) {
  return k == OptimizerKind::Lorenza || k == OptimizerKind::LowRankAdam;
}

Json params_json(const ParamSet& params) {
  Json out = Json::array();
  for (const auto& layer : params) {
    const Matrix nat = layer.natural();
    Json data = Json::array();
    for (double x : nat.data()) data.push_back(x);
    out.push_back(Json{{"name", layer.name},
                       {"rows", nat.rows()},
                       {"cols", nat.cols()},
                       {"data", std::move(data)}});
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw ConfigError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

Json MetricsRecord::to_json() const {
  Json j;
  j["step"] = step;
  j["loss"] = opt_double(loss);
  j["grad_norm_sq"] = opt_double(grad_norm_sq);
  j["lowrank_grad_norm"] = lowrank_grad_norm ? opt_double(*lowrank_grad_norm) : Json(nullptr);
  j["lr"] = lr;
  j["rho"] = rho;
  j["gradient_calls_cum"] = gradient_calls_cum;
  j["value_calls_cum"] = value_calls_cum;
  j["refreshes_cum"] = refreshes_cum;
  j["refresh_flag"] = refresh_flag;
  j["degenerate_flag"] = degenerate_flag;
  j["wall_ms"] = wall_ms;
  return j;
}

MetricsRecord MetricsRecord::from_json(const Json& j) {
  auto num = [&](const char* key) {
    const Json& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  MetricsRecord r;
  r.step = j.at("step").get<std::int64_t>();
  r.loss = num("loss");
  r.grad_norm_sq = num("grad_norm_sq");
  if (!j.at("lowrank_grad_norm").is_null())
    r.lowrank_grad_norm = j.at("lowrank_grad_norm").get<double>();
  r.lr = j.at("lr").get<double>();
  r.rho = j.at("rho").get<double>();
  r.gradient_calls_cum = j.at("gradient_calls_cum").get<std::uint64_t>();
  r.value_calls_cum = j.at("value_calls_cum").get<std::uint64_t>();
  r.refreshes_cum = j.value("refreshes_cum", std::uint64_t{0});
  r.refresh_flag = j.at("refresh_flag").get<bool>();
  r.degenerate_flag = j.value("degenerate_flag", false);
  r.wall_ms = j.value("wall_ms", 0.0);
  return r;
}

std::filesystem::path trial_metrics_path(const RunConfig& cfg, std::uint64_t seed) {
  return cfg.output_dir / cfg.run_name /
         (to_string(cfg.optimizer.kind) + "_seed" + std::to_string(seed) + ".jsonl");
}

std::filesystem::path trial_checkpoint_path(const RunConfig& cfg, std::uint64_t seed,
                                            std::int64_t step) {
  return cfg.output_dir / cfg.run_name /
         (to_string(cfg.optimizer.kind) + "_seed" + std::to_string(seed) + "_step" +
          std::to_string(step) + ".ckpt");
}

TrialResult run_trial(const RunConfig& cfg, std::uint64_t seed, const TrialOptions& opts) {
  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t hash = config_hash(cfg);
  const std::shared_ptr<Objective> objective = make_objective(cfg.objective);
  Objective& oracle = *objective;
  const Batch everything = full_batch(oracle);
  const OptimizerSpec& spec = cfg.optimizer;
  const std::int64_t total = cfg.total_steps;

  TrialResult result;
  result.seed = seed;
  result.metrics_path = trial_metrics_path(cfg, seed);
  std::filesystem::create_directories(result.metrics_path.parent_path());

  ParamSet params;
  OptimizerState state;
  RngStream opt_rng;
  std::string metrics;
  std::int64_t step = 0;
  std::uint64_t refreshes = 0;

  auto elapsed_ms = [&] {
    if (!cfg.log_wall_time) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
        .count();
  };

  // Loss and gradient at the current params, uncounted.
  double last_loss = 0.0;
  double last_gnorm = 0.0;
  auto observe = [&] {
    last_loss = oracle.probe_value(params, everything);
    last_gnorm = joint_norm_sq(oracle.probe_gradient(params, everything));
  };

  auto emit = [&](const StepReport& rep, double lr) {
    MetricsRecord rec;
    rec.step = step;
    rec.loss = last_loss;
    rec.grad_norm_sq = last_gnorm;
    if (std::isfinite(rep.lowrank_grad_norm)) rec.lowrank_grad_norm = rep.lowrank_grad_norm;
    rec.lr = lr;
    rec.rho = rep.rho;
    rec.gradient_calls_cum = oracle.gradient_calls();
    rec.value_calls_cum = oracle.value_calls();
    rec.refreshes_cum = refreshes;
    rec.refresh_flag = rep.refreshed;
    rec.degenerate_flag = rep.degenerate_perturbation;
    rec.wall_ms = elapsed_ms();
    metrics += rec.to_json().dump();
    metrics += '\n';
  };

  if (opts.resume) {
    TrialSnapshot snap = checkpoint_load(*opts.resume, hash);
    if (snap.seed != seed)
      throw CheckpointError("checkpoint: written for seed " + std::to_string(snap.seed) +
                            ", not " + std::to_string(seed));
    if (snap.step > total) throw CheckpointError("checkpoint: step beyond total_steps");
    params = std::move(snap.params);
    if (!params.congruent_with(oracle.layout()))
      throw CheckpointError("checkpoint: parameter layout does not match the objective");
    state = std::move(snap.optimizer);
    opt_rng = snap.optimizer_rng;
    metrics = std::move(snap.metrics);
    step = snap.step;
    refreshes = snap.refreshes;
    oracle.set_counters(snap.value_calls, snap.gradient_calls);
    observe();
  } else {
    const RngStream root(seed, 0);
    RngStream init_rng = root.split(kInitStream);
    opt_rng = root.split(kOptimizerStream);
    params = initial_params(oracle, cfg.init, init_rng);
    state = init_optimizer(spec, params, oracle,
                           sample_batch(oracle, cfg.batch_size, batch_stream(seed, 0)), opt_rng);
    StepReport init_report;
    if (uses_subspace(spec.kind)) {
      refreshes = 1;
      init_report.refreshed = true;
    }
    observe();
    emit(init_report, spec.lr.at(0, total));
  }

  auto snapshot = [&] {
    TrialSnapshot snap;
    snap.config_hash = hash;
    snap.seed = seed;
    snap.step = step;
    snap.value_calls = oracle.value_calls();
    snap.gradient_calls = oracle.gradient_calls();
    snap.refreshes = refreshes;
    snap.metrics = metrics;
    snap.params = params;
    snap.optimizer_rng = opt_rng;
    snap.optimizer = state;
    return snap;
  };

  std::string termination;
  if (cfg.epsilon && last_gnorm <= *cfg.epsilon) termination = "epsilon_reached";

  while (termination.empty() && step < total) {
    if (opts.stop_after && step >= *opts.stop_after) {
      termination = "interrupted";
      break;
    }
    const double lr = spec.lr.at(step, total);
    const Batch batch = sample_batch(oracle, cfg.batch_size, batch_stream(seed, step));
    StepReport rep;
    try {
      rep = step_optimizer(spec, state, params, oracle, batch, lr, opt_rng);
    } catch (const NumericalError&) {
      termination = "numerical_abort";
      break;
    }
    ++step;
    if (rep.refreshed) ++refreshes;

    const bool due = step % cfg.log_every == 0 || step == total;
    if (due || cfg.epsilon) observe();
    if (!std::isfinite(last_loss) || !all_finite(params)) termination = "numerical_abort";
    else if (cfg.epsilon && last_gnorm <= *cfg.epsilon) termination = "epsilon_reached";
    if (due || !termination.empty()) emit(rep, lr);

    for (std::int64_t at : cfg.checkpoint_at)
      if (at == step) checkpoint_save(trial_checkpoint_path(cfg, seed, step), snapshot());
  }
  if (termination.empty()) termination = "steps_exhausted";
  if (termination == "numerical_abort") observe();

  result.termination = termination;
  result.steps = step;
  result.final_loss = last_loss;
  result.final_grad_norm_sq = last_gnorm;
  result.gradient_calls = oracle.gradient_calls();
  result.value_calls = oracle.value_calls();
  result.refreshes = refreshes;
  result.final_params = params;

  if (termination != "interrupted") {
    Json s;
    s["summary"] = true;
    s["optimizer"] = to_string(spec.kind);
    s["seed"] = seed;
    s["termination"] = termination;
    s["steps"] = step;
    s["final_loss"] = opt_double(last_loss);
    s["final_grad_norm_sq"] = opt_double(last_gnorm);
    s["gradient_calls"] = result.gradient_calls;
    s["value_calls"] = result.value_calls;
    s["refreshes"] = refreshes;
    s["objective"] = cfg.objective;
    s["final_params"] =
        params.parameter_count() <= kMaxSummaryParams ? params_json(params) : Json::array();
    metrics += s.dump();
    metrics += '\n';
  }
  write_text(result.metrics_path, metrics);
  return result;
}

TrialResult resume_trial(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                         const TrialOptions& opts) {
  const TrialSnapshot snap = checkpoint_load(checkpoint, config_hash(cfg));
  TrialOptions o = opts;
  o.resume = checkpoint;
  return run_trial(cfg, snap.seed, o);
}

ExperimentResult run_experiment(const RunConfig& cfg, const TrialOptions& opts) {
  const std::vector<std::uint64_t> seeds = cfg.trial_seeds();
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LORENZA_THREADS"); env && *env) {
    char* end = nullptr;
    const unsigned long n = std::strtoul(env, &end, 10);
    if (*end != '\0' || n == 0) throw ConfigError("LORENZA_THREADS must be a positive integer");
    workers = n;
  }
  workers = std::min(workers, seeds.size());

  std::filesystem::create_directories(cfg.output_dir / cfg.run_name);
  ExperimentResult out;
  out.trials.resize(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        out.trials[i] = run_trial(cfg, seeds[i], opts);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::optional<DoubleWellSpec> well;
  if (cfg.objective.value("name", std::string{}) == "double_well")
    well = double_well_spec_from_json(cfg.objective);

  std::ostringstream csv;
  csv.precision(17);
  csv << "optimizer,seed,final_loss,final_grad_norm_sq,basin,gradient_calls,value_calls\n";
  for (const auto& t : out.trials) {
    std::string basin = "na";
    if (well && t.final_params.size() > 0)
      basin = to_string(classify_basin(t.final_params[0].value(0, 0), *well));
    csv << to_string(cfg.optimizer.kind) << ',' << t.seed << ',' << t.final_loss << ','
        << t.final_grad_norm_sq << ',' << basin << ',' << t.gradient_calls << ','
        << t.value_calls << '\n';
  }
  out.summary_csv = cfg.output_dir / cfg.run_name / "summary.csv";
  write_text(out.summary_csv, csv.str());
  return out;
}

MetricsFile read_metrics_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file '" + path.string() + "'");
  MetricsFile mf;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.value("summary", false)) mf.summary = std::move(j);
    else mf.records.push_back(MetricsRecord::from_json(j));
  }
  return mf;
}

}  // namespace lorenza::harness
