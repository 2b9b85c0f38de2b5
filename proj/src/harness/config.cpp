#include "lorenza/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>

#include "lorenza/errors.hpp"

namespace lorenza::harness {

namespace {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename T>
T require(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing config key '") + key + "'");
  return get_or<T>(j, key, T{});
}

MomentConfig parse_moments(const Json& j) {
  MomentConfig m;
  m.beta1 = get_or(j, "beta1", m.beta1);
  m.beta2 = get_or(j, "beta2", m.beta2);
  m.eps = get_or(j, "eps", m.eps);
  return m;
}

RhoSetting parse_rho(const Json& j, const LrSchedule& lr, double fallback) {
  if (!j.contains("rho") || j.at("rho").is_null()) return fallback;
  const Json& r = j.at("rho");
  if (r.is_number()) return r.get<double>();
  if (!r.is_object()) throw ConfigError("config key 'rho': expected number or {min, max}");
  RhoSchedule s;
  s.rho_min = require<double>(r, "min");
  s.rho_max = require<double>(r, "max");
  s.lr_min = lr.lr_min;
  s.lr_max = lr.lr_max;
  return s;
}

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> known,
                         const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
}

PerturbationSign parse_sign(const Json& j) {
  const std::string s = get_or<std::string>(j, "perturbation_sign", "ascent");
  if (s == "ascent") return PerturbationSign::Ascent;
  if (s == "negated") return PerturbationSign::Negated;
  throw ConfigError("perturbation_sign must be 'ascent' or 'negated'");
}

LorenzaConfig parse_lorenza(const Json& j, const LrSchedule& lr, bool with_rho) {
  LorenzaConfig c;
  c.alpha = lr.lr_max;
  if (j.contains("eta") && !j.at("eta").is_null()) c.eta = j.at("eta").get<double>();
  c.moments = parse_moments(j);
  c.weight_decay = get_or(j, "weight_decay", 0.0);
  c.rank = get_or<std::size_t>(j, "rank", c.rank);
  if (j.contains("refresh")) {
    const Json& r = j.at("refresh");
    if (r.contains("every")) {
      c.refresh = PeriodicRefresh{r.at("every").get<std::int64_t>()};
    } else if (r.contains("grad_norm_threshold")) {
      const Json& t = r.at("grad_norm_threshold");
      c.refresh = GradNormRefresh{t.is_string() && t.get<std::string>() == "inf"
                                      ? std::numeric_limits<double>::infinity()
                                      : t.get<double>()};
    } else {
      throw ConfigError("refresh: expected {every} or {grad_norm_threshold}");
    }
  }
  c.reset_moments_on_refresh = get_or(j, "reset_moments_on_refresh", false);
  c.power_iters = get_or(j, "power_iters", 0);
  c.q = get_or(j, "q", 1);
  c.mu = get_or(j, "mu", 1e-3);
  c.rho = with_rho ? parse_rho(j, lr, 0.05) : RhoSetting{0.0};
  if (with_rho && j.contains("gsam_alpha") && !j.at("gsam_alpha").is_null())
    c.gsam_alpha = j.at("gsam_alpha").get<double>();
  c.sign = parse_sign(j);
  c.validate();
  return c;
}

Matrix gaussian_matrix(RngStream& rng, std::size_t rows, std::size_t cols, double scale) {
  return sample_gaussian(rng, rows, cols, scale * scale);
}

}  // namespace

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::AdamW: return "adamw";
    case OptimizerKind::Sam: return "sam";
    case OptimizerKind::AdaSam: return "adasam";
    case OptimizerKind::AdazoSam: return "adazo_sam";
    case OptimizerKind::Lorenza: return "lorenza";
    case OptimizerKind::LowRankAdam: return "lowrank_adam";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  for (auto k : {OptimizerKind::Adam, OptimizerKind::AdamW, OptimizerKind::Sam,
                 OptimizerKind::AdaSam, OptimizerKind::AdazoSam, OptimizerKind::Lorenza,
                 OptimizerKind::LowRankAdam})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown optimizer '" + name + "'");
}

double LrSchedule::at(std::int64_t step, std::int64_t total) const {
  return cosine ? cosine_lr(step, total, lr_max, lr_min) : lr_max;
}

OptimizerSpec parse_optimizer_spec(const Json& j) {
  if (!j.is_object()) throw ConfigError("optimizer must be an object");
  reject_unknown_keys(j,
                      {"name", "lr", "lr_min", "schedule", "beta1", "beta2", "eps",
                       "weight_decay", "rho", "mu", "q", "perturbation_sign", "rank", "refresh",
                       "reset_moments_on_refresh", "power_iters", "eta", "gsam_alpha"},
                      "optimizer");
  OptimizerSpec s;
  s.kind = parse_optimizer_kind(require<std::string>(j, "name"));
  s.lr.lr_max = require<double>(j, "lr");
  s.lr.lr_min = get_or(j, "lr_min", 0.0);
  const std::string sched = get_or<std::string>(j, "schedule", "constant");
  if (sched == "cosine") {
    s.lr.cosine = true;
  } else if (sched != "constant") {
    throw ConfigError("schedule must be 'constant' or 'cosine'");
  }
  if (!(s.lr.lr_max > 0.0)) throw ConfigError("lr must be > 0");
  if (s.lr.cosine && !(s.lr.lr_min >= 0.0 && s.lr.lr_min < s.lr.lr_max))
    throw ConfigError("cosine schedule requires 0 <= lr_min < lr");

  switch (s.kind) {
    case OptimizerKind::Adam:
    case OptimizerKind::AdamW:
      s.adam.lr = s.lr.lr_max;
      s.adam.moments = parse_moments(j);
      s.adam.weight_decay =
          get_or(j, "weight_decay", s.kind == OptimizerKind::AdamW ? 0.01 : 0.0);
      s.adam.validate();
      break;
    case OptimizerKind::Sam:
    case OptimizerKind::AdaSam:
      s.sam.lr = s.lr.lr_max;
      s.sam.rho = parse_rho(j, s.lr, 0.05);
      s.sam.moments = parse_moments(j);
      s.sam.adaptive = s.kind == OptimizerKind::AdaSam;
      s.sam.validate();
      break;
    case OptimizerKind::AdazoSam:
      s.adazo.lr = s.lr.lr_max;
      s.adazo.rho = parse_rho(j, s.lr, 0.05);
      s.adazo.mu = get_or(j, "mu", 1e-3);
      s.adazo.q = get_or(j, "q", 1);
      s.adazo.moments = parse_moments(j);
      s.adazo.sign = parse_sign(j);
      s.adazo.validate();
      break;
    case OptimizerKind::Lorenza:
      s.lorenza = parse_lorenza(j, s.lr, true);
      break;
    case OptimizerKind::LowRankAdam:
      s.lorenza = parse_lorenza(j, s.lr, false);
      break;
  }
  return s;
}

InitSpec parse_init_spec(const Json& j) {
  InitSpec s;
  if (j.is_null()) return s;
  reject_unknown_keys(j, {"kind", "scale", "low", "high", "value"}, "init");
  const std::string kind = get_or<std::string>(j, "kind", "gaussian");
  if (kind == "gaussian") {
    s.kind = InitSpec::Kind::Gaussian;
    s.scale = get_or(j, "scale", s.scale);
    if (!(s.scale >= 0.0)) throw ConfigError("init.scale must be >= 0");
  } else if (kind == "uniform") {
    s.kind = InitSpec::Kind::Uniform;
    s.low = require<double>(j, "low");
    s.high = require<double>(j, "high");
    if (!(s.low < s.high)) throw ConfigError("init requires low < high");
  } else if (kind == "constant") {
    s.kind = InitSpec::Kind::Constant;
    s.value = require<double>(j, "value");
  } else {
    throw ConfigError("init.kind must be gaussian, uniform or constant");
  }
  return s;
}

std::vector<std::uint64_t> RunConfig::trial_seeds() const {
  return grid.empty() ? std::vector<std::uint64_t>{seed} : grid;
}

RunConfig parse_run_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(j,
                      {"objective", "init", "optimizer", "total_steps", "batch_size", "seed",
                       "grid", "output_dir", "run_name", "log_every", "epsilon", "checkpoint_at",
                       "log_wall_time"},
                      "config");
  RunConfig c;
  c.raw = j;
  if (!j.contains("objective") || !j.at("objective").is_object())
    throw ConfigError("missing config key 'objective'");
  c.objective = j.at("objective");
  c.init = parse_init_spec(j.contains("init") ? j.at("init") : Json());
  if (!j.contains("optimizer")) throw ConfigError("missing config key 'optimizer'");
  c.optimizer_json = j.at("optimizer");
  c.optimizer = parse_optimizer_spec(c.optimizer_json);

  c.total_steps = require<std::int64_t>(j, "total_steps");
  if (c.total_steps < 1) throw ConfigError("total_steps must be >= 1");
  c.batch_size = get_or<std::size_t>(j, "batch_size", 0);
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.grid = get_or<std::vector<std::uint64_t>>(j, "grid", {});
  if (std::set<std::uint64_t>(c.grid.begin(), c.grid.end()).size() != c.grid.size())
    throw ConfigError("grid seeds must be distinct");
  c.output_dir = get_or<std::string>(j, "output_dir", "runs");
  c.run_name = get_or<std::string>(j, "run_name", "run");
  c.log_every = get_or<std::int64_t>(j, "log_every", 1);
  if (c.log_every < 1) throw ConfigError("log_every must be >= 1");
  if (j.contains("epsilon") && !j.at("epsilon").is_null()) {
    c.epsilon = j.at("epsilon").get<double>();
    if (!(*c.epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  }
  c.checkpoint_at = get_or<std::vector<std::int64_t>>(j, "checkpoint_at", {});
  c.log_wall_time = get_or(j, "log_wall_time", false);

  // Fail early on objective errors.
  (void)make_objective(c.objective);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  RunConfig c = parse_run_config(j);
  if (const char* dir = std::getenv("LORENZA_OUTPUT_DIR"); dir && *dir) c.output_dir = dir;
  return c;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  Json key;
  key["objective"] = cfg.objective;
  key["init"] = cfg.raw.contains("init") ? cfg.raw.at("init") : Json();
  key["optimizer"] = cfg.optimizer_json;
  key["total_steps"] = cfg.total_steps;
  key["batch_size"] = cfg.batch_size;
  key["epsilon"] = cfg.epsilon ? Json(*cfg.epsilon) : Json();
  return fnv1a64(key.dump());
}

std::shared_ptr<Objective> make_objective(const Json& spec) {
  const std::string name = require<std::string>(spec, "name");
  if (name == "quadratic") {
    reject_unknown_keys(spec, {"name", "shapes", "target_seed", "target_scale", "curvature"},
                        "objective");
    const auto shapes = require<std::vector<std::vector<std::size_t>>>(spec, "shapes");
    if (shapes.empty()) throw ConfigError("quadratic: shapes is empty");
    RngStream rng(get_or<std::uint64_t>(spec, "target_seed", 0), 0x7A);
    const double scale = get_or(spec, "target_scale", 1.0);
    ParamSet target;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
      if (shapes[l].size() != 2) throw ConfigError("quadratic: each shape is [rows, cols]");
      target.add("w" + std::to_string(l),
                 gaussian_matrix(rng, shapes[l][0], shapes[l][1], scale));
    }
    return quadratic_objective(std::move(target), get_or(spec, "curvature", 1.0));
  }
  if (name == "double_well") {
    reject_unknown_keys(spec, {"name", "center_sharp", "width_sharp", "center_flat", "width_flat"},
                        "objective");
    DoubleWellSpec s;
    s.center_sharp = get_or(spec, "center_sharp", s.center_sharp);
    s.width_sharp = get_or(spec, "width_sharp", s.width_sharp);
    s.center_flat = get_or(spec, "center_flat", s.center_flat);
    s.width_flat = get_or(spec, "width_flat", s.width_flat);
    return double_well_objective(s);
  }
  if (name == "mlp") {
    reject_unknown_keys(spec, {"name", "layer_dims", "csv", "dataset_seed", "n_samples"},
                        "objective");
    const auto dims = require<std::vector<std::size_t>>(spec, "layer_dims");
    if (spec.contains("csv")) {
      return mlp_objective(dims, load_regression_csv(spec.at("csv").get<std::string>()));
    }
    return mlp_objective(dims, get_or<std::uint64_t>(spec, "dataset_seed", 0),
                         get_or<std::size_t>(spec, "n_samples", 64));
  }
  if (name == "matrix_factorization") {
    reject_unknown_keys(spec, {"name", "rows", "cols", "rank_true", "data_seed", "rank"},
                        "objective");
    const auto rows = require<std::size_t>(spec, "rows");
    const auto cols = require<std::size_t>(spec, "cols");
    const auto rank_true = require<std::size_t>(spec, "rank_true");
    if (rank_true == 0 || rank_true > std::min(rows, cols))
      throw ConfigError("matrix_factorization: rank_true out of range");
    RngStream rng(get_or<std::uint64_t>(spec, "data_seed", 0), 0x3F);
    const Matrix u = gaussian_matrix(rng, rows, rank_true, 1.0);
    const Matrix v = gaussian_matrix(rng, rank_true, cols, 1.0);
    return matrix_factorization_objective(matmul(u, v),
                                          get_or<std::size_t>(spec, "rank", rank_true));
  }
  throw ConfigError("unknown objective '" + name + "'");
}

ParamSet initial_params(const Objective& objective, const InitSpec& init, RngStream& rng) {
  ParamSet p = objective.layout();
  for (auto& l : p) {
    switch (init.kind) {
      case InitSpec::Kind::Gaussian:
        l.value = gaussian_matrix(rng, l.value.rows(), l.value.cols(), init.scale);
        break;
      case InitSpec::Kind::Uniform:
        for (double& x : l.value.data()) x = init.low + (init.high - init.low) * rng.uniform();
        break;
      case InitSpec::Kind::Constant:
        for (double& x : l.value.data()) x = init.value;
        break;
    }
  }
  return p;
}

Batch sample_batch(const Objective& objective, std::size_t batch_size, RngStream rng) {
  const std::size_t n = objective.dataset_size();
  if (n == 0) return {};
  if (batch_size == 0) return full_batch(objective);
  Batch b;
  b.indices.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k)
    b.indices.push_back(std::min(n - 1, static_cast<std::size_t>(rng.uniform() * n)));
  return b;
}

Batch full_batch(const Objective& objective) {
  Batch b;
  b.indices.resize(objective.dataset_size());
  for (std::size_t k = 0; k < b.indices.size(); ++k) b.indices[k] = k;
  return b;
}

}  // namespace lorenza::harness
