#include "lorenza/harness/memory.hpp"

#include <algorithm>
#include <sstream>

#include "lorenza/errors.hpp"

namespace lorenza::harness {

namespace {

struct Formulas {
  const char* actual;
  const char* model;
};

Formulas formulas(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::Lorenza:
    case OptimizerKind::LowRankAdam:
      return {"sum_l m_l*r + 3*r*n_l", "sum_l n_l*r + 2*m_l*r"};
    case OptimizerKind::Adam:
    case OptimizerKind::AdamW:
      return {"sum_l 2*m_l*n_l", "sum_l 2*m_l*n_l"};
    case OptimizerKind::Sam:
      return {"sum_l 2*m_l*n_l", "sum_l n_l*m_l"};
    case OptimizerKind::AdaSam:
      return {"sum_l 2*m_l*n_l", "sum_l 4*n_l*m_l"};
    case OptimizerKind::AdazoSam:
      return {"sum_l 2*m_l*n_l", "n/a"};
  }
  return {"", ""};
}

}  // namespace

MemoryReport memory_report(const ParamSet& params, OptimizerKind kind, std::size_t rank) {
  const bool lowrank = kind == OptimizerKind::Lorenza || kind == OptimizerKind::LowRankAdam;
  MemoryReport rep;
  rep.optimizer = to_string(kind);
  rep.rank = lowrank ? rank : 0;
  const Formulas f = formulas(kind);
  rep.formula_actual = f.actual;
  rep.formula_model = f.model;
  if (kind != OptimizerKind::AdazoSam) rep.state_model = 0;

  for (const auto& layer : params) {
    LayerMemory l;
    l.name = layer.name;
    l.m = std::min(layer.value.rows(), layer.value.cols());
    l.n = std::max(layer.value.rows(), layer.value.cols());
    const std::uint64_t m = l.m, n = l.n, r = rank;
    l.weights = m * n;
    switch (kind) {
      case OptimizerKind::Lorenza:
      case OptimizerKind::LowRankAdam:
        if (rank < 1 || rank > l.m)
          throw ConfigError("memory_report: rank " + std::to_string(rank) + " invalid for layer '" +
                            l.name + "' (" + std::to_string(l.m) + "x" + std::to_string(l.n) + ")");
        l.state_actual = m * r + 3 * r * n;
        l.state_model = n * r + 2 * m * r;
        break;
      case OptimizerKind::Adam:
      case OptimizerKind::AdamW:
        l.state_actual = 2 * m * n;
        l.state_model = 2 * m * n;
        break;
      case OptimizerKind::Sam:
        l.state_actual = 2 * m * n;
        l.state_model = n * m;
        break;
      case OptimizerKind::AdaSam:
        l.state_actual = 2 * m * n;
        l.state_model = 4 * n * m;
        break;
      case OptimizerKind::AdazoSam:
        l.state_actual = 2 * m * n;
        break;
    }
    rep.weights += l.weights;
    rep.state_actual += l.state_actual;
    if (rep.state_model && l.state_model) *rep.state_model += *l.state_model;
    rep.layers.push_back(std::move(l));
  }
  return rep;
}

MemoryReport memory_report(const ParamSet& params, const OptimizerSpec& spec) {
  return memory_report(params, spec.kind, spec.lorenza.rank);
}

Json MemoryReport::to_json() const {
  Json j;
  j["optimizer"] = optimizer;
  j["rank"] = rank;
  j["weights"] = weights;
  j["state_actual"] = state_actual;
  j["state_model"] = state_model ? Json(*state_model) : Json(nullptr);
  j["formula_actual"] = formula_actual;
  j["formula_model"] = formula_model;
  Json ls = Json::array();
  for (const auto& l : layers)
    ls.push_back(Json{{"name", l.name},
                      {"m", l.m},
                      {"n", l.n},
                      {"weights", l.weights},
                      {"state_actual", l.state_actual},
                      {"state_model", l.state_model ? Json(*l.state_model) : Json(nullptr)}});
  j["layers"] = std::move(ls);
  return j;
}

std::string MemoryReport::to_text() const {
  std::ostringstream os;
  os << "optimizer " << optimizer;
  if (rank) os << " (r=" << rank << ")";
  os << "\nlayer,m,n,weights,state_actual,state_model\n";
  for (const auto& l : layers) {
    os << l.name << ',' << l.m << ',' << l.n << ',' << l.weights << ',' << l.state_actual << ',';
    if (l.state_model) os << *l.state_model;
    else os << "n/a";
    os << '\n';
  }
  os << "total,,," << weights << ',' << state_actual << ',';
  if (state_model) os << *state_model;
  else os << "n/a";
  os << "\nactual: " << formula_actual << "\nreference model: " << formula_model << '\n';
  return os.str();
}

}  // namespace lorenza::harness
