#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "lorenza/errors.hpp"
#include "lorenza/harness/config.hpp"
#include "lorenza/harness/memory.hpp"
#include "lorenza/harness/run.hpp"
#include "lorenza/harness/selftest.hpp"
#include "lorenza/rng.hpp"
#include "lorenza/schedule.hpp"
#include "lorenza/ssrf.hpp"

namespace py = pybind11;
using namespace lorenza;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
  std::vector<double> data(a.data(), a.data() + rows * cols);
  return Matrix(rows, cols, std::move(data));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::memcpy(out.mutable_data(), m.data().data(), m.size() * sizeof(double));
  return out;
}

ParamSet to_params(const Objective& f, const std::vector<Array>& arrays) {
  ParamSet p = f.layout();
  if (arrays.size() != p.size()) throw DimensionError("wrong number of parameter arrays");
  ParamSet out;
  for (std::size_t i = 0; i < p.size(); ++i) out.add(p[i].name, to_matrix(arrays[i]));
  if (!out.congruent_with(p)) throw DimensionError("parameter shapes do not match the objective");
  return out;
}

Batch to_batch(const Objective& f, const std::optional<std::vector<std::size_t>>& idx) {
  if (idx) return Batch{*idx};
  return harness::full_batch(f);
}

// Wraps an objective for Python; counters stay with the object.
class PyObjective {
 public:
  explicit PyObjective(const std::string& spec) : f_(harness::make_objective(harness::Json::parse(spec))) {}

  std::string name() const { return f_->name(); }

  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> layout() const {
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> out;
    for (const auto& l : f_->layout()) {
      const Matrix n = l.natural();
      out.push_back({l.name, {n.rows(), n.cols()}});
    }
    return out;
  }

  double value(const std::vector<Array>& params, const std::optional<std::vector<std::size_t>>& batch) {
    return f_->value(to_params(*f_, params), to_batch(*f_, batch));
  }

  std::vector<Array> gradient(const std::vector<Array>& params,
                              const std::optional<std::vector<std::size_t>>& batch) {
    const GradSet g = f_->gradient(to_params(*f_, params), to_batch(*f_, batch));
    std::vector<Array> out;
    for (const auto& l : g) out.push_back(to_array(l.natural()));
    return out;
  }

  std::uint64_t value_calls() const { return f_->value_calls(); }
  std::uint64_t gradient_calls() const { return f_->gradient_calls(); }
  void reset_counters() { f_->reset_counters(); }

 private:
  std::shared_ptr<Objective> f_;
};

std::string trial_to_json(const harness::TrialResult& t) {
  harness::Json j;
  j["seed"] = t.seed;
  j["metrics_path"] = t.metrics_path.string();
  j["termination"] = t.termination;
  j["steps"] = t.steps;
  j["final_loss"] = t.final_loss;
  j["final_grad_norm_sq"] = t.final_grad_norm_sq;
  j["gradient_calls"] = t.gradient_calls;
  j["value_calls"] = t.value_calls;
  j["refreshes"] = t.refreshes;
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_lorenza, m) {
  m.doc() = "Native core: optimizers, sketches and the experiment harness.";

  static py::exception<Error> base(m, "LorenzaError", PyExc_RuntimeError);
  static py::exception<ConfigError> config(m, "ConfigError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def("philox4x32", &philox4x32, py::arg("counter"), py::arg("key"));

  m.def(
      "gaussian",
      [](std::uint64_t seed, std::uint64_t stream, std::size_t rows, std::size_t cols, double variance) {
        RngStream rng(seed, stream);
        return to_array(sample_gaussian(rng, rows, cols, variance));
      },
      py::arg("seed"), py::arg("stream"), py::arg("rows"), py::arg("cols"), py::arg("variance") = 1.0);

  m.def(
      "ssrf",
      [](const Array& a, std::size_t rank, std::uint64_t seed, int power_iters) {
        RngStream rng(seed, 0);
        const Subspace s = ssrf(to_matrix(a), rank, rng, {power_iters, 0});
        return py::make_tuple(to_array(s.q), to_array(s.r));
      },
      py::arg("a"), py::arg("rank"), py::arg("seed") = 0, py::arg("power_iters") = 0,
      "Returns (Q, R) with orthonormal Q (m x r) and R = Q^T A.");

  m.def(
      "rho_schedule",
      [](double lr, double rho_min, double rho_max, double lr_min, double lr_max) {
        return rho_schedule({rho_min, rho_max, lr_min, lr_max}, lr);
      },
      py::arg("lr"), py::arg("rho_min"), py::arg("rho_max"), py::arg("lr_min"), py::arg("lr_max"));
  m.def("cosine_lr", &cosine_lr, py::arg("step"), py::arg("total"), py::arg("lr_max"),
        py::arg("lr_min"));

  py::class_<PyObjective>(m, "Objective")
      .def(py::init<const std::string&>(), py::arg("spec_json"))
      .def_property_readonly("name", &PyObjective::name)
      .def("layout", &PyObjective::layout)
      .def("value", &PyObjective::value, py::arg("params"), py::arg("batch") = py::none())
      .def("gradient", &PyObjective::gradient, py::arg("params"), py::arg("batch") = py::none())
      .def_property_readonly("value_calls", &PyObjective::value_calls)
      .def_property_readonly("gradient_calls", &PyObjective::gradient_calls)
      .def("reset_counters", &PyObjective::reset_counters);

  m.def(
      "run_trial",
      [](const std::string& config, std::uint64_t seed) {
        const auto cfg = harness::parse_run_config(harness::Json::parse(config));
        harness::TrialResult r;
        {
          py::gil_scoped_release release;
          r = harness::run_trial(cfg, seed);
        }
        return trial_to_json(r);
      },
      py::arg("config_json"), py::arg("seed"));

  m.def(
      "run_experiment",
      [](const std::string& config) {
        const auto cfg = harness::parse_run_config(harness::Json::parse(config));
        harness::ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = harness::run_experiment(cfg);
        }
        harness::Json j;
        j["summary_csv"] = r.summary_csv.string();
        j["trials"] = harness::Json::array();
        for (const auto& t : r.trials) j["trials"].push_back(harness::Json::parse(trial_to_json(t)));
        return j.dump();
      },
      py::arg("config_json"));

  m.def(
      "memory_report",
      [](const std::string& config) {
        const auto cfg = harness::parse_run_config(harness::Json::parse(config));
        const auto f = harness::make_objective(cfg.objective);
        return harness::memory_report(f->layout(), cfg.optimizer).to_json().dump();
      },
      py::arg("config_json"));

  m.def("selftest", [] {
    std::vector<py::tuple> out;
    for (const auto& c : harness::run_selftest()) out.push_back(py::make_tuple(c.name, c.passed, c.detail));
    return out;
  });
}
