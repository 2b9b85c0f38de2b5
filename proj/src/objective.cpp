#include "lorenza/objective.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lorenza/errors.hpp"
#include "lorenza/rng.hpp"

namespace lorenza {

double Objective::value(const ParamSet& params, const Batch& batch) {
  check_params(params);
  value_calls_.fetch_add(1);
  return evaluate(params, batch);
}

GradSet Objective::gradient(const ParamSet& params, const Batch& batch) {
  check_params(params);
  gradient_calls_.fetch_add(1);
  GradSet g = differentiate(params, batch);
  require_congruent(params, g, "gradient");
  return g;
}

double Objective::probe_value(const ParamSet& params, const Batch& batch) const {
  check_params(params);
  return evaluate(params, batch);
}

GradSet Objective::probe_gradient(const ParamSet& params, const Batch& batch) const {
  check_params(params);
  return differentiate(params, batch);
}

void Objective::reset_counters() noexcept {
  value_calls_.store(0);
  gradient_calls_.store(0);
}

void Objective::set_counters(std::uint64_t value_calls, std::uint64_t gradient_calls) noexcept {
  value_calls_.store(value_calls);
  gradient_calls_.store(gradient_calls);
}

void Objective::check_params(const ParamSet& params) const {
  const ParamSet expected = layout();
  if (!params.congruent_with(expected))
    throw DimensionError(name() + ": parameters do not match the objective's layer layout");
}

namespace {

class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(ParamSet target, double curvature)
      : target_(std::move(target)), curvature_(curvature) {}

  std::string name() const override { return "quadratic"; }
  ParamSet layout() const override { return target_.zeros_like(); }

 protected:
  double evaluate(const ParamSet& w, const Batch&) const override {
    double acc = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) {
      const Matrix d = w[l].value - target_[l].value;
      acc += frobenius_dot(d, d);
    }
    return 0.5 * curvature_ * acc;
  }

  GradSet differentiate(const ParamSet& w, const Batch&) const override {
    GradSet g = w.zeros_like<GradTag>();
    for (std::size_t l = 0; l < w.size(); ++l)
      g[l].value = curvature_ * (w[l].value - target_[l].value);
    return g;
  }

 private:
  ParamSet target_;
  double curvature_;
};

class LinearObjective final : public Objective {
 public:
  explicit LinearObjective(ParamSet c) : c_(std::move(c)) {}

  std::string name() const override { return "linear"; }
  ParamSet layout() const override { return c_.zeros_like(); }

 protected:
  double evaluate(const ParamSet& w, const Batch&) const override {
    double acc = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) acc += frobenius_dot(c_[l].value, w[l].value);
    return acc;
  }
  GradSet differentiate(const ParamSet&, const Batch&) const override {
    return c_.as<GradTag>();
  }

 private:
  ParamSet c_;
};

class DoubleWellObjective final : public Objective {
 public:
  explicit DoubleWellObjective(const DoubleWellSpec& s) : s_(s) {}

  std::string name() const override { return "double_well"; }
  ParamSet layout() const override {
    ParamSet p;
    p.add("x", Matrix(1, 1));
    return p;
  }

 protected:
  double evaluate(const ParamSet& w, const Batch&) const override {
    const double x = w[0].value(0, 0);
    const double zs = (x - s_.center_sharp) / s_.width_sharp;
    const double zf = (x - s_.center_flat) / s_.width_flat;
    return 2.0 - std::exp(-zs * zs) - std::exp(-zf * zf);
  }

  GradSet differentiate(const ParamSet& w, const Batch&) const override {
    const double x = w[0].value(0, 0);
    const double zs = (x - s_.center_sharp) / s_.width_sharp;
    const double zf = (x - s_.center_flat) / s_.width_flat;
    GradSet g = w.zeros_like<GradTag>();
    g[0].value(0, 0) = 2.0 * zs / s_.width_sharp * std::exp(-zs * zs) +
                       2.0 * zf / s_.width_flat * std::exp(-zf * zf);
    return g;
  }

 private:
  DoubleWellSpec s_;
};

class MlpObjective final : public Objective {
 public:
  MlpObjective(std::vector<std::size_t> dims, RegressionData data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l)
      layout_.add("layer" + std::to_string(l), Matrix(dims_[l + 1], dims_[l]));
  }

  std::string name() const override { return "mlp"; }
  ParamSet layout() const override { return layout_; }
  std::size_t dataset_size() const override { return data_.inputs.rows(); }

 protected:
  double evaluate(const ParamSet& w, const Batch& batch) const override {
    check_batch(batch);
    const auto weights = naturals(w);
    double acc = 0.0;
    for (std::size_t idx : batch.indices) {
      const auto acts = forward(weights, idx);
      const std::vector<double>& out = acts.back();
      for (std::size_t k = 0; k < out.size(); ++k) {
        const double e = out[k] - data_.targets(idx, k);
        acc += 0.5 * e * e;
      }
    }
    return acc / static_cast<double>(batch.indices.size());
  }

  GradSet differentiate(const ParamSet& w, const Batch& batch) const override {
    check_batch(batch);
    const auto weights = naturals(w);
    const std::size_t n_layers = weights.size();
    std::vector<Matrix> grads;
    for (const auto& wl : weights) grads.emplace_back(wl.rows(), wl.cols());
    const double inv_b = 1.0 / static_cast<double>(batch.indices.size());

    for (std::size_t idx : batch.indices) {
      // acts[0] = input, acts[l+1] = output of layer l (post-ReLU except last).
      const auto acts = forward(weights, idx);
      std::vector<double> delta = acts.back();
      for (std::size_t k = 0; k < delta.size(); ++k) delta[k] -= data_.targets(idx, k);

      for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& wl = weights[l];
        const std::vector<double>& in = acts[l];
        for (std::size_t i = 0; i < wl.rows(); ++i)
          for (std::size_t j = 0; j < wl.cols(); ++j) grads[l](i, j) += inv_b * delta[i] * in[j];
        if (l == 0) break;
        std::vector<double> prev(wl.cols(), 0.0);
        for (std::size_t i = 0; i < wl.rows(); ++i)
          for (std::size_t j = 0; j < wl.cols(); ++j) prev[j] += wl(i, j) * delta[i];
        // ReLU mask: the stored activation is positive exactly where the pre-activation was.
        for (std::size_t j = 0; j < prev.size(); ++j)
          if (!(in[j] > 0.0)) prev[j] = 0.0;
        delta = std::move(prev);
      }
    }

    GradSet g;
    for (std::size_t l = 0; l < n_layers; ++l) g.add(w[l].name, std::move(grads[l]));
    return g;
  }

 private:
  void check_batch(const Batch& batch) const {
    if (batch.indices.empty()) throw BatchError("mlp: empty batch");
    for (std::size_t idx : batch.indices)
      if (idx >= data_.inputs.rows()) throw BatchError("mlp: batch index out of range");
  }

  static std::vector<Matrix> naturals(const ParamSet& w) {
    std::vector<Matrix> out;
    out.reserve(w.size());
    for (const auto& l : w) out.push_back(l.natural());
    return out;
  }

  std::vector<std::vector<double>> forward(const std::vector<Matrix>& weights,
                                           std::size_t idx) const {
    std::vector<std::vector<double>> acts;
    acts.reserve(weights.size() + 1);
    std::vector<double> x(data_.inputs.cols());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = data_.inputs(idx, j);
    acts.push_back(std::move(x));
    for (std::size_t l = 0; l < weights.size(); ++l) {
      const Matrix& wl = weights[l];
      const std::vector<double>& in = acts.back();
      std::vector<double> z(wl.rows(), 0.0);
      for (std::size_t i = 0; i < wl.rows(); ++i)
        for (std::size_t j = 0; j < wl.cols(); ++j) z[i] += wl(i, j) * in[j];
      if (l + 1 < weights.size())
        for (double& v : z) v = std::max(v, 0.0);
      acts.push_back(std::move(z));
    }
    return acts;
  }

  std::vector<std::size_t> dims_;
  RegressionData data_;
  ParamSet layout_;
};

class MatrixFactorizationObjective final : public Objective {
 public:
  MatrixFactorizationObjective(Matrix observed, std::size_t rank)
      : observed_(std::move(observed)) {
    layout_.add("A", Matrix(observed_.rows(), rank));
    layout_.add("B", Matrix(rank, observed_.cols()));
  }

  std::string name() const override { return "matrix_factorization"; }
  ParamSet layout() const override { return layout_; }

 protected:
  double evaluate(const ParamSet& w, const Batch&) const override {
    const Matrix res = residual(w);
    return 0.5 * frobenius_dot(res, res);
  }

  GradSet differentiate(const ParamSet& w, const Batch&) const override {
    const Matrix a = w[0].natural();
    const Matrix b = w[1].natural();
    const Matrix res = observed_ - matmul(a, b);
    GradSet g;
    g.add(w[0].name, -1.0 * matmul_nt(res, b));  // -(O - AB) B^T
    g.add(w[1].name, -1.0 * matmul_tn(a, res));  // -A^T (O - AB)
    return g;
  }

 private:
  Matrix residual(const ParamSet& w) const {
    return observed_ - matmul(w[0].natural(), w[1].natural());
  }

  Matrix observed_;
  ParamSet layout_;
};

}  // namespace

std::shared_ptr<Objective> quadratic_objective(ParamSet target, double curvature) {
  if (!(curvature > 0.0) || !std::isfinite(curvature))
    throw ConfigError("quadratic: curvature must be positive");
  if (target.empty()) throw DimensionError("quadratic: target has no layers");
  return std::make_shared<QuadraticObjective>(std::move(target), curvature);
}

std::shared_ptr<Objective> linear_objective(ParamSet coefficients) {
  if (coefficients.empty()) throw DimensionError("linear: no layers");
  return std::make_shared<LinearObjective>(std::move(coefficients));
}

std::shared_ptr<Objective> double_well_objective(const DoubleWellSpec& spec) {
  if (!(spec.width_sharp > 0.0) || !(spec.width_flat > 0.0))
    throw ConfigError("double_well: widths must be positive");
  if (spec.center_sharp == spec.center_flat)
    throw ConfigError("double_well: centers must differ");
  return std::make_shared<DoubleWellObjective>(spec);
}

RegressionData make_teacher_dataset(const std::vector<std::size_t>& dims,
                                    std::uint64_t dataset_seed, std::size_t n_samples) {
  if (dims.size() < 2) throw ConfigError("mlp: need at least two layer dims");
  if (n_samples == 0) throw ConfigError("mlp: n_samples must be >= 1");
  for (std::size_t d : dims)
    if (d == 0) throw ConfigError("mlp: layer dims must be positive");

  RngStream teacher_rng(dataset_seed, 0x7EAC);
  RngStream input_rng(dataset_seed, 0xDA7A);
  RngStream noise_rng(dataset_seed, 0x0015E);

  std::vector<Matrix> teacher;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    teacher.push_back(sample_gaussian(teacher_rng, dims[l + 1], dims[l], 1.0 / dims[l]));

  RegressionData data{sample_gaussian(input_rng, n_samples, dims.front(), 1.0),
                      Matrix(n_samples, dims.back())};
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::vector<double> h(dims.front());
    for (std::size_t j = 0; j < h.size(); ++j) h[j] = data.inputs(s, j);
    for (std::size_t l = 0; l < teacher.size(); ++l) {
      std::vector<double> z(teacher[l].rows(), 0.0);
      for (std::size_t i = 0; i < z.size(); ++i)
        for (std::size_t j = 0; j < h.size(); ++j) z[i] += teacher[l](i, j) * h[j];
      if (l + 1 < teacher.size())
        for (double& v : z) v = std::max(v, 0.0);
      h = std::move(z);
    }
    for (std::size_t k = 0; k < h.size(); ++k)
      data.targets(s, k) = h[k] + 0.01 * noise_rng.normal();
  }
  return data;
}

RegressionData load_regression_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("CSV '" + path.string() + "' is empty");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      header.push_back(cell);
    }
  }
  if (header.size() < 2 || header.back() != "y")
    throw ConfigError("CSV header must be x_0,...,x_d,y");
  for (std::size_t j = 0; j + 1 < header.size(); ++j)
    if (header[j] != "x_" + std::to_string(j))
      throw ConfigError("CSV header column " + std::to_string(j) + " must be x_" +
                        std::to_string(j));

  const std::size_t d = header.size() - 1;
  std::vector<double> xs, ys;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw ConfigError("CSV row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
      if (!std::isfinite(v))
        throw NumericalError("CSV row " + std::to_string(row) + ": non-finite value");
      (col < d ? xs : ys).push_back(v);
      ++col;
    }
    if (col != d + 1)
      throw ConfigError("CSV row " + std::to_string(row) + " has " + std::to_string(col) +
                        " columns, expected " + std::to_string(d + 1));
  }
  if (row == 0) throw ConfigError("CSV has no data rows");
  return RegressionData{Matrix(row, d, std::move(xs)), Matrix(row, 1, std::move(ys))};
}

std::shared_ptr<Objective> mlp_objective(const std::vector<std::size_t>& layer_dims,
                                         std::uint64_t dataset_seed, std::size_t n_samples) {
  return mlp_objective(layer_dims, make_teacher_dataset(layer_dims, dataset_seed, n_samples));
}

std::shared_ptr<Objective> mlp_objective(const std::vector<std::size_t>& layer_dims,
                                         RegressionData data) {
  if (layer_dims.size() < 2) throw ConfigError("mlp: need at least two layer dims");
  if (data.inputs.rows() == 0 || data.inputs.rows() != data.targets.rows())
    throw DimensionError("mlp: inputs and targets disagree on sample count");
  if (data.inputs.cols() != layer_dims.front() || data.targets.cols() != layer_dims.back())
    throw DimensionError("mlp: data dims do not match layer dims");
  return std::make_shared<MlpObjective>(layer_dims, std::move(data));
}

std::shared_ptr<Objective> matrix_factorization_objective(Matrix observed, std::size_t rank) {
  if (observed.empty()) throw DimensionError("matrix_factorization: empty observation");
  if (!all_finite(observed)) throw NumericalError("matrix_factorization: non-finite observation");
  if (rank == 0) throw ConfigError("matrix_factorization: rank must be >= 1");
  return std::make_shared<MatrixFactorizationObjective>(std::move(observed), rank);
}

GradSet finite_diff_gradient(Objective& oracle, const ParamSet& params, const Batch& batch,
                             double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_gradient: h must be positive");
  GradSet g = params.zeros_like<GradTag>();
  ParamSet probe = params;
  for (std::size_t l = 0; l < params.size(); ++l) {
    const Matrix& w = params[l].value;
    for (std::size_t i = 0; i < w.rows(); ++i)
      for (std::size_t j = 0; j < w.cols(); ++j) {
        probe[l].value(i, j) = w(i, j) + h;
        const double up = oracle.value(probe, batch);
        probe[l].value(i, j) = w(i, j) - h;
        const double down = oracle.value(probe, batch);
        probe[l].value(i, j) = w(i, j);
        if (!std::isfinite(up) || !std::isfinite(down)) {
          std::ostringstream os;
          os << "finite_diff_gradient: non-finite value at layer '" << params[l].name << "' ("
             << i << ", " << j << ")";
          throw NumericalError(os.str());
        }
        g[l].value(i, j) = (up - down) / (2.0 * h);
      }
  }
  return g;
}

double max_relative_error(const GradSet& g, const GradSet& g_ref, double floor) {
  require_congruent(g, g_ref, "max_relative_error");
  double worst = 0.0;
  for (std::size_t l = 0; l < g.size(); ++l) {
    auto a = g[l].value.data();
    auto b = g_ref[l].value.data();
    for (std::size_t k = 0; k < a.size(); ++k)
      if (std::abs(b[k]) > floor) worst = std::max(worst, std::abs(a[k] - b[k]) / std::abs(b[k]));
  }
  return worst;
}

}  // namespace lorenza
