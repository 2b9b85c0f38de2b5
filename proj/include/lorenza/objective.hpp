#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lorenza/matrix.hpp"
#include "lorenza/params.hpp"

namespace lorenza {

// Loss oracle used by every optimizer. value()/gradient() are the counted
// entry points an optimizer may call; probe_value()/probe_gradient() are
// uncounted and exist for logging and diagnostics only.
class Objective {
 public:
  virtual ~Objective() = default;
  Objective() = default;
  Objective(const Objective&) = delete;
  Objective& operator=(const Objective&) = delete;

  double value(const ParamSet& params, const Batch& batch);
  GradSet gradient(const ParamSet& params, const Batch& batch);

  double probe_value(const ParamSet& params, const Batch& batch) const;
  GradSet probe_gradient(const ParamSet& params, const Batch& batch) const;

  std::uint64_t value_calls() const noexcept { return value_calls_.load(); }
  std::uint64_t gradient_calls() const noexcept { return gradient_calls_.load(); }
  void reset_counters() noexcept;
  // Used when restoring a checkpoint.
  void set_counters(std::uint64_t value_calls, std::uint64_t gradient_calls) noexcept;

  virtual std::string name() const = 0;
  // Zero-filled parameters with the objective's layer layout.
  virtual ParamSet layout() const = 0;
  // Number of samples a batch may index; 0 for deterministic objectives.
  virtual std::size_t dataset_size() const { return 0; }

 protected:
  virtual double evaluate(const ParamSet& params, const Batch& batch) const = 0;
  virtual GradSet differentiate(const ParamSet& params, const Batch& batch) const = 0;

  void check_params(const ParamSet& params) const;

 private:
  std::atomic<std::uint64_t> value_calls_{0};
  std::atomic<std::uint64_t> gradient_calls_{0};
};

// f(W) = (curvature/2) sum_l ||W_l - target_l||_F^2.
std::shared_ptr<Objective> quadratic_objective(ParamSet target, double curvature);

// f(W) = sum_l <C_l, W_l>. Central differences are exact on it.
std::shared_ptr<Objective> linear_objective(ParamSet coefficients);

struct DoubleWellSpec {
  double center_sharp = -2.0;
  double width_sharp = 0.2;
  double center_flat = 2.0;
  double width_flat = 2.0;
};

// Scalar landscape with a narrow and a wide well, both bottoming near 1:
// f(x) = 2 - exp(-((x-cs)/ws)^2) - exp(-((x-cf)/wf)^2). Single 1x1 layer "x".
std::shared_ptr<Objective> double_well_objective(const DoubleWellSpec& spec = {});

// Regression data for the MLP testbed; one sample per row.
struct RegressionData {
  Matrix inputs;   // n x d_in
  Matrix targets;  // n x d_out
};

// Synthetic data: standard normal inputs, targets from a random teacher
// network with the same layer dims plus small noise.
RegressionData make_teacher_dataset(const std::vector<std::size_t>& layer_dims,
                                    std::uint64_t dataset_seed, std::size_t n_samples);

// Reads a CSV with header x_0,...,x_d,y (one target column).
RegressionData load_regression_csv(const std::filesystem::path& path);

// Bias-free linear -> ReLU -> ... -> linear network, loss is the mean over
// the batch of 0.5 * ||prediction - target||^2. Layer l ("layer<l>") maps
// dims[l] -> dims[l+1].
std::shared_ptr<Objective> mlp_objective(const std::vector<std::size_t>& layer_dims,
                                         std::uint64_t dataset_seed, std::size_t n_samples);
std::shared_ptr<Objective> mlp_objective(const std::vector<std::size_t>& layer_dims,
                                         RegressionData data);

// f(A, B) = 0.5 ||observed - A B||_F^2 with A: m x k, B: k x n.
std::shared_ptr<Objective> matrix_factorization_objective(Matrix observed, std::size_t rank);

// Central-difference gradient from value() calls only (2 per entry).
GradSet finite_diff_gradient(Objective& oracle, const ParamSet& params, const Batch& batch,
                             double h);

// Largest |g - g_ref| / max(|g_ref|, floor) over entries with |g_ref| > floor.
double max_relative_error(const GradSet& g, const GradSet& g_ref, double floor = 1e-8);

}  // namespace lorenza
