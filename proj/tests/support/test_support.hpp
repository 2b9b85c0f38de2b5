#pragma once

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "lorenza/objective.hpp"
#include "lorenza/params.hpp"

namespace testing_support {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("lorenza_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Plain central differences through probe_value, written independently of
// the library's finite_diff_gradient.
inline lorenza::GradSet central_differences(const lorenza::Objective& f,
                                            const lorenza::ParamSet& w,
                                            const lorenza::Batch& batch, double h) {
  lorenza::GradSet g = w.zeros_like<lorenza::GradTag>();
  lorenza::ParamSet probe = w;
  for (std::size_t l = 0; l < w.size(); ++l) {
    auto src = w[l].value.data();
    auto dst = g[l].value.data();
    for (std::size_t k = 0; k < src.size(); ++k) {
      probe[l].value.data()[k] = src[k] + h;
      const double up = f.probe_value(probe, batch);
      probe[l].value.data()[k] = src[k] - h;
      const double down = f.probe_value(probe, batch);
      probe[l].value.data()[k] = src[k];
      dst[k] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

// Largest |a - b| / max(|b|, floor) over entries where |b| > floor.
inline double max_rel_error(const lorenza::GradSet& a, const lorenza::GradSet& b,
                            double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    auto x = a[l].value.data();
    auto y = b[l].value.data();
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (std::abs(y[k]) <= floor) continue;
      worst = std::max(worst, std::abs(x[k] - y[k]) / std::abs(y[k]));
    }
  }
  return worst;
}

// Independent RNG for test fixtures (not the library stream).
inline lorenza::Matrix fixture_matrix(std::mt19937_64& gen, std::size_t r, std::size_t c,
                                      double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  lorenza::Matrix m(r, c);
  for (double& x : m.data()) x = nd(gen);
  return m;
}

}  // namespace testing_support
