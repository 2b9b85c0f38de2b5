#include "lorenza/rng.hpp"

#include <cmath>
#include <numbers>

#include "lorenza/errors.hpp"

namespace lorenza {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t RngStream::next_u64() noexcept {
  const std::uint64_t block = position_ >> 1;
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
      static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  const auto out = philox4x32(ctr, key);
  const std::size_t lane = static_cast<std::size_t>(position_ & 1u) * 2;
  ++position_;
  return (static_cast<std::uint64_t>(out[lane]) << 32) | out[lane + 1];
}

double RngStream::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::split(std::uint64_t child) const noexcept {
  return RngStream(seed_, splitmix64(stream_id_ ^ splitmix64(child)));
}

Matrix sample_gaussian(RngStream& rng, std::size_t rows, std::size_t cols, double variance) {
  if (rows == 0 || cols == 0) throw DimensionError("sample_gaussian: shape must be positive");
  if (!(variance >= 0.0) || !std::isfinite(variance))
    throw ConfigError("sample_gaussian: variance must be finite and nonnegative");
  Matrix out(rows, cols);
  const double stddev = std::sqrt(variance);
  for (double& x : out.data()) {
    const double z = rng.normal();
    x = stddev == 0.0 ? 0.0 : stddev * z;
  }
  return out;
}

}  // namespace lorenza
