#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "lorenza/matrix.hpp"

namespace lorenza {

// Counter-based random stream (Philox4x32-10).
//
// The 128-bit Philox counter is (stream_id, position); the key is the seed.
// A stream is therefore fully described by (seed, stream_id, position), and
// two streams with different ids never overlap. Streams are single-owner;
// derive independent children with split() rather than sharing one.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t position = 0) noexcept
      : seed_(seed), stream_id_(stream_id), position_(position) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  // Number of 64-bit words consumed so far.
  std::uint64_t position() const noexcept { return position_; }

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1).
  double uniform() noexcept;
  // Standard normal via Box-Muller; consumes two words per draw.
  double normal() noexcept;

  // Child stream keyed by (seed, hash(stream_id, child)). Does not advance this stream.
  RngStream split(std::uint64_t child) const noexcept;

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t position_ = 0;
};

// One raw Philox4x32-10 block; exposed for tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

// rows x cols matrix with i.i.d. N(0, variance) entries.
Matrix sample_gaussian(RngStream& rng, std::size_t rows, std::size_t cols, double variance);

}  // namespace lorenza
