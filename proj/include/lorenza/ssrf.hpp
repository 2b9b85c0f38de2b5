#pragma once

#include <cstdint>

#include "lorenza/matrix.hpp"
#include "lorenza/rng.hpp"

namespace lorenza {

// Orthonormal basis for the dominant column space of a sketched matrix A,
// together with the coefficient factor R = Q^T A so that A ~ Q R.
struct Subspace {
  Matrix q;  // m x r
  Matrix r;  // r x n
  double source_norm = 0.0;
  std::int64_t created_at_step = 0;

  std::size_t rank() const noexcept { return q.cols(); }
};

struct SsrfOptions {
  // Extra (A A^T) passes applied to the sketch before orthonormalization.
  int power_iters = 0;
  std::int64_t step = 0;
};

// Randomized range finder: Omega ~ N(0, 1/r) of shape n x r, Y = A Omega,
// Q from thin QR of Y, R = Q^T A. Costs O(mnr + mr^2).
//
// A zero A throws DegenerateInputError. A rank-deficient sketch is retried
// once with a fresh Omega before RankDeficiencyError propagates.
Subspace ssrf(const Matrix& a, std::size_t rank, RngStream& rng, const SsrfOptions& opts = {});

// ||A - Q Q^T A||_F
double approximation_error(const Matrix& a, const Subspace& sub);

}  // namespace lorenza
