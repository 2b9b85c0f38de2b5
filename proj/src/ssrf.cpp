#include "lorenza/ssrf.hpp"

#include <algorithm>
#include <sstream>

#include "lorenza/errors.hpp"

namespace lorenza {

namespace {

Matrix orthonormal_sketch(const Matrix& a, std::size_t rank, RngStream& rng, int power_iters) {
  const Matrix omega = sample_gaussian(rng, a.cols(), rank, 1.0 / static_cast<double>(rank));
  Matrix q = qr_thin(matmul(a, omega)).q;
  for (int it = 0; it < power_iters; ++it) {
    const Matrix z = qr_thin(matmul_tn(a, q)).q;
    q = qr_thin(matmul(a, z)).q;
  }
  return q;
}

}  // namespace

Subspace ssrf(const Matrix& a, std::size_t rank, RngStream& rng, const SsrfOptions& opts) {
  if (a.empty()) throw DimensionError("ssrf: empty input");
  if (rank < 1 || rank > std::min(a.rows(), a.cols())) {
    std::ostringstream os;
    os << "ssrf: rank " << rank << " outside [1, " << std::min(a.rows(), a.cols()) << "]";
    throw ConfigError(os.str());
  }
  if (!all_finite(a)) throw NumericalError("ssrf: non-finite input");
  const double norm = frobenius_norm(a);
  if (norm == 0.0) throw DegenerateInputError("ssrf: input matrix is zero");

  Matrix q;
  try {
    q = orthonormal_sketch(a, rank, rng, opts.power_iters);
  } catch (const RankDeficiencyError&) {
    q = orthonormal_sketch(a, rank, rng, opts.power_iters);
  }
  Matrix r = matmul_tn(q, a);
  return Subspace{std::move(q), std::move(r), norm, opts.step};
}

double approximation_error(const Matrix& a, const Subspace& sub) {
  if (sub.q.rows() != a.rows()) throw DimensionError("approximation_error: row mismatch");
  const Matrix proj = matmul(sub.q, matmul_tn(sub.q, a));
  return frobenius_norm(a - proj);
}

}  // namespace lorenza
