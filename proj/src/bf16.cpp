#include "dpdiag/bf16.hpp"

#include <cmath>
#include <limits>

namespace dpdiag::sim {

double quantize_bf16(double x) {
  if (x == 0.0 || !std::isfinite(x)) return x;

  const double ax = std::fabs(x);
  int exp = 0;
  std::frexp(ax, &exp);
  // ax lies in [2^bin_exp, 2^(bin_exp+1)).
  const int bin_exp = exp - 1;

  // Normal numbers have an 8-bit significand, so the spacing at this
  // magnitude is 2^(bin_exp - 7); below 2^-126 the format is subnormal with
  // fixed spacing 2^-133.
  const int quantum_exp = bin_exp >= -126 ? bin_exp - 7 : -133;
  const double quantum = std::ldexp(1.0, quantum_exp);

  // The quotient is exact (quantum is a power of two), so nearbyint under
  // the default rounding mode performs the round-to-nearest-even step.
  const double rounded = std::nearbyint(ax / quantum) * quantum;

  if (rounded >= std::ldexp(1.0, 128)) {
    return std::copysign(std::numeric_limits<double>::infinity(), x);
  }
  return std::copysign(rounded, x);
}

}  // namespace dpdiag::sim
