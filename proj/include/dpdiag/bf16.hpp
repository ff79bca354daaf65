#pragma once

namespace dpdiag::sim {

// Rounds x to the nearest value with an 8-bit exponent and 7-bit mantissa
// (round-to-nearest-even), returned as a double. Values beyond the largest
// finite bf16 round to infinity; zeros, infinities, and NaN pass through.
double quantize_bf16(double x);

}  // namespace dpdiag::sim
