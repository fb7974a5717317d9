#pragma once

#include "nahmtx/util.hpp"

#include <vector>

namespace nahmtx {

// Iterative radix-2 complex FFT, power-of-2 lengths only. Enough for the
// zero-padded cyclic convolutions used by the plane Green operator.
namespace fft {

bool is_pow2(std::size_t n);
std::size_t next_pow2(std::size_t n);

// In-place transform of length n = 2^k; sign = -1 forward, +1 inverse.
// The inverse is unscaled; callers divide by n.
void transform(cplx* data, std::size_t n, int sign);

// 2D transform of an n x n row-major array (rows then columns).
void transform2d(cplx* data, std::size_t n, int sign);

} // namespace fft

} // namespace nahmtx
