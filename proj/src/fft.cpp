#include "nahmtx/fft.hpp"

#include "nahmtx/errors.hpp"

#include <cmath>

namespace nahmtx::fft {

bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n)
{
    std::size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

void transform(cplx* a, std::size_t n, int sign)
{
    if (!is_pow2(n))
        throw ShapeError("fft: length must be a power of 2");
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1)
            j ^= bit;
        j ^= bit;
        if (i < j)
            std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = sign * 2.0 * M_PI / static_cast<double>(len);
        cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

void transform2d(cplx* a, std::size_t n, int sign)
{
    std::vector<cplx> col(n);
    for (std::size_t r = 0; r < n; ++r)
        transform(a + r * n, n, sign);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t r = 0; r < n; ++r)
            col[r] = a[r * n + c];
        transform(col.data(), n, sign);
        for (std::size_t r = 0; r < n; ++r)
            a[r * n + c] = col[r];
    }
}

} // namespace nahmtx::fft
