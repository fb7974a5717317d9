// AVX2+FMA variants of the inner-loop kernels. Complex arrays are interleaved
// (re, im) pairs, two complex values per 256-bit register.

#if defined(__x86_64__) || defined(_M_X64)

#include "nahmtx/kern.hpp"

#include <immintrin.h>

namespace nahmtx::kern {
namespace {

__attribute__((target("avx2,fma")))
void a_caxpy(std::size_t n, cplx a, const cplx* x, cplx* y)
{
    const double* xp = reinterpret_cast<const double*>(x);
    double* yp = reinterpret_cast<double*>(y);
    const __m256d ar = _mm256_set1_pd(a.real());
    const __m256d ai = _mm256_set1_pd(a.imag());
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d v = _mm256_loadu_pd(xp + 2 * i);
        __m256d w = _mm256_loadu_pd(yp + 2 * i);
        __m256d vs = _mm256_permute_pd(v, 0x5); // swap re/im in each pair
        // (ar + i*ai)(vr + i*vi): re = ar*vr - ai*vi, im = ar*vi + ai*vr
        __m256d t = _mm256_mul_pd(ai, vs);
        __m256d r = _mm256_fmaddsub_pd(ar, v, t);
        _mm256_storeu_pd(yp + 2 * i, _mm256_add_pd(w, r));
    }
    for (; i < n; ++i)
        y[i] += a * x[i];
}

__attribute__((target("avx2,fma")))
void a_cscal(std::size_t n, cplx a, cplx* x)
{
    double* xp = reinterpret_cast<double*>(x);
    const __m256d ar = _mm256_set1_pd(a.real());
    const __m256d ai = _mm256_set1_pd(a.imag());
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d v = _mm256_loadu_pd(xp + 2 * i);
        __m256d vs = _mm256_permute_pd(v, 0x5);
        __m256d t = _mm256_mul_pd(ai, vs);
        _mm256_storeu_pd(xp + 2 * i, _mm256_fmaddsub_pd(ar, v, t));
    }
    for (; i < n; ++i)
        x[i] *= a;
}

__attribute__((target("avx2,fma")))
cplx a_cdotc(std::size_t n, const cplx* x, const cplx* y)
{
    const double* xp = reinterpret_cast<const double*>(x);
    const double* yp = reinterpret_cast<const double*>(y);
    // accRe lanes hold products contributing to the real part (xr*yr, xi*yi),
    // accIm lanes hold (xr*yi, xi*yr); combined after the loop.
    __m256d accRe = _mm256_setzero_pd();
    __m256d accIm = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d a = _mm256_loadu_pd(xp + 2 * i);
        __m256d b = _mm256_loadu_pd(yp + 2 * i);
        __m256d bs = _mm256_permute_pd(b, 0x5);
        accRe = _mm256_fmadd_pd(a, b, accRe);
        accIm = _mm256_fmadd_pd(a, bs, accIm);
    }
    alignas(32) double re4[4], im4[4];
    _mm256_store_pd(re4, accRe);
    _mm256_store_pd(im4, accIm);
    double rr = (re4[0] + re4[2]) + (re4[1] + re4[3]);
    // accIm lanes: even = xr*yi (positive), odd = xi*yr (negative)
    double ii = (im4[0] + im4[2]) - (im4[1] + im4[3]);
    for (; i < n; ++i) {
        const cplx& a = x[i];
        const cplx& b = y[i];
        rr += a.real() * b.real() + a.imag() * b.imag();
        ii += a.real() * b.imag() - a.imag() * b.real();
    }
    return {rr, ii};
}

__attribute__((target("avx2,fma")))
double a_cnrm2sq(std::size_t n, const cplx* x)
{
    const double* xp = reinterpret_cast<const double*>(x);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d v = _mm256_loadu_pd(xp + 2 * i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    alignas(32) double a4[4];
    _mm256_store_pd(a4, acc);
    double s = (a4[0] + a4[2]) + (a4[1] + a4[3]);
    for (; i < n; ++i)
        s += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
    return s;
}

__attribute__((target("avx2,fma")))
void a_cpmuladd(std::size_t n, const cplx* x, const cplx* y, cplx* z)
{
    const double* xp = reinterpret_cast<const double*>(x);
    const double* yp = reinterpret_cast<const double*>(y);
    double* zp = reinterpret_cast<double*>(z);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d a = _mm256_loadu_pd(xp + 2 * i);
        __m256d b = _mm256_loadu_pd(yp + 2 * i);
        __m256d w = _mm256_loadu_pd(zp + 2 * i);
        __m256d ar = _mm256_unpacklo_pd(a, a); // [xr xr ...]
        __m256d ai = _mm256_unpackhi_pd(a, a); // [xi xi ...]
        __m256d bs = _mm256_permute_pd(b, 0x5);
        __m256d t = _mm256_mul_pd(ai, bs);
        __m256d r = _mm256_fmaddsub_pd(ar, b, t);
        _mm256_storeu_pd(zp + 2 * i, _mm256_add_pd(w, r));
    }
    for (; i < n; ++i)
        z[i] += x[i] * y[i];
}

__attribute__((target("avx2,fma")))
void a_cpmulcadd(std::size_t n, const cplx* x, const cplx* y, cplx* z)
{
    const double* xp = reinterpret_cast<const double*>(x);
    const double* yp = reinterpret_cast<const double*>(y);
    double* zp = reinterpret_cast<double*>(z);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d a = _mm256_loadu_pd(xp + 2 * i);
        __m256d b = _mm256_loadu_pd(yp + 2 * i);
        __m256d w = _mm256_loadu_pd(zp + 2 * i);
        __m256d ar = _mm256_unpacklo_pd(a, a);
        __m256d ai = _mm256_unpackhi_pd(a, a);
        __m256d bs = _mm256_permute_pd(b, 0x5);
        // conj(x)*y: re = xr*yr + xi*yi, im = xr*yi - xi*yr
        __m256d t = _mm256_mul_pd(ai, bs);
        __m256d r = _mm256_fmsubadd_pd(ar, b, t); // even: ar*b + t, odd: ar*b - t
        _mm256_storeu_pd(zp + 2 * i, _mm256_add_pd(w, r));
    }
    for (; i < n; ++i)
        z[i] += std::conj(x[i]) * y[i];
}

__attribute__((target("avx2,fma")))
void a_daxpy(std::size_t n, double a, const double* x, double* y)
{
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        __m256d w = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, v, w));
    }
    for (; i < n; ++i)
        y[i] += a * x[i];
}

__attribute__((target("avx2,fma")))
double a_ddot(std::size_t n, const double* x, const double* y)
{
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        __m256d w = _mm256_loadu_pd(y + i);
        acc = _mm256_fmadd_pd(v, w, acc);
    }
    alignas(32) double a4[4];
    _mm256_store_pd(a4, acc);
    double s = (a4[0] + a4[2]) + (a4[1] + a4[3]);
    for (; i < n; ++i)
        s += x[i] * y[i];
    return s;
}

const Kernels avx2 = {
    a_caxpy, a_cscal, a_cdotc, a_cnrm2sq, a_cpmuladd, a_cpmulcadd, a_daxpy, a_ddot, "avx2",
};

} // namespace

const Kernels* avx2_if_supported()
{
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma") ? &avx2 : nullptr;
}

} // namespace nahmtx::kern

#else

#include "nahmtx/kern.hpp"

namespace nahmtx::kern {
const Kernels* avx2_if_supported() { return nullptr; }
} // namespace nahmtx::kern

#endif
