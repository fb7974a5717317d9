// NEON variants (aarch64). Two doubles per 128-bit register, one complex
// value per register in the complex kernels.

#if defined(__aarch64__)

#include "nahmtx/kern.hpp"

#include <arm_neon.h>

namespace nahmtx::kern {
namespace {

void n_caxpy(std::size_t n, cplx a, const cplx* x, cplx* y)
{
    const double* xp = reinterpret_cast<const double*>(x);
    double* yp = reinterpret_cast<double*>(y);
    const float64x2_t ar = vdupq_n_f64(a.real());
    const float64x2_t ai = vdupq_n_f64(a.imag());
    const float64x2_t sgn = {-1.0, 1.0};
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t v = vld1q_f64(xp + 2 * i);
        float64x2_t w = vld1q_f64(yp + 2 * i);
        float64x2_t vs = vextq_f64(v, v, 1);
        float64x2_t r = vfmaq_f64(vmulq_f64(sgn, vmulq_f64(ai, vs)), ar, v);
        vst1q_f64(yp + 2 * i, vaddq_f64(w, r));
    }
}

void n_cscal(std::size_t n, cplx a, cplx* x)
{
    double* xp = reinterpret_cast<double*>(x);
    const float64x2_t ar = vdupq_n_f64(a.real());
    const float64x2_t ai = vdupq_n_f64(a.imag());
    const float64x2_t sgn = {-1.0, 1.0};
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t v = vld1q_f64(xp + 2 * i);
        float64x2_t vs = vextq_f64(v, v, 1);
        vst1q_f64(xp + 2 * i, vfmaq_f64(vmulq_f64(sgn, vmulq_f64(ai, vs)), ar, v));
    }
}

cplx n_cdotc(std::size_t n, const cplx* x, const cplx* y)
{
    const double* xp = reinterpret_cast<const double*>(x);
    const double* yp = reinterpret_cast<const double*>(y);
    float64x2_t accRe = vdupq_n_f64(0.0);
    float64x2_t accIm = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t a = vld1q_f64(xp + 2 * i);
        float64x2_t b = vld1q_f64(yp + 2 * i);
        float64x2_t bs = vextq_f64(b, b, 1);
        accRe = vfmaq_f64(accRe, a, b);
        accIm = vfmaq_f64(accIm, a, bs);
    }
    double rr = vgetq_lane_f64(accRe, 0) + vgetq_lane_f64(accRe, 1);
    double ii = vgetq_lane_f64(accIm, 0) - vgetq_lane_f64(accIm, 1);
    return {rr, ii};
}

double n_cnrm2sq(std::size_t n, const cplx* x)
{
    const double* xp = reinterpret_cast<const double*>(x);
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        float64x2_t v = vld1q_f64(xp + 2 * i);
        acc = vfmaq_f64(acc, v, v);
    }
    return vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
}

void n_cpmuladd(std::size_t n, const cplx* x, const cplx* y, cplx* z)
{
    for (std::size_t i = 0; i < n; ++i)
        z[i] += x[i] * y[i];
}

void n_cpmulcadd(std::size_t n, const cplx* x, const cplx* y, cplx* z)
{
    for (std::size_t i = 0; i < n; ++i)
        z[i] += std::conj(x[i]) * y[i];
}

void n_daxpy(std::size_t n, double a, const double* x, double* y)
{
    const float64x2_t av = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t v = vld1q_f64(x + i);
        float64x2_t w = vld1q_f64(y + i);
        vst1q_f64(y + i, vfmaq_f64(w, av, v));
    }
    for (; i < n; ++i)
        y[i] += a * x[i];
}

double n_ddot(std::size_t n, const double* x, const double* y)
{
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
    double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i)
        s += x[i] * y[i];
    return s;
}

} // namespace

const Kernels* neon_set()
{
    static const Kernels neon = {
        n_caxpy, n_cscal, n_cdotc, n_cnrm2sq, n_cpmuladd, n_cpmulcadd, n_daxpy, n_ddot, "neon",
    };
    return &neon;
}

} // namespace nahmtx::kern

#else

#include "nahmtx/kern.hpp"

namespace nahmtx::kern {
const Kernels* neon_set() { return nullptr; }
} // namespace nahmtx::kern

#endif
