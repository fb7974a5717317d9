#include "nahmtx/kern.hpp"

namespace nahmtx::kern {
namespace {

void s_caxpy(std::size_t n, cplx a, const cplx* x, cplx* y)
{
    for (std::size_t i = 0; i < n; ++i)
        y[i] += a * x[i];
}

void s_cscal(std::size_t n, cplx a, cplx* x)
{
    for (std::size_t i = 0; i < n; ++i)
        x[i] *= a;
}

// Fixed 4-lane accumulation so the summation order matches the SIMD variants'
// lane structure up to rounding, and is stable run-to-run.
cplx s_cdotc(std::size_t n, const cplx* x, const cplx* y)
{
    double re[4] = {0, 0, 0, 0}, im[4] = {0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        for (int l = 0; l < 4; ++l) {
            const cplx& a = x[i + l];
            const cplx& b = y[i + l];
            re[l] += a.real() * b.real() + a.imag() * b.imag();
            im[l] += a.real() * b.imag() - a.imag() * b.real();
        }
    }
    double rr = (re[0] + re[2]) + (re[1] + re[3]);
    double ii = (im[0] + im[2]) + (im[1] + im[3]);
    for (; i < n; ++i) {
        const cplx& a = x[i];
        const cplx& b = y[i];
        rr += a.real() * b.real() + a.imag() * b.imag();
        ii += a.real() * b.imag() - a.imag() * b.real();
    }
    return {rr, ii};
}

double s_cnrm2sq(std::size_t n, const cplx* x)
{
    double acc[4] = {0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        for (int l = 0; l < 4; ++l)
            acc[l] += x[i + l].real() * x[i + l].real() + x[i + l].imag() * x[i + l].imag();
    double s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for (; i < n; ++i)
        s += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
    return s;
}

void s_cpmuladd(std::size_t n, const cplx* x, const cplx* y, cplx* z)
{
    for (std::size_t i = 0; i < n; ++i)
        z[i] += x[i] * y[i];
}

void s_cpmulcadd(std::size_t n, const cplx* x, const cplx* y, cplx* z)
{
    for (std::size_t i = 0; i < n; ++i)
        z[i] += std::conj(x[i]) * y[i];
}

void s_daxpy(std::size_t n, double a, const double* x, double* y)
{
    for (std::size_t i = 0; i < n; ++i)
        y[i] += a * x[i];
}

double s_ddot(std::size_t n, const double* x, const double* y)
{
    double acc[4] = {0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        for (int l = 0; l < 4; ++l)
            acc[l] += x[i + l] * y[i + l];
    double s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for (; i < n; ++i)
        s += x[i] * y[i];
    return s;
}

} // namespace

const Kernels scalar = {
    s_caxpy, s_cscal, s_cdotc, s_cnrm2sq, s_cpmuladd, s_cpmulcadd, s_daxpy, s_ddot, "scalar",
};

} // namespace nahmtx::kern
