#pragma once

#include <complex>
#include <cstddef>

// Data-parallel inner-loop kernels. Every routine has a scalar reference
// implementation and (where the target supports it) a SIMD variant; the
// active set is chosen once at startup by runtime CPU detection. The scalar
// and SIMD paths are equivalence-tested against each other.
//
// Reduction kernels accumulate in vector lanes and combine lanes in a fixed
// order, so results are reproducible run-to-run on one machine.

namespace nahmtx::kern {

using cplx = std::complex<double>;

struct Kernels {
    // y[i] += a * x[i]
    void (*caxpy)(std::size_t n, cplx a, const cplx* x, cplx* y);
    // x[i] *= a
    void (*cscal)(std::size_t n, cplx a, cplx* x);
    // sum conj(x[i]) * y[i]
    cplx (*cdotc)(std::size_t n, const cplx* x, const cplx* y);
    // sum |x[i]|^2
    double (*cnrm2sq)(std::size_t n, const cplx* x);
    // z[i] += x[i] * y[i]
    void (*cpmuladd)(std::size_t n, const cplx* x, const cplx* y, cplx* z);
    // z[i] += conj(x[i]) * y[i]
    void (*cpmulcadd)(std::size_t n, const cplx* x, const cplx* y, cplx* z);
    // y[i] += a * x[i] (real arrays)
    void (*daxpy)(std::size_t n, double a, const double* x, double* y);
    // sum x[i] * y[i] (real arrays)
    double (*ddot)(std::size_t n, const double* x, const double* y);
    const char* name;
};

// Scalar reference set; always available.
extern const Kernels scalar;

// Active set selected at load time (scalar, avx2, ...).
const Kernels& active();

// Force a specific set (tests use this to cross-check variants).
void set_active(const Kernels& k);

// Null when the CPU lacks the extension.
const Kernels* avx2_if_supported();

// Convenience forwarders through the active set.
inline void caxpy(std::size_t n, cplx a, const cplx* x, cplx* y) { active().caxpy(n, a, x, y); }
inline void cscal(std::size_t n, cplx a, cplx* x) { active().cscal(n, a, x); }
inline cplx cdotc(std::size_t n, const cplx* x, const cplx* y) { return active().cdotc(n, x, y); }
inline double cnrm2sq(std::size_t n, const cplx* x) { return active().cnrm2sq(n, x); }
inline void cpmuladd(std::size_t n, const cplx* x, const cplx* y, cplx* z) { active().cpmuladd(n, x, y, z); }
inline void cpmulcadd(std::size_t n, const cplx* x, const cplx* y, cplx* z) { active().cpmulcadd(n, x, y, z); }
inline void daxpy(std::size_t n, double a, const double* x, double* y) { active().daxpy(n, a, x, y); }
inline double ddot(std::size_t n, const double* x, const double* y) { return active().ddot(n, x, y); }

} // namespace nahmtx::kern
