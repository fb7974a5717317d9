#pragma once

#include "nahmtx/geometry.hpp"

#include <string>
#include <vector>

namespace nahmtx {

// Eigendata of the xi-twisted Laplacian on the torus fiber. Plane waves
// exp(2 pi i <(m+xi1) e1* + (n+xi2) e2*, x>) diagonalize it with
// lambda^2 = 4 pi^2 |(m+xi1) e1* + (n+xi2) e2*|^2.
struct SpectrumEntry {
    int m = 0;
    int n = 0;
    double lambda_sq = 0.0;
};

struct TwistedSpectrum {
    JacobianPoint xi;
    int cutoff = 0;
    std::vector<SpectrumEntry> entries; // ascending, ties broken on (m, n)

    std::string to_csv() const; // columns m,n,lambda_sq
};

// Frequency vector of mode (m, n) at twist xi and its Dolbeault eigenvalue
// zeta = 2 pi i (p1 + i p2); |zeta|^2 = lambda^2.
std::array<double, 2> mode_freq(const TorusLattice& lat, const JacobianPoint& xi, int m, int n);
cplx mode_zeta(const TorusLattice& lat, const JacobianPoint& xi, int m, int n);

// raw-character variant: the twist is used as given, without mod-1 reduction,
// so shifted spectra keep mode labels aligned with an unshifted window
cplx mode_zeta_raw(const TorusLattice& lat, double tx1, double tx2, int m, int n);

TwistedSpectrum twisted_spectrum(const TorusLattice& lat, const JacobianPoint& xi, int cutoff);

// Smallest positive lambda for nontrivial xi (0 when xi is trivial);
// minimized over the full mode lattice, independent of any cutoff.
double lambda_min(const TorusLattice& lat, const JacobianPoint& xi);

} // namespace nahmtx
