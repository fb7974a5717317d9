#pragma once

#include "nahmtx/util.hpp"

#include <vector>

namespace nahmtx {

// Modified Bessel functions of order zero. K0 is assembled from three
// regimes: the ascending series with log term (r < 2), quadrature of
// K0(r) = int_0^inf exp(-r cosh u) du in the midrange, and the large-r
// descending expansion sqrt(pi/2r) e^-r [1 - 1/8r + 9/128r^2 - ...]. The
// descending series bottoms out near 2 e^{-2r}, so the seam sits at r = 14
// where that floor is ~1e-13.
double k0(double r);  // r > 0; throws DomainError otherwise
double i0(double r);  // r >= 0

// 2 pi * int_0^inf r K0(lambda r) dr  ( = 2 pi / lambda^2 )
double k0_l1_norm(double lambda = 1.0);

// Square plane window [-R, R)^2 sampled at w = (-R + i h, -R + j h),
// h = 2R/M. Site (ix, iy) lives at index iy*M + ix; M is even so the center
// site M/2 sits at the origin. Dirichlet conditions outside the window.
struct PlaneGrid {
    double R = 0.0;
    int M = 0;
    std::vector<cplx> v;

    PlaneGrid() = default;
    PlaneGrid(double half_width, int resolution);

    double h() const { return 2.0 * R / M; }
    double coord(int i) const { return -R + i * h(); }
    cplx w(int ix, int iy) const { return {coord(ix), coord(iy)}; }
    cplx& at(int ix, int iy) { return v[static_cast<std::size_t>(iy) * M + ix]; }
    const cplx& at(int ix, int iy) const { return v[static_cast<std::size_t>(iy) * M + ix]; }

    double l2norm() const; // sqrt(h^2 sum |v|^2)
};

// Radial profile of the normalized fundamental solution K0(lambda r)/(2 pi)
// of (lap + lambda^2) on the plane; total plane integral is 1/lambda^2.
struct ModeGreenKernel {
    double lambda = 0.0;
    double dr = 0.0;
    std::vector<double> profile; // profile[i] = K0(lambda * (i+1) dr)/(2 pi)

    ModeGreenKernel(double lam, double r_max, int samples);
    double integral() const; // 2 pi int r * profile dr, quadrature on the table
};

// g = (Green of lap + lambda^2) applied to rho: cyclic convolution with the
// sampled K0 kernel on a zero-padded grid (>= 2x). Warns to stderr when rho
// has significant mass outside |w| < R/2. lambda <= 0 is the trivial-twist
// breakdown and throws NonInvertibleMode.
PlaneGrid mode_green_apply(double lambda, const PlaneGrid& rho);

// Canonical discrete plane Laplacian -(D1^2 + D2^2) built from centered
// first differences with Dirichlet ghosts; matches the Dirac factorization.
PlaneGrid plane_lap_wide(const PlaneGrid& g);

} // namespace nahmtx
