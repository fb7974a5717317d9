#pragma once

#include "nahmtx/util.hpp"

#include <array>
#include <complex>

namespace nahmtx {

// The elliptic curve T = C/(Z + tau Z). Orthonormal real coordinates on the
// universal cover are (X, Y) with z = X + iY; lattice coordinates (x1, x2)
// satisfy z = x1 + tau x2.
struct TorusLattice {
    cplx tau{0.0, 1.0};

    double area() const { return tau.imag(); }

    // dual basis vectors e1*, e2* (rows): <ei*, ej> = delta_ij where
    // e1 = (1,0), e2 = (Re tau, Im tau) in (X, Y) coordinates
    std::array<double, 2> dual1() const { return {1.0, -tau.real() / tau.imag()}; }
    std::array<double, 2> dual2() const { return {0.0, 1.0 / tau.imag()}; }

    // (X, Y) of a lattice-coordinate point (x1, x2)
    std::array<double, 2> embed(double x1, double x2) const
    {
        return {x1 + tau.real() * x2, tau.imag() * x2};
    }

    static TorusLattice square() { return TorusLattice{cplx(0.0, 1.0)}; }
};

// A character of the lattice: a point xi of the dual torus, coordinates in
// [0,1)^2. Flat line bundle L_xi has holonomy exp(2 pi i xi_j) around e_j.
struct JacobianPoint {
    double x1 = 0.0;
    double x2 = 0.0;
    bool is_trivial = false;
    bool is_order_two = false;

    JacobianPoint neg() const;
    JacobianPoint shifted(const JacobianPoint& d) const; // xi + d mod 1

    // distance on the dual torus (mod-1 in each coordinate, Euclidean)
    double dist(const JacobianPoint& o) const;
};

// Reduce raw character coordinates mod 1 and set the flags.
JacobianPoint normalize(double raw1, double raw2);

// The three nontrivial order-2 characters: (1/2,0), (0,1/2), (1/2,1/2).
std::array<JacobianPoint, 3> order_two_points();

// Poincare line-bundle connection/curvature coefficients at (z, xi).
// omega = i pi sum_mu (xi_mu dz_mu - z_mu dxi_mu);
// Omega = 2 i pi sum_mu dxi_mu ^ dz_mu, constant in both variables.
struct PoincareForm {
    // coefficients of (dz1, dz2, dxi1, dxi2)
    std::array<cplx, 4> omega{};
    // coefficients of (dxi1^dz1, dxi2^dz2); other pairs vanish
    std::array<cplx, 2> Omega{};

    // coefficient of Omega^Omega on dz1^dz2^dxi1^dxi2
    cplx wedge_sq_coeff() const;
};

PoincareForm poincare(double z1, double z2, const JacobianPoint& xi);

} // namespace nahmtx
