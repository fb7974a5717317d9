#pragma once

#include "nahmtx/spinor.hpp"

namespace nahmtx {

// Dirac operator of the flat model: L_xi-twisted Dolbeault blocks on the
// torus modes plus centered plane differences. In the normalized component
// representation
//     D  (f0,f2) = ( Z f0 + P* f2 ,  P f0 - Z* f2 )
//     D* (u, v)  = ( Z* u + P* v ,   P u -  Z v  )
// with Z = multiplication by zeta_mn(xi) per torus mode and P = D1 + i D2 on
// the plane. D* is the exact discrete adjoint of D, and D*D = DD* is the
// diagonal Laplacian lambda^2 + plane_lap per block. A rank-2 instance holds
// one twist table per rank slot (the direct-sum model at xi0 +- xi).
struct FlatDiracOp {
    SpinorShape shape;
    std::vector<std::vector<cplx>> zeta; // [rank][mode]

    static FlatDiracOp make(const SpinorShape& shape, const JacobianPoint& xi);
    static FlatDiracOp make_pair(const SpinorShape& shape, const JacobianPoint& xi_plus,
                                 const JacobianPoint& xi_minus);
    // continuous-lift twists (no mod-1 reduction); keeps mode labels aligned
    // with the bare-xi window of the coupled operator
    static FlatDiracOp make_pair_raw(const SpinorShape& shape, double p1, double p2, double m1,
                                     double m2);

    // smallest |zeta| over modes and ranks (the effective lambda_min at cutoff)
    double min_abs_zeta() const;
    bool invertible() const { return min_abs_zeta() > 1e-12; }

    // chirality-flipping application: D on S+, D* on S-
    Spinor apply(const Spinor& s) const;

    // Q_inf: exact inverse of D* built per mode as D of the mode-Green solve;
    // the per-mode Helmholtz problems are driven to `tol` by CG.
    Spinor invert(const Spinor& target, double tol = 1e-10) const;

    // the diagonal Dirac Laplacian (lambda^2 + plane_lap) applied blockwise;
    // equals D*D and DD* by construction
    Spinor laplacian(const Spinor& s) const;

    // ||grad s||^2 = sum over blocks of |zeta|^2 ||b||^2 + ||P b||^2
    double grad_normsq(const Spinor& s) const;
};

// ||s||_{L2_1} = ||s|| + ||D* s|| for s in S-; the diagnostic Sobolev norm.
double l21_norm(const FlatDiracOp& op, const Spinor& s);

// Solve (lambda^2 + plane_lap) g = rhs on a single plane block by CG.
// Returns iterations used; g is overwritten in place.
int helmholtz_cg(int M, double h, double lambda_sq, const cplx* rhs, cplx* g, double tol,
                 int max_iter = 4000);

} // namespace nahmtx
