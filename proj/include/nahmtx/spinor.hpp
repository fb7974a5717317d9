#pragma once

#include "nahmtx/geometry.hpp"
#include "nahmtx/spectrum.hpp"

#include <vector>

namespace nahmtx {

enum class Chirality { Plus, Minus };

// Shared discretization descriptor: torus modes m,n in [-N,N] crossed with an
// M x M Dirichlet plane window of half-width R, and a bundle rank slot.
struct SpinorShape {
    TorusLattice lat;
    int N = 0;
    double R = 0.0;
    int M = 0;
    int rank = 1;

    int modes_per_axis() const { return 2 * N + 1; }
    int nmodes() const { return modes_per_axis() * modes_per_axis(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(M) * M; }
    std::size_t block_count() const { return static_cast<std::size_t>(2) * rank * nmodes(); }
    std::size_t size() const { return block_count() * plane_size(); }
    double h() const { return 2.0 * R / M; }
    int mode_index(int m, int n) const { return (m + N) * modes_per_axis() + (n + N); }

    bool compatible(const SpinorShape& o) const
    {
        return N == o.N && M == o.M && R == o.R && rank == o.rank &&
               lat.tau == o.lat.tau;
    }
};

// Section of (E(xi) tensor S^pm) in the mixed torus-mode / plane-grid
// representation. Two legs per chirality:
//   S+ : (Lambda^{0,0}, Lambda^{0,2})
//   S- : (dz-bar leg, dw-bar leg)
// Storage is leg-major, then rank, then torus mode, then plane site.
struct Spinor {
    Chirality chi = Chirality::Plus;
    SpinorShape shape;
    std::vector<cplx> v;

    Spinor() = default;
    Spinor(Chirality c, const SpinorShape& s) : chi(c), shape(s), v(s.size(), cplx(0, 0)) {}

    cplx* block(int leg, int r, int mode)
    {
        return v.data() + ((static_cast<std::size_t>(leg) * shape.rank + r) * shape.nmodes() + mode) *
                              shape.plane_size();
    }
    const cplx* block(int leg, int r, int mode) const
    {
        return const_cast<Spinor*>(this)->block(leg, r, mode);
    }

    void zero();
    double norm() const;        // sqrt(h^2 sum |v|^2); torus modes orthonormal
    Spinor& operator+=(const Spinor& o);
    Spinor& operator-=(const Spinor& o);
    void axpy(cplx a, const Spinor& x); // this += a x
    void scale(cplx a);
};

// L2 pairing with the h^2 plane measure, conjugate-linear in the first slot.
cplx inner(const Spinor& a, const Spinor& b);

// Pointwise multiplication by the plane coordinate w (or conj w).
Spinor mul_w(const Spinor& s, bool conjugate = false);

// Multiply every block pointwise by a fixed plane field (M x M).
void mul_plane_field(Spinor& s, const std::vector<cplx>& field);

// Random spinor supported in |w| < fill * R, unit norm.
Spinor random_spinor(Rng& rng, Chirality chi, const SpinorShape& shape, double fill = 0.45);

// sup of |s| over the plane annulus r0 <= |w| <= r1 (max over modes/legs).
double annulus_sup(const Spinor& s, double r0, double r1);

// --- plane-block stencils (centered differences, Dirichlet ghosts) ---
// out += scale * (D1 + i D2) in       (the operator P)
void plane_P(int M, double h, const cplx* in, cplx* out, cplx scale);
// out += scale * (-(D1 - i D2)) in    (the adjoint P*)
void plane_Pstar(int M, double h, const cplx* in, cplx* out, cplx scale);
// out += scale * (-(D1^2 + D2^2)) in  (P*P = PP*)
void plane_lap(int M, double h, const cplx* in, cplx* out, cplx scale);

} // namespace nahmtx
