#include "nahmtx/flat_dirac.hpp"

#include "nahmtx/errors.hpp"
#include "nahmtx/kern.hpp"

#include <cmath>

namespace nahmtx {

namespace {

std::vector<cplx> zeta_table(const SpinorShape& shape, const JacobianPoint& xi)
{
    std::vector<cplx> z(shape.nmodes());
    for (int m = -shape.N; m <= shape.N; ++m)
        for (int n = -shape.N; n <= shape.N; ++n)
            z[shape.mode_index(m, n)] = mode_zeta(shape.lat, xi, m, n);
    return z;
}

std::vector<cplx> zeta_table_raw(const SpinorShape& shape, double tx1, double tx2)
{
    std::vector<cplx> z(shape.nmodes());
    for (int m = -shape.N; m <= shape.N; ++m)
        for (int n = -shape.N; n <= shape.N; ++n)
            z[shape.mode_index(m, n)] = mode_zeta_raw(shape.lat, tx1, tx2, m, n);
    return z;
}

} // namespace

FlatDiracOp FlatDiracOp::make(const SpinorShape& shape, const JacobianPoint& xi)
{
    if (shape.rank != 1)
        throw ShapeError("FlatDiracOp::make: rank-1 shape expected");
    FlatDiracOp op;
    op.shape = shape;
    op.zeta.push_back(zeta_table(shape, xi));
    return op;
}

FlatDiracOp FlatDiracOp::make_pair(const SpinorShape& shape, const JacobianPoint& xi_plus,
                                   const JacobianPoint& xi_minus)
{
    if (shape.rank != 2)
        throw ShapeError("FlatDiracOp::make_pair: rank-2 shape expected");
    FlatDiracOp op;
    op.shape = shape;
    op.zeta.push_back(zeta_table(shape, xi_plus));
    op.zeta.push_back(zeta_table(shape, xi_minus));
    return op;
}

FlatDiracOp FlatDiracOp::make_pair_raw(const SpinorShape& shape, double p1, double p2, double m1,
                                       double m2)
{
    if (shape.rank != 2)
        throw ShapeError("FlatDiracOp::make_pair_raw: rank-2 shape expected");
    FlatDiracOp op;
    op.shape = shape;
    op.zeta.push_back(zeta_table_raw(shape, p1, p2));
    op.zeta.push_back(zeta_table_raw(shape, m1, m2));
    return op;
}

double FlatDiracOp::min_abs_zeta() const
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& tab : zeta)
        for (cplx z : tab)
            best = std::min(best, std::abs(z));
    return best;
}

Spinor FlatDiracOp::apply(const Spinor& s) const
{
    if (!s.shape.compatible(shape))
        throw ShapeError("FlatDiracOp::apply: shape mismatch");
    const int M = shape.M;
    const double h = shape.h();
    const std::size_t ps = shape.plane_size();
    Spinor out(s.chi == Chirality::Plus ? Chirality::Minus : Chirality::Plus, shape);
    for (int r = 0; r < shape.rank; ++r) {
        for (int mode = 0; mode < shape.nmodes(); ++mode) {
            const cplx z = zeta[r][mode];
            const cplx* a = s.block(0, r, mode);
            const cplx* b = s.block(1, r, mode);
            cplx* o0 = out.block(0, r, mode);
            cplx* o1 = out.block(1, r, mode);
            if (s.chi == Chirality::Plus) {
                // D(f0,f2) = (Z f0 + P* f2, P f0 - Z* f2)
                kern::caxpy(ps, z, a, o0);
                plane_Pstar(M, h, b, o0, cplx(1, 0));
                plane_P(M, h, a, o1, cplx(1, 0));
                kern::caxpy(ps, -std::conj(z), b, o1);
            } else {
                // D*(u,v) = (Z* u + P* v, P u - Z v)
                kern::caxpy(ps, std::conj(z), a, o0);
                plane_Pstar(M, h, b, o0, cplx(1, 0));
                plane_P(M, h, a, o1, cplx(1, 0));
                kern::caxpy(ps, -z, b, o1);
            }
        }
    }
    return out;
}

Spinor FlatDiracOp::laplacian(const Spinor& s) const
{
    if (!s.shape.compatible(shape))
        throw ShapeError("FlatDiracOp::laplacian: shape mismatch");
    const std::size_t ps = shape.plane_size();
    Spinor out(s.chi, shape);
    for (int leg = 0; leg < 2; ++leg)
        for (int r = 0; r < shape.rank; ++r)
            for (int mode = 0; mode < shape.nmodes(); ++mode) {
                const double l2 = std::norm(zeta[r][mode]);
                const cplx* in = s.block(leg, r, mode);
                cplx* o = out.block(leg, r, mode);
                kern::caxpy(ps, cplx(l2, 0), in, o);
                plane_lap(shape.M, shape.h(), in, o, cplx(1, 0));
            }
    return out;
}

double FlatDiracOp::grad_normsq(const Spinor& s) const
{
    const std::size_t ps = shape.plane_size();
    const double h = shape.h();
    std::vector<cplx> tmp(ps);
    double acc = 0.0;
    for (int leg = 0; leg < 2; ++leg)
        for (int r = 0; r < shape.rank; ++r)
            for (int mode = 0; mode < shape.nmodes(); ++mode) {
                const cplx* in = s.block(leg, r, mode);
                acc += std::norm(zeta[r][mode]) * kern::cnrm2sq(ps, in);
                std::fill(tmp.begin(), tmp.end(), cplx(0, 0));
                plane_P(shape.M, h, in, tmp.data(), cplx(1, 0));
                acc += kern::cnrm2sq(ps, tmp.data());
            }
    return h * h * acc;
}

int helmholtz_cg(int M, double h, double lambda_sq, const cplx* rhs, cplx* g, double tol,
                 int max_iter)
{
    const std::size_t n = static_cast<std::size_t>(M) * M;
    std::vector<cplx> r(rhs, rhs + n), p(r), Ap(n);
    std::fill(g, g + n, cplx(0, 0));
    double rr = kern::cnrm2sq(n, r.data());
    const double target = tol * tol * rr;
    if (rr == 0.0)
        return 0;
    int it = 0;
    for (; it < max_iter && rr > target; ++it) {
        std::fill(Ap.begin(), Ap.end(), cplx(0, 0));
        kern::caxpy(n, cplx(lambda_sq, 0), p.data(), Ap.data());
        plane_lap(M, h, p.data(), Ap.data(), cplx(1, 0));
        cplx pAp = kern::cdotc(n, p.data(), Ap.data());
        cplx alpha = rr / pAp;
        kern::caxpy(n, alpha, p.data(), g);
        kern::caxpy(n, -alpha, Ap.data(), r.data());
        double rr2 = kern::cnrm2sq(n, r.data());
        cplx beta = rr2 / rr;
        rr = rr2;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = r[i] + beta * p[i];
    }
    if (rr > target)
        throw SolverDiverged("helmholtz_cg: no convergence in " + std::to_string(max_iter) +
                             " iterations");
    return it;
}

Spinor FlatDiracOp::invert(const Spinor& target, double tol) const
{
    if (target.chi != Chirality::Plus)
        throw ShapeError("FlatDiracOp::invert: target must be an S+ section");
    if (!target.shape.compatible(shape))
        throw ShapeError("FlatDiracOp::invert: shape mismatch");
    if (!invertible())
        throw NonInvertibleMode("FlatDiracOp::invert: trivial effective twist");
    const std::size_t ps = shape.plane_size();
    Spinor green(Chirality::Plus, shape);
    const int total = 2 * shape.rank * shape.nmodes();
    parallel_for(
        static_cast<std::size_t>(total),
        [&](std::size_t lo, std::size_t hi) {
            for (std::size_t k = lo; k < hi; ++k) {
                int leg = static_cast<int>(k) / (shape.rank * shape.nmodes());
                int rem = static_cast<int>(k) % (shape.rank * shape.nmodes());
                int r = rem / shape.nmodes();
                int mode = rem % shape.nmodes();
                const cplx* rhs = target.block(leg, r, mode);
                cplx* g = green.block(leg, r, mode);
                bool nonzero = false;
                for (std::size_t i = 0; i < ps && !nonzero; ++i)
                    nonzero = rhs[i] != cplx(0, 0);
                if (nonzero)
                    helmholtz_cg(shape.M, shape.h(), std::norm(zeta[r][mode]), rhs, g, tol);
            }
        },
        worker_threads());
    return apply(green); // D applied to the Green image solves D* x = target
}

double l21_norm(const FlatDiracOp& op, const Spinor& s)
{
    if (s.chi != Chirality::Minus)
        throw ShapeError("l21_norm: S- section expected");
    return s.norm() + op.apply(s).norm();
}

} // namespace nahmtx
