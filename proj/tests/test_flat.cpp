#include "doctest.h"

#include "nahmtx/bessel.hpp"
#include "nahmtx/errors.hpp"
#include "nahmtx/flat_dirac.hpp"
#include "nahmtx/kern.hpp"

#include <cmath>

using namespace nahmtx;

namespace {

SpinorShape small_shape(int N = 2, int M = 32, double R = 5.0, int rank = 1)
{
    SpinorShape s;
    s.lat = TorusLattice::square();
    s.N = N;
    s.R = R;
    s.M = M;
    s.rank = rank;
    return s;
}

} // namespace

TEST_CASE("flat constant spinor is annihilated away from the window edge")
{
    auto shape = small_shape();
    auto op = FlatDiracOp::make(shape, normalize(0, 0));
    Spinor s(Chirality::Plus, shape);
    int mode0 = shape.mode_index(0, 0);
    cplx* f0 = s.block(0, 0, mode0);
    for (std::size_t i = 0; i < shape.plane_size(); ++i)
        f0[i] = 1.0;
    auto Ds = op.apply(s);
    CHECK(Ds.chi == Chirality::Minus);
    for (int leg = 0; leg < 2; ++leg)
        for (int mode = 0; mode < shape.nmodes(); ++mode) {
            const cplx* b = Ds.block(leg, 0, mode);
            for (int iy = 1; iy + 1 < shape.M; ++iy)
                for (int ix = 1; ix + 1 < shape.M; ++ix)
                    CHECK(b[static_cast<std::size_t>(iy) * shape.M + ix] == cplx(0, 0));
        }
}

TEST_CASE("D*D equals the diagonal mode laplacian")
{
    auto shape = small_shape();
    auto op = FlatDiracOp::make(shape, normalize(0.3, 0.2));
    Rng rng(3);
    auto s = random_spinor(rng, Chirality::Plus, shape);
    auto dd = op.apply(op.apply(s));
    auto lap = op.laplacian(s);
    dd -= lap;
    CHECK(dd.norm() < 1e-12 * lap.norm());

    // off-diagonal structural zero: pure-leg input stays in its leg
    Spinor e0(Chirality::Plus, shape);
    cplx* blk = e0.block(0, 0, shape.mode_index(1, -1));
    for (std::size_t i = 0; i < shape.plane_size(); ++i)
        blk[i] = {0.3, -0.1};
    auto out = op.apply(op.apply(e0));
    double leg1 = 0.0, leg0 = 0.0;
    for (int mode = 0; mode < shape.nmodes(); ++mode) {
        leg0 += kern::cnrm2sq(shape.plane_size(), out.block(0, 0, mode));
        leg1 += kern::cnrm2sq(shape.plane_size(), out.block(1, 0, mode));
    }
    CHECK(leg1 < 1e-24 * leg0);
}

TEST_CASE("mode blocks never mix (structural decoupling)")
{
    auto shape = small_shape();
    auto op = FlatDiracOp::make(shape, normalize(0.2, 0.7));
    Spinor s(Chirality::Minus, shape);
    int tagged = shape.mode_index(-1, 2);
    cplx* u = s.block(0, 0, tagged);
    for (std::size_t i = 0; i < shape.plane_size(); ++i)
        u[i] = {1.0, 0.5};
    auto out = op.apply(s);
    for (int leg = 0; leg < 2; ++leg)
        for (int mode = 0; mode < shape.nmodes(); ++mode) {
            if (mode == tagged)
                continue;
            CHECK(kern::cnrm2sq(shape.plane_size(), out.block(leg, 0, mode)) == 0.0);
        }
}

TEST_CASE("laplacian agrees with the twisted spectrum and the plane stencil")
{
    auto shape = small_shape(2, 16, 3.0);
    auto xi = normalize(0.3, 0.2);
    auto op = FlatDiracOp::make(shape, xi);
    auto spec = twisted_spectrum(shape.lat, xi, shape.N);
    // pick one mode; fill with a bump; compare blockwise
    int m = 1, n = -2;
    Spinor s(Chirality::Plus, shape);
    PlaneGrid g(shape.R, shape.M);
    Rng rng(7);
    for (int iy = 4; iy < 12; ++iy)
        for (int ix = 4; ix < 12; ++ix)
            g.at(ix, iy) = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    cplx* blk = s.block(0, 0, shape.mode_index(m, n));
    std::copy(g.v.begin(), g.v.end(), blk);
    auto lap = op.laplacian(s);

    double lambda_sq = 0.0;
    for (const auto& e : spec.entries)
        if (e.m == m && e.n == n)
            lambda_sq = e.lambda_sq;
    auto ref = plane_lap_wide(g);
    for (std::size_t i = 0; i < g.v.size(); ++i)
        ref.v[i] += lambda_sq * g.v[i];
    const cplx* got = lap.block(0, 0, shape.mode_index(m, n));
    double err = 0.0;
    for (std::size_t i = 0; i < g.v.size(); ++i)
        err = std::max(err, std::abs(got[i] - ref.v[i]));
    CHECK(err < 1e-12 * lambda_sq);
}

TEST_CASE("weitzenboeck identity ||D s||^2 = ||grad s||^2")
{
    auto shape = small_shape();
    auto op = FlatDiracOp::make(shape, normalize(0.3, 0.2));
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        auto s = random_spinor(rng, Chirality::Plus, shape);
        double lhs = std::pow(op.apply(s).norm(), 2);
        double rhs = op.grad_normsq(s);
        CHECK(std::fabs(lhs - rhs) < 1e-12 * rhs);
    }
}

TEST_CASE("adjointness <D s, t> = <s, D* t>")
{
    auto shape = small_shape();
    auto op = FlatDiracOp::make(shape, normalize(0.41, 0.13));
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        auto s = random_spinor(rng, Chirality::Plus, shape);
        auto t = random_spinor(rng, Chirality::Minus, shape);
        cplx lhs = inner(op.apply(s), t);
        cplx rhs = inner(s, op.apply(t));
        CHECK(std::abs(lhs - rhs) < 1e-12 * (std::abs(lhs) + 1.0));
    }
}

TEST_CASE("invert produces a true right inverse of D*")
{
    auto shape = small_shape(2, 32, 5.0);
    auto op = FlatDiracOp::make(shape, normalize(0.3, 0.2));

    Spinor zero(Chirality::Plus, shape);
    CHECK(op.invert(zero).norm() == 0.0);

    Rng rng(17);
    auto target = random_spinor(rng, Chirality::Plus, shape, 0.4);
    auto sol = op.invert(target);
    CHECK(sol.chi == Chirality::Minus);
    auto back = op.apply(sol);
    back -= target;
    CHECK(back.norm() < 1e-8 * target.norm());
}

TEST_CASE("invert refuses the trivial twist")
{
    auto shape = small_shape(1, 16, 3.0);
    auto op = FlatDiracOp::make(shape, normalize(0, 0));
    Rng rng(1);
    auto target = random_spinor(rng, Chirality::Plus, shape);
    CHECK_THROWS_AS(op.invert(target), NonInvertibleMode);
}

TEST_CASE("Q_inf is bounded: L2_1 norm vs (1 + C/lambda^2)")
{
    const double xis[5][2] = {{0.5, 0.0}, {0.3, 0.2}, {0.25, 0.25}, {0.1, 0.4}, {0.45, 0.45}};
    auto shape = small_shape(2, 32, 5.0);
    Rng rng(23);
    for (auto& q : xis) {
        auto xi = normalize(q[0], q[1]);
        auto op = FlatDiracOp::make(shape, xi);
        double lmin = lambda_min(shape.lat, xi);
        auto target = random_spinor(rng, Chirality::Plus, shape, 0.4);
        auto sol = op.invert(target);
        double ratio = l21_norm(op, sol) / target.norm();
        // ||Q t|| <= ||t||/lambda and ||D* Q t|| = ||t||; on the dual torus
        // lambda_min <= pi sqrt(2) < 2 pi, so C = 2 pi dominates 1/lambda
        CHECK(ratio <= 1.0 + 2.0 * M_PI / (lmin * lmin) + 1e-6);
    }
}

TEST_CASE("solutions with compact sources decay exponentially")
{
    auto xi = normalize(0.3, 0.2);
    double lmin = lambda_min(TorusLattice::square(), xi); // ~2.27
    double lam_probe = 0.9 * lmin;

    auto run = [&](double R, int M) {
        auto shape = small_shape(2, M, R);
        auto op = FlatDiracOp::make(shape, xi);
        Rng rng(31);
        // fixed absolute source radius 1.25 across window sizes
        auto target = random_spinor(rng, Chirality::Plus, shape, 1.25 / R);
        auto sol = op.invert(target);
        // sup over the annulus [R0/2, 3 R0/4] of e^{lam r}|f| with R0 = 5
        double best = 0.0;
        const int Mg = shape.M;
        for (int iy = 0; iy < Mg; ++iy)
            for (int ix = 0; ix < Mg; ++ix) {
                double x = -R + ix * shape.h(), y = -R + iy * shape.h();
                double r = std::sqrt(x * x + y * y);
                if (r < 2.5 || r > 3.75)
                    continue;
                std::size_t site = static_cast<std::size_t>(iy) * Mg + ix;
                double a = 0.0;
                for (std::size_t b = 0; b < shape.block_count(); ++b)
                    a += std::norm(sol.v[b * shape.plane_size() + site]);
                best = std::max(best, std::exp(lam_probe * r) * std::sqrt(a));
            }
        return best;
    };

    double atR = run(5.0, 32);
    double atBig = run(7.0, 44);
    CHECK(atR > 0.0);
    CHECK(atBig < 3.0 * atR); // stable under enlarging the window
}

TEST_CASE("smallest singular value of flat D* is grid-stable and positive")
{
    // sigma_min^2 = lambda_min^2 + mu_min(plane lap); estimate mu_min by
    // inverse power iteration on a single plane block
    auto mu_min = [](int M, double R) {
        double h = 2.0 * R / M;
        std::vector<cplx> v(static_cast<std::size_t>(M) * M);
        Rng rng(9);
        for (auto& z : v)
            z = {rng.uniform(-1, 1), 0.0};
        double mu = 0.0;
        std::vector<cplx> g(v.size());
        for (int it = 0; it < 40; ++it) {
            double n = std::sqrt(kern::cnrm2sq(v.size(), v.data()));
            kern::cscal(v.size(), 1.0 / n, v.data());
            // solve (0 + lap) g = v: shift slightly for conditioning
            helmholtz_cg(M, h, 1e-8, v.data(), g.data(), 1e-10, 20000);
            std::vector<cplx> lv(v.size(), cplx(0, 0));
            plane_lap(M, h, g.data(), lv.data(), cplx(1, 0));
            mu = kern::cdotc(g.size(), g.data(), lv.data()).real() / kern::cnrm2sq(g.size(), g.data());
            v = g;
        }
        return mu;
    };
    double muA = mu_min(24, 5.0);
    double muB = mu_min(36, 5.0);
    CHECK(muA > 0.0);
    CHECK(muB > 0.0);
    CHECK(std::fabs(muA - muB) < 0.25 * muA);

    auto xi = normalize(0.3, 0.2);
    double smin_sq = std::pow(lambda_min(TorusLattice::square(), xi), 2) + std::min(muA, muB);
    CHECK(smin_sq > std::pow(lambda_min(TorusLattice::square(), xi), 2));
}
