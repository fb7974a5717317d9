#include "doctest.h"

#include "nahmtx/coupled.hpp"
#include "nahmtx/errors.hpp"

#include <cmath>

using namespace nahmtx;

namespace {

FieldShape small_field_shape(int N = 3, int M = 24, double R = 4.0)
{
    FieldShape s;
    s.lat = TorusLattice::square();
    s.N = N;
    s.R = R;
    s.M = M;
    return s;
}

} // namespace

TEST_CASE("coupled operator on a flat field equals the direct-sum flat model")
{
    auto fs = small_field_shape();
    auto f = synth_ansatz(fs, 0, normalize(0.3, 0.2));
    auto xi = normalize(0.11, 0.47);
    CoupledDiracOp op(f, xi, fs.N);
    Rng rng(2);
    for (auto chi : {Chirality::Plus, Chirality::Minus}) {
        auto s = random_spinor(rng, chi, op.shape());
        auto a = op.apply(s);
        auto b = op.flat_model().apply(s);
        a -= b;
        CHECK(a.norm() < 1e-12 * b.norm());
    }
}

TEST_CASE("coupled D and D* are mutually adjoint")
{
    auto fs = small_field_shape();
    auto f = synth_ansatz(fs, 1, normalize(0.3, 0.2));
    CoupledDiracOp op(f, normalize(0.05, 0.62), fs.N);
    Rng rng(9);
    for (int trial = 0; trial < 4; ++trial) {
        auto sp = random_spinor(rng, Chirality::Plus, op.shape());
        auto sm = random_spinor(rng, Chirality::Minus, op.shape());
        cplx lhs = inner(op.apply(sp), sm);
        cplx rhs = inner(sp, op.apply(sm));
        CHECK(std::abs(lhs - rhs) < 1e-11 * (std::abs(lhs) + 1.0));
    }
}

TEST_CASE("winding conjugation is unitary and inverts itself")
{
    auto fs = small_field_shape();
    auto f = synth_ansatz(fs, 1, normalize(0.3, 0.2));
    CoupledDiracOp op(f, normalize(0.1, 0.1), fs.N);
    Rng rng(4);
    auto s = random_spinor(rng, Chirality::Minus, op.shape());
    auto t = op.conjugate_by_winding(s, false);
    CHECK(t.norm() == doctest::Approx(s.norm()).epsilon(1e-12));
    auto back = op.conjugate_by_winding(t, true);
    back -= s;
    CHECK(back.norm() < 1e-12);
}

TEST_CASE("model closeness: conjugated flat model matches the operator on the end")
{
    // on the frozen end the synthesized field is exactly the g-transform of
    // the constant flat connection: D_A (W^-1 s) = W^-1 D_model s up to the
    // mode-truncation error of the winding multiplication, which is small on
    // smooth sections and shrinks as the torus grid refines
    auto xi = normalize(0.12, 0.4);
    auto closeness = [&](int N, int M) {
        FieldShape fs = small_field_shape(N, M, 4.0);
        auto f = synth_ansatz(fs, 1, normalize(0.3, 0.2));
        CoupledDiracOp op(f, xi, fs.N);
        // smooth probe: low torus modes, gaussian ring in the plane beyond
        // the winding shell (s2 = 0.85 R0 = 1.7)
        Spinor s(Chirality::Minus, op.shape());
        for (int leg = 0; leg < 2; ++leg)
            for (int r = 0; r < 2; ++r)
                for (int m = -1; m <= 1; ++m)
                    for (int n = -1; n <= 1; ++n) {
                        cplx* blk = s.block(leg, r, op.shape().mode_index(m, n));
                        for (int iy = 0; iy < M; ++iy)
                            for (int ix = 0; ix < M; ++ix) {
                                double rr = std::hypot(-fs.R + ix * fs.h(), -fs.R + iy * fs.h());
                                double prof = std::exp(-std::pow((rr - 2.7) / 0.5, 2));
                                blk[static_cast<std::size_t>(iy) * M + ix] =
                                    prof * cplx(0.3 + m, 0.2 - n);
                            }
                    }
        s.scale(1.0 / s.norm());
        auto lhs = op.apply(op.conjugate_by_winding(s, true));
        auto rhs = op.conjugate_by_winding(op.flat_model().apply(s), true);
        lhs -= rhs;
        // reference scale: deviation from the unconjugated flat model
        auto raw = op.apply(s);
        auto rawmodel = op.flat_model().apply(s);
        raw -= rawmodel;
        return std::make_pair(lhs.norm(), raw.norm());
    };
    auto [conj6, raw6] = closeness(6, 24);
    CHECK(conj6 < 0.15 * raw6); // conjugation captures the winding
    auto [conj8, raw8] = closeness(8, 24);
    CHECK(conj8 < 0.5 * conj6); // and improves under torus refinement
    (void)raw8;
}

TEST_CASE("parametrix is an approximate right inverse of D*")
{
    auto fs = small_field_shape(4, 32, 4.0);
    auto f0 = synth_ansatz(fs, 1, normalize(0.3, 0.2));
    auto f = asd_relax(f0, 40, 1e-5).field;
    auto xi = normalize(0.55, 0.45); // far from both punctures
    CoupledDiracOp op(f, xi, fs.N);
    Rng rng(21);
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        auto g = random_spinor(rng, Chirality::Plus, op.shape(), 0.8);
        auto r = op.apply(op.parametrix(g)); // D* P g
        r -= g;
        worst = std::max(worst, r.norm());
    }
    CHECK(worst < 0.5);
}

TEST_CASE("greens_apply solves the plus laplacian")
{
    auto fs = small_field_shape(3, 24, 4.0);
    auto f = synth_ansatz(fs, 1, normalize(0.3, 0.2));
    auto xi = normalize(0.5, 0.5);
    CoupledDiracOp op(f, xi, fs.N);

    Spinor zero(Chirality::Plus, op.shape());
    GreensStats st;
    auto gz = greens_apply(op, zero, 1e-8, &st);
    CHECK(gz.norm() == 0.0);

    Rng rng(31);
    auto s = random_spinor(rng, Chirality::Plus, op.shape(), 0.5);
    auto x = greens_apply(op, s, 1e-8, &st);
    auto back = op.apply(op.apply(x));
    back -= s;
    CHECK(back.norm() < 1e-7 * s.norm());

    // idempotence diagnostic: lap G (lap G s) == lap G s
    auto once = op.apply(op.apply(greens_apply(op, s, 1e-9)));
    auto twice = op.apply(op.apply(greens_apply(op, once, 1e-9)));
    twice -= once;
    CHECK(twice.norm() < 1e-7 * once.norm());
}

TEST_CASE("greens_apply matches the per-mode bessel-green composition on a flat field")
{
    auto fs = small_field_shape(2, 24, 4.0);
    auto f = synth_ansatz(fs, 0, normalize(0.3, 0.2));
    auto xi = normalize(0.2, 0.6);
    CoupledDiracOp op(f, xi, fs.N);
    Rng rng(41);
    auto s = random_spinor(rng, Chirality::Plus, op.shape(), 0.5);
    auto x = greens_apply(op, s, 1e-10, nullptr, false);
    // flat oracle: solve (lambda^2 + lap) per mode with the model twists
    const auto& model = op.flat_model();
    Spinor ref(Chirality::Plus, op.shape());
    for (int leg = 0; leg < 2; ++leg)
        for (int r = 0; r < 2; ++r)
            for (int mode = 0; mode < op.shape().nmodes(); ++mode)
                helmholtz_cg(op.shape().M, op.shape().h(), std::norm(model.zeta[r][mode]),
                             s.block(leg, r, mode), ref.block(leg, r, mode), 1e-12);
    ref -= x;
    CHECK(ref.norm() < 1e-7 * x.norm());
}

TEST_CASE("kernel_basis on a flat field finds an empty kernel")
{
    auto fs = small_field_shape(2, 24, 4.0);
    auto f = synth_ansatz(fs, 0, normalize(0.3, 0.2));
    auto xi = normalize(0.1, 0.65);
    CoupledDiracOp op(f, xi, fs.N);
    KernelOptions opt;
    opt.k_expected = 0;
    auto fr = kernel_basis(op, opt);
    CHECK(fr.basis.empty());
    CHECK(fr.sigma.size() == 2);
    // flat-model bound: sigma_min^2 >= lambda_min^2 of the shifted twists
    double lmin = op.lambda_min_effective();
    CHECK(fr.sigma[0] > 0.9 * lmin);
}

TEST_CASE("kernel_basis refuses near-puncture samples")
{
    auto fs = small_field_shape(2, 16, 4.0);
    auto f = synth_ansatz(fs, 1, normalize(0.3, 0.2));
    CoupledDiracOp op(f, normalize(0.31, 0.21), fs.N);
    KernelOptions opt;
    CHECK_THROWS_AS(kernel_basis(op, opt), NearPuncture);
}

TEST_CASE("weitzenboeck gap on the plus chirality is positive")
{
    auto fs = small_field_shape(2, 20, 4.0);
    auto f = synth_ansatz(fs, 1, normalize(0.3, 0.2));
    CoupledDiracOp op(f, normalize(0.6, 0.1), fs.N);
    double gap = plus_laplacian_gap(op, 10);
    CHECK(gap > 0.1);
}
