#include "doctest.h"

#include "nahmtx/kern.hpp"
#include "nahmtx/util.hpp"

#include <vector>

using namespace nahmtx;

namespace {

std::vector<cplx> random_cvec(Rng& rng, std::size_t n)
{
    std::vector<cplx> v(n);
    for (auto& z : v)
        z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return v;
}

} // namespace

TEST_CASE("kernel variants agree with scalar reference")
{
    const kern::Kernels* simd = kern::avx2_if_supported();
    if (!simd) {
        MESSAGE("no SIMD extension on this host; scalar-only");
        return;
    }
    Rng rng(42);
    for (std::size_t n : {std::size_t(1), std::size_t(7), std::size_t(64), std::size_t(1001)}) {
        auto x = random_cvec(rng, n);
        auto y = random_cvec(rng, n);
        cplx a{0.37, -1.21};

        auto y1 = y, y2 = y;
        kern::scalar.caxpy(n, a, x.data(), y1.data());
        simd->caxpy(n, a, x.data(), y2.data());
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(y1[i] - y2[i]) < 1e-14);

        auto x1 = x, x2 = x;
        kern::scalar.cscal(n, a, x1.data());
        simd->cscal(n, a, x2.data());
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(x1[i] - x2[i]) < 1e-14);

        cplx d1 = kern::scalar.cdotc(n, x.data(), y.data());
        cplx d2 = simd->cdotc(n, x.data(), y.data());
        CHECK(std::abs(d1 - d2) < 1e-12 * (1.0 + std::abs(d1)));

        double n1 = kern::scalar.cnrm2sq(n, x.data());
        double n2 = simd->cnrm2sq(n, x.data());
        CHECK(n1 == doctest::Approx(n2).epsilon(1e-13));

        auto z1 = y, z2 = y;
        kern::scalar.cpmuladd(n, x.data(), y.data(), z1.data());
        simd->cpmuladd(n, x.data(), y.data(), z2.data());
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(z1[i] - z2[i]) < 1e-14);

        z1 = y;
        z2 = y;
        kern::scalar.cpmulcadd(n, x.data(), y.data(), z1.data());
        simd->cpmulcadd(n, x.data(), y.data(), z2.data());
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(z1[i] - z2[i]) < 1e-14);

        std::vector<double> rx(n), ry(n), ry2(n);
        for (std::size_t i = 0; i < n; ++i) {
            rx[i] = rng.uniform(-1, 1);
            ry[i] = rng.uniform(-1, 1);
        }
        ry2 = ry;
        kern::scalar.daxpy(n, 0.77, rx.data(), ry.data());
        simd->daxpy(n, 0.77, rx.data(), ry2.data());
        for (std::size_t i = 0; i < n; ++i)
            CHECK(ry[i] == doctest::Approx(ry2[i]).epsilon(1e-14));

        CHECK(kern::scalar.ddot(n, rx.data(), ry.data()) ==
              doctest::Approx(simd->ddot(n, rx.data(), ry.data())).epsilon(1e-13));
    }
}

TEST_CASE("complex kernel algebra sanity")
{
    // a few closed-form cases through the active (dispatched) set
    std::vector<cplx> x = {{1, 2}, {3, -1}, {0, 1}};
    std::vector<cplx> y = {{2, 0}, {1, 1}, {-1, 0}};
    cplx d = kern::cdotc(3, x.data(), y.data());
    // conj(x).y = (1-2i)(2) + (3+i)(1+i) + (-i)(-1)
    cplx expect = cplx(2, -4) + cplx(2, 4) + cplx(0, 1);
    CHECK(std::abs(d - expect) < 1e-15);
    CHECK(kern::cnrm2sq(3, x.data()) == doctest::Approx(5 + 10 + 1));
}

TEST_CASE("deterministic rng is stable across runs")
{
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i)
        CHECK(a.next_u64() == b.next_u64());
    Rng c(7);
    double first = c.uniform();
    Rng d(7);
    CHECK(first == d.uniform());
}
