#include "doctest.h"

#include "nahmtx/linalg.hpp"

#include <cmath>

using namespace nahmtx;

namespace {

MatC random_matc(Rng& rng, int r, int c)
{
    MatC m(r, c);
    for (auto& v : m.a)
        v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return m;
}

} // namespace

TEST_CASE("hermitian eigendecomposition reconstructs the matrix")
{
    Rng rng(3);
    for (int n : {2, 3, 5}) {
        auto a = random_matc(rng, n, n);
        MatC h = a + a.adjoint(); // hermitian
        std::vector<double> vals;
        MatC vecs;
        hermitian_eig(h, vals, vecs);
        // H V = V diag(vals)
        MatC hv = h.mul(vecs);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                CHECK(std::abs(hv.at(i, j) - vals[j] * vecs.at(i, j)) < 1e-10);
        // unitarity
        MatC vv = vecs.adjoint().mul(vecs);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                CHECK(std::abs(vv.at(i, j) - (i == j ? 1.0 : 0.0)) < 1e-10);
        for (int i = 0; i + 1 < n; ++i)
            CHECK(vals[i] <= vals[i + 1]);
    }
}

TEST_CASE("svd factors and polar unitary")
{
    Rng rng(7);
    for (int n : {2, 4}) {
        auto a = random_matc(rng, n, n);
        std::vector<double> s;
        MatC U, V;
        svd(a, s, &U, &V);
        // A = U S V^*
        MatC us(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                us.at(i, j) = U.at(i, j) * s[j];
        MatC rec = us.mul(V.adjoint());
        CHECK((rec - a).fro_norm() < 1e-9 * (a.fro_norm() + 1));
        for (int i = 0; i + 1 < n; ++i)
            CHECK(s[i] >= s[i + 1]);

        MatC Q = polar_unitary(a);
        MatC qq = Q.adjoint().mul(Q);
        CHECK((qq - MatC::identity(n)).fro_norm() < 1e-9);
    }
}

TEST_CASE("eigenvalues of small general matrices")
{
    // fixed 2x2 with known spectrum: [[1, 2], [0, 3i]]
    MatC m(2, 2);
    m.at(0, 0) = 1.0;
    m.at(0, 1) = 2.0;
    m.at(1, 1) = cplx(0, 3);
    auto ev = eigenvalues(m);
    REQUIRE(ev.size() == 2);
    double d1 = std::min(std::abs(ev[0] - cplx(1, 0)), std::abs(ev[0] - cplx(0, 3)));
    double d2 = std::min(std::abs(ev[1] - cplx(1, 0)), std::abs(ev[1] - cplx(0, 3)));
    CHECK(d1 < 1e-9);
    CHECK(d2 < 1e-9);
    CHECK(std::abs(ev[0] - ev[1]) > 1.0);
}

TEST_CASE("dense solve")
{
    Rng rng(13);
    auto a = random_matc(rng, 4, 4);
    std::vector<cplx> x0 = {{1, 2}, {0, -1}, {3, 0}, {-2, 1}};
    std::vector<cplx> b(4, 0.0);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            b[i] += a.at(i, j) * x0[j];
    auto x = solve_dense(a, b);
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(x[i] - x0[i]) < 1e-9);
}
