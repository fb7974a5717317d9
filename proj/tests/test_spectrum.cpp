#include "doctest.h"

#include "nahmtx/kern.hpp"
#include "nahmtx/spectrum.hpp"
#include "nahmtx/util.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace nahmtx;

namespace {

// Independent oracle: 5-point Laplacian on an n x n square-torus grid with
// twisted boundary phases, smallest eigenvalues by deflated inverse power
// iteration with a CG solve.
struct FdTwistedLap {
    int n;
    cplx phase1, phase2; // seam phases e^{2 pi i xi}

    std::vector<cplx> apply(const std::vector<cplx>& f) const
    {
        const double inv_h2 = static_cast<double>(n) * n;
        std::vector<cplx> out(f.size());
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                cplx xp = (i + 1 < n) ? f[j * n + i + 1] : phase1 * f[j * n];
                cplx xm = (i > 0) ? f[j * n + i - 1] : std::conj(phase1) * f[j * n + n - 1];
                cplx yp = (j + 1 < n) ? f[(j + 1) * n + i] : phase2 * f[i];
                cplx ym = (j > 0) ? f[(j - 1) * n + i] : std::conj(phase2) * f[(n - 1) * n + i];
                out[j * n + i] = (4.0 * f[j * n + i] - xp - xm - yp - ym) * inv_h2;
            }
        }
        return out;
    }
};

double nrm(const std::vector<cplx>& v) { return std::sqrt(kern::cnrm2sq(v.size(), v.data())); }

void orthogonalize(std::vector<cplx>& v, const std::vector<std::vector<cplx>>& basis)
{
    for (const auto& b : basis) {
        cplx c = kern::cdotc(b.size(), b.data(), v.data());
        kern::caxpy(v.size(), -c, b.data(), v.data());
    }
}

std::vector<cplx> cg_solve(const FdTwistedLap& L, const std::vector<cplx>& b, double tol)
{
    std::vector<cplx> x(b.size(), 0.0), r = b, p = b;
    double rr = kern::cnrm2sq(r.size(), r.data());
    double b2 = rr;
    for (int it = 0; it < 20000 && rr > tol * tol * b2; ++it) {
        auto Ap = L.apply(p);
        cplx pAp = kern::cdotc(p.size(), p.data(), Ap.data());
        cplx alpha = rr / pAp;
        kern::caxpy(x.size(), alpha, p.data(), x.data());
        kern::caxpy(r.size(), -alpha, Ap.data(), r.data());
        double rr2 = kern::cnrm2sq(r.size(), r.data());
        cplx beta = rr2 / rr;
        rr = rr2;
        for (std::size_t i = 0; i < p.size(); ++i)
            p[i] = r[i] + beta * p[i];
    }
    return x;
}

// lowest `count` eigenvalues of the twisted FD Laplacian
std::vector<double> fd_lowest_eigs(int n, double xi1, double xi2, int count)
{
    FdTwistedLap L{n,
                   cplx(std::cos(2 * M_PI * xi1), std::sin(2 * M_PI * xi1)),
                   cplx(std::cos(2 * M_PI * xi2), std::sin(2 * M_PI * xi2))};
    Rng rng(2024);
    std::vector<std::vector<cplx>> found;
    std::vector<double> eigs;
    for (int k = 0; k < count; ++k) {
        std::vector<cplx> v(static_cast<std::size_t>(n) * n);
        for (auto& z : v)
            z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        orthogonalize(v, found);
        double lam = 0.0, prev = 1e300;
        for (int it = 0; it < 60; ++it) {
            kern::cscal(v.size(), 1.0 / nrm(v), v.data());
            auto w = cg_solve(L, v, 1e-9);
            orthogonalize(w, found);
            auto Aw = L.apply(w);
            lam = kern::cdotc(w.size(), w.data(), Aw.data()).real() /
                  kern::cnrm2sq(w.size(), w.data());
            v = std::move(w);
            if (std::fabs(lam - prev) < 1e-7 * lam)
                break;
            prev = lam;
        }
        kern::cscal(v.size(), 1.0 / nrm(v), v.data());
        found.push_back(v);
        eigs.push_back(lam);
    }
    std::sort(eigs.begin(), eigs.end());
    return eigs;
}

} // namespace

TEST_CASE("trivial twist has a single zero eigenvalue")
{
    auto lat = TorusLattice::square();
    for (int cutoff : {1, 3, 6}) {
        auto s = twisted_spectrum(lat, normalize(0, 0), cutoff);
        CHECK(static_cast<int>(s.entries.size()) == (2 * cutoff + 1) * (2 * cutoff + 1));
        CHECK(s.entries[0].lambda_sq == doctest::Approx(0.0));
        CHECK(s.entries[1].lambda_sq > 1.0);
    }
}

TEST_CASE("half-period twist matches the fd oracle on a 256^2 grid")
{
    auto lat = TorusLattice::square();
    double analytic = lambda_min(lat, normalize(0.5, 0.0));
    CHECK(analytic == doctest::Approx(M_PI)); // 2 pi * 1/2
    auto fd = fd_lowest_eigs(256, 0.5, 0.0, 1);
    double fd_lambda = std::sqrt(fd[0]);
    CHECK(std::fabs(fd_lambda - analytic) / analytic < 0.005);
}

TEST_CASE("all low eigenvalues match the fd oracle on a 5-point xi sample")
{
    auto lat = TorusLattice::square();
    const double xis[5][2] = {{0.5, 0.0}, {0.3, 0.2}, {0.1, 0.7}, {0.25, 0.25}, {0.9, 0.6}};
    for (auto& q : xis) {
        auto spec = twisted_spectrum(lat, normalize(q[0], q[1]), 3);
        auto fd = fd_lowest_eigs(64, q[0], q[1], 4);
        for (int k = 0; k < 4; ++k) {
            double rel = std::fabs(fd[k] - spec.entries[k].lambda_sq) / spec.entries[k].lambda_sq;
            // fd discretization error at 64^2 is ~(freq*2pi/64)^2/12 relative
            CHECK(rel < 0.005);
        }
    }
}

TEST_CASE("nontrivial twists across a 9x9 sample have positive lambda_min")
{
    auto lat = TorusLattice::square();
    for (int a = 0; a < 9; ++a)
        for (int b = 0; b < 9; ++b) {
            auto xi = normalize(a / 9.0, b / 9.0);
            if (xi.is_trivial)
                continue;
            CHECK(lambda_min(lat, xi) > 0.0);
            auto s = twisted_spectrum(lat, xi, 2);
            CHECK(s.entries[0].lambda_sq > 0.0);
        }
}

TEST_CASE("lambda_min tends to zero monotonically along rays into the origin")
{
    auto lat = TorusLattice::square();
    for (auto ray : {std::array<double, 2>{1.0, 0.0}, std::array<double, 2>{0.6, 0.8}}) {
        double prev = 1e300;
        for (double t : {0.4, 0.2, 0.1, 0.05, 0.025, 0.0125}) {
            double lm = lambda_min(lat, normalize(t * ray[0], t * ray[1]));
            CHECK(lm > 0.0);
            CHECK(lm < prev);
            prev = lm;
        }
        // linear rate: lambda_min ~ 2 pi t |ray|
        double t = 0.0125;
        double lm = lambda_min(lat, normalize(t * ray[0], t * ray[1]));
        CHECK(lm == doctest::Approx(2 * M_PI * t).epsilon(1e-9));
    }
    CHECK(lambda_min(lat, normalize(0, 0)) == 0.0);
}

TEST_CASE("lambda_min is symmetric under negation")
{
    auto lat = TorusLattice::square();
    for (auto q : {std::array<double, 2>{0.3, 0.2}, {0.05, 0.9}, {0.45, 0.15}}) {
        auto xi = normalize(q[0], q[1]);
        CHECK(lambda_min(lat, xi) == doctest::Approx(lambda_min(lat, xi.neg())).epsilon(1e-14));
    }
}

TEST_CASE("spectrum entries are stable under cutoff increase")
{
    auto lat = TorusLattice::square();
    auto xi = normalize(0.3, 0.2);
    auto s3 = twisted_spectrum(lat, xi, 3);
    auto s5 = twisted_spectrum(lat, xi, 5);
    for (const auto& e : s3.entries) {
        bool matched = false;
        for (const auto& f : s5.entries)
            if (f.m == e.m && f.n == e.n) {
                CHECK(f.lambda_sq == doctest::Approx(e.lambda_sq).epsilon(1e-15));
                matched = true;
                break;
            }
        CHECK(matched);
    }
}

TEST_CASE("spectrum continuity in xi")
{
    auto lat = TorusLattice::square();
    const int N = 3;
    const double delta = 1e-4;
    auto a = twisted_spectrum(lat, normalize(0.31, 0.22), N);
    auto b = twisted_spectrum(lat, normalize(0.31 + delta, 0.22 - delta), N);
    // each lambda^2 moves by at most 4 pi^2 (2 |m + xi| |dxi| + |dxi|^2)
    double bound = 4 * M_PI * M_PI * (2.0 * (N + 1) * M_SQRT2 * (delta * M_SQRT2) + 1e-6);
    for (std::size_t i = 0; i < a.entries.size(); ++i)
        CHECK(std::fabs(a.entries[i].lambda_sq - b.entries[i].lambda_sq) < bound);
}

TEST_CASE("sampled plane-wave modes are orthonormal on the mode grid")
{
    const int N = 3, ng = 2 * N + 1;
    auto xi = normalize(0.3, 0.2);
    // sample exp(2 pi i <(m+xi)e*, x>) at lattice points x = (a/ng, b/ng)
    auto mode = [&](int m, int n) {
        std::vector<cplx> v(static_cast<std::size_t>(ng) * ng);
        for (int b = 0; b < ng; ++b)
            for (int a = 0; a < ng; ++a) {
                double ph = 2 * M_PI * ((m + xi.x1) * a / double(ng) + (n + xi.x2) * b / double(ng));
                v[b * ng + a] = cplx(std::cos(ph), std::sin(ph)) / double(ng);
            }
        return v;
    };
    for (int m1 = -N; m1 <= N; ++m1)
        for (int m2 = -N; m2 <= N; ++m2) {
            auto u = mode(m1, 0);
            auto v = mode(m2, 0);
            cplx ip = kern::cdotc(u.size(), u.data(), v.data());
            if (m1 == m2)
                CHECK(std::abs(ip - 1.0) < 1e-12);
            else
                CHECK(std::abs(ip) < 1e-12);
        }
}

TEST_CASE("csv dump has the documented columns")
{
    auto lat = TorusLattice::square();
    auto s = twisted_spectrum(lat, normalize(0.5, 0.0), 1);
    auto csv = s.to_csv();
    CHECK(csv.substr(0, 14) == "m,n,lambda_sq\n");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 10); // header + 9 modes
}
