#include "nahmtx/bessel.hpp"

#include "nahmtx/errors.hpp"
#include "nahmtx/fft.hpp"
#include "nahmtx/kern.hpp"
#include "nahmtx/spinor.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>

namespace nahmtx {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209;

// ascending series; valid for all r but loses accuracy to cancellation for
// large r, used below the first seam
double k0_series(double r)
{
    const double q = 0.25 * r * r;
    double term = 1.0, i0 = 1.0, sum2 = 0.0, hk = 0.0;
    for (int k = 1; k < 64; ++k) {
        term *= q / (static_cast<double>(k) * k);
        hk += 1.0 / k;
        i0 += term;
        sum2 += term * hk;
        if (term < 1e-19 * i0)
            break;
    }
    return -(std::log(0.5 * r) + kEulerGamma) * i0 + sum2;
}

// K0(r) = int_0^inf exp(-r cosh u) du; integrand is even and analytic, so
// doubling trapezoid converges quickly
double k0_quadrature(double r)
{
    const double U = std::acosh(1.0 + 45.0 / r);
    auto f = [r](double u) { return std::exp(-r * std::cosh(u)); };
    int n = 32;
    double prev = 0.0;
    double val = 0.5 * (f(0.0) + f(U));
    for (int i = 1; i < n; ++i)
        val += f(U * i / n);
    val *= U / n;
    for (int pass = 0; pass < 12; ++pass) {
        prev = val;
        double add = 0.0;
        for (int i = 0; i < n; ++i)
            add += f(U * (i + 0.5) / n);
        val = 0.5 * val + 0.5 * add * (U / n);
        n *= 2;
        if (std::fabs(val - prev) < 1e-16 * val && pass > 2)
            break;
    }
    return val;
}

// descending expansion sqrt(pi/2r) e^-r sum_k (-1)^k ((2k-1)!!)^2/(k! (8r)^k),
// truncated at the smallest term
double k0_asymptotic(double r)
{
    double sum = 1.0, term = 1.0;
    for (int k = 1; k < 60; ++k) {
        double mag = std::fabs(term) * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * r);
        if (mag >= std::fabs(term)) // divergent tail reached
            break;
        term = term > 0.0 ? -mag : mag;
        sum += term;
        if (mag < 1e-17)
            break;
    }
    return std::sqrt(M_PI / (2.0 * r)) * std::exp(-r) * sum;
}

double i0_series(double r)
{
    const double q = 0.25 * r * r;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-18 * sum)
            break;
    }
    return sum;
}

double i0_asymptotic(double r)
{
    double sum = 1.0, term = 1.0;
    for (int k = 1; k < 60; ++k) {
        double tk = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * r);
        if (tk >= term)
            break;
        term = tk;
        sum += term;
        if (tk < 1e-17)
            break;
    }
    return std::exp(r) / std::sqrt(2.0 * M_PI * r) * sum;
}

} // namespace

double k0(double r)
{
    if (!(r > 0.0))
        throw DomainError("k0: argument must be positive");
    if (r < 2.0)
        return k0_series(r);
    if (r <= 14.0)
        return k0_quadrature(r);
    return k0_asymptotic(r);
}

double i0(double r)
{
    if (r < 0.0)
        throw DomainError("i0: argument must be nonnegative");
    return r <= 18.0 ? i0_series(r) : i0_asymptotic(r);
}

double k0_l1_norm(double lambda)
{
    if (!(lambda > 0.0))
        throw NonInvertibleMode("k0_l1_norm: lambda must be positive");
    // int_0^1 s K0(s) ds from the ascending series, term by term:
    // int_0^1 s^{2k+1} ds = 1/(2k+2), int_0^1 s^{2k+1} ln s ds = -1/(2k+2)^2
    double I01 = 0.0;
    double ck = 1.0; // (1/4)^k / (k!)^2
    double hk = 0.0;
    for (int k = 0; k < 40; ++k) {
        if (k > 0) {
            ck *= 0.25 / (static_cast<double>(k) * k);
            hk += 1.0 / k;
        }
        double m = 2.0 * k + 2.0;
        double piece = ck * (1.0 / (m * m) + (std::log(2.0) - kEulerGamma) / m + hk / m);
        I01 += piece;
        if (std::fabs(piece) < 1e-18 * std::fabs(I01))
            break;
    }
    // int_1^inf s K0(s) ds on geometric panels with Gauss-Legendre 40
    static const int NG = 40;
    static double gx[NG], gw[NG];
    static bool init = false;
    if (!init) {
        // Newton on Legendre polynomials
        for (int i = 0; i < NG; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (NG + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int j = 2; j <= NG; ++j) {
                    double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                double dp = NG * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / dp;
                x -= dx;
                if (std::fabs(dx) < 1e-15)
                    break;
            }
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= NG; ++j) {
                double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            double dp = NG * (x * p1 - p0) / (x * x - 1.0);
            gx[i] = x;
            gw[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        init = true;
    }
    double Itail = 0.0;
    const double edges[] = {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0};
    for (int p = 0; p + 1 < 7; ++p) {
        double a = edges[p], b = edges[p + 1];
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double acc = 0.0;
        for (int i = 0; i < NG; ++i) {
            double s = mid + half * gx[i];
            acc += gw[i] * s * k0(s);
        }
        Itail += acc * half;
    }
    return 2.0 * M_PI * (I01 + Itail) / (lambda * lambda);
}

PlaneGrid::PlaneGrid(double half_width, int resolution) : R(half_width), M(resolution)
{
    if (!(R > 0.0))
        throw InvalidParameter("PlaneGrid: R must be positive");
    if (M < 8 || M % 2 != 0)
        throw InvalidParameter("PlaneGrid: M must be even and >= 8");
    v.assign(static_cast<std::size_t>(M) * M, cplx(0.0, 0.0));
}

double PlaneGrid::l2norm() const
{
    return h() * std::sqrt(kern::cnrm2sq(v.size(), v.data()));
}

ModeGreenKernel::ModeGreenKernel(double lam, double r_max, int samples) : lambda(lam)
{
    if (!(lam > 0.0))
        throw NonInvertibleMode("ModeGreenKernel: lambda must be positive");
    if (samples < 2 || !(r_max > 0.0))
        throw InvalidParameter("ModeGreenKernel: bad table shape");
    dr = r_max / samples;
    profile.resize(samples);
    for (int i = 0; i < samples; ++i)
        profile[i] = k0(lambda * (i + 1) * dr) / (2.0 * M_PI);
}

double ModeGreenKernel::integral() const
{
    // trapezoid on the table, plus the analytic continuation of the
    // leading -ln(r) behaviour over [0, dr]
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < profile.size(); ++i) {
        double r0 = (i + 1) * dr, r1 = (i + 2) * dr;
        acc += 0.5 * (r0 * profile[i] + r1 * profile[i + 1]) * dr;
    }
    // int_0^dr r K0(lam r)/2pi dr with K0 ~ -ln(lam r/2) - gamma
    double a = dr;
    double head = (-std::log(0.5 * lambda * a) - kEulerGamma) * a * a / 2.0 + a * a / 4.0;
    acc += head / (2.0 * M_PI);
    return 2.0 * M_PI * acc;
}

namespace {

// cell average of K0(lambda r) over the h x h cell at the origin, from the
// closed form of the log integral over a square
double k0_origin_cell_avg(double lambda, double h)
{
    double a = 0.5 * h;
    // (1/4a^2) int_{[-a,a]^2} -ln r dA = -ln a - ln(2)/2 + (6 - pi)/4
    double avg_neg_ln_r = -std::log(a) - 0.5 * std::log(2.0) + (6.0 - M_PI) / 4.0;
    return -std::log(0.5 * lambda) - kEulerGamma + avg_neg_ln_r;
}

struct ConvPlan {
    std::size_t P;
    std::vector<cplx> kernel_hat; // FFT of sampled kernel, includes h^2 weight
};

std::map<std::pair<double, std::pair<double, int>>, ConvPlan>& plan_cache()
{
    static std::map<std::pair<double, std::pair<double, int>>, ConvPlan> c;
    return c;
}
std::mutex plan_mutex;

const ConvPlan& get_plan(double lambda, const PlaneGrid& g)
{
    std::lock_guard<std::mutex> lk(plan_mutex);
    auto key = std::make_pair(lambda, std::make_pair(g.R, g.M));
    auto it = plan_cache().find(key);
    if (it != plan_cache().end())
        return it->second;

    ConvPlan plan;
    plan.P = fft::next_pow2(2 * static_cast<std::size_t>(g.M));
    const std::size_t P = plan.P;
    const double h = g.h();
    plan.kernel_hat.assign(P * P, cplx(0.0, 0.0));
    for (std::size_t jy = 0; jy < P; ++jy) {
        long sy = static_cast<long>(jy <= P / 2 ? jy : jy - P);
        for (std::size_t jx = 0; jx < P; ++jx) {
            long sx = static_cast<long>(jx <= P / 2 ? jx : jx - P);
            double r = h * std::sqrt(static_cast<double>(sx * sx + sy * sy));
            double val = (sx == 0 && sy == 0) ? k0_origin_cell_avg(lambda, h)
                                              : k0(lambda * r);
            plan.kernel_hat[jy * P + jx] = val / (2.0 * M_PI) * h * h;
        }
    }
    fft::transform2d(plan.kernel_hat.data(), P, -1);
    return plan_cache().emplace(key, std::move(plan)).first->second;
}

} // namespace

PlaneGrid mode_green_apply(double lambda, const PlaneGrid& rho)
{
    if (!(lambda > 0.0))
        throw NonInvertibleMode("mode_green_apply: trivial effective twist (lambda <= 0)");
    const int M = rho.M;
    // support check: warn when mass sits outside |w| < R/2
    double inside = 0.0, total = 0.0;
    for (int iy = 0; iy < M; ++iy)
        for (int ix = 0; ix < M; ++ix) {
            double a = std::norm(rho.at(ix, iy));
            total += a;
            if (std::abs(rho.w(ix, iy)) < 0.5 * rho.R)
                inside += a;
        }
    if (total > 0.0 && inside < 0.99 * total)
        std::fprintf(stderr, "mode_green_apply: warning, source extends beyond R/2\n");

    const ConvPlan& plan = get_plan(lambda, rho);
    const std::size_t P = plan.P;
    std::vector<cplx> buf(P * P, cplx(0.0, 0.0));
    for (int iy = 0; iy < M; ++iy)
        for (int ix = 0; ix < M; ++ix)
            buf[static_cast<std::size_t>(iy) * P + ix] = rho.at(ix, iy);
    fft::transform2d(buf.data(), P, -1);
    for (std::size_t i = 0; i < P * P; ++i)
        buf[i] *= plan.kernel_hat[i];
    fft::transform2d(buf.data(), P, +1);
    PlaneGrid g(rho.R, M);
    const double scale = 1.0 / (static_cast<double>(P) * P);
    for (int iy = 0; iy < M; ++iy)
        for (int ix = 0; ix < M; ++ix)
            g.at(ix, iy) = buf[static_cast<std::size_t>(iy) * P + ix] * scale;
    return g;
}

PlaneGrid plane_lap_wide(const PlaneGrid& g)
{
    PlaneGrid out(g.R, g.M);
    plane_lap(g.M, g.h(), g.v.data(), out.v.data(), cplx(1.0, 0.0));
    return out;
}

} // namespace nahmtx
