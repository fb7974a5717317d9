#include "nahmtx/spectrum.hpp"

#include "nahmtx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nahmtx {

std::array<double, 2> mode_freq(const TorusLattice& lat, const JacobianPoint& xi, int m, int n)
{
    auto d1 = lat.dual1();
    auto d2 = lat.dual2();
    double a = m + xi.x1, b = n + xi.x2;
    return {a * d1[0] + b * d2[0], a * d1[1] + b * d2[1]};
}

cplx mode_zeta(const TorusLattice& lat, const JacobianPoint& xi, int m, int n)
{
    auto p = mode_freq(lat, xi, m, n);
    return 2.0 * M_PI * cplx(0.0, 1.0) * cplx(p[0], p[1]);
}

cplx mode_zeta_raw(const TorusLattice& lat, double tx1, double tx2, int m, int n)
{
    auto d1 = lat.dual1();
    auto d2 = lat.dual2();
    double a = m + tx1, b = n + tx2;
    return 2.0 * M_PI * cplx(0.0, 1.0) * cplx(a * d1[0] + b * d2[0], a * d1[1] + b * d2[1]);
}

TwistedSpectrum twisted_spectrum(const TorusLattice& lat, const JacobianPoint& xi, int cutoff)
{
    if (cutoff < 1)
        throw InvalidParameter("twisted_spectrum: cutoff must be >= 1");
    TwistedSpectrum s;
    s.xi = xi;
    s.cutoff = cutoff;
    s.entries.reserve(static_cast<std::size_t>(2 * cutoff + 1) * (2 * cutoff + 1));
    for (int m = -cutoff; m <= cutoff; ++m)
        for (int n = -cutoff; n <= cutoff; ++n) {
            auto p = mode_freq(lat, xi, m, n);
            double l2 = 4.0 * M_PI * M_PI * (p[0] * p[0] + p[1] * p[1]);
            s.entries.push_back({m, n, l2});
        }
    std::sort(s.entries.begin(), s.entries.end(), [](const SpectrumEntry& a, const SpectrumEntry& b) {
        if (a.lambda_sq != b.lambda_sq)
            return a.lambda_sq < b.lambda_sq;
        if (a.m != b.m)
            return a.m < b.m;
        return a.n < b.n;
    });
    return s;
}

std::string TwistedSpectrum::to_csv() const
{
    std::ostringstream out;
    out << "m,n,lambda_sq\n";
    for (const auto& e : entries)
        out << e.m << "," << e.n << "," << fmt_double(e.lambda_sq) << "\n";
    return out.str();
}

double lambda_min(const TorusLattice& lat, const JacobianPoint& xi)
{
    if (xi.is_trivial)
        return 0.0;
    double best = std::numeric_limits<double>::infinity();
    // |tau| is O(1) in practice; a generous window covers skew lattices
    for (int m = -4; m <= 4; ++m)
        for (int n = -4; n <= 4; ++n) {
            auto p = mode_freq(lat, xi, m, n);
            double l2 = p[0] * p[0] + p[1] * p[1];
            if (l2 > 0.0)
                best = std::min(best, l2);
        }
    return 2.0 * M_PI * std::sqrt(best);
}

} // namespace nahmtx
