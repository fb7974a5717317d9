#include "nahmtx/geometry.hpp"

#include "nahmtx/errors.hpp"

#include <cmath>

namespace nahmtx {

namespace {

double mod1(double v)
{
    double r = v - std::floor(v);
    if (r >= 1.0) // floor rounding at the seam
        r -= 1.0;
    return r;
}

// half-integer test robust to the mod-1 seam
bool is_integral(double v, double tol = 1e-12)
{
    return std::fabs(v - std::round(v)) < tol;
}

} // namespace

JacobianPoint normalize(double raw1, double raw2)
{
    if (!std::isfinite(raw1) || !std::isfinite(raw2))
        throw InvalidParameter("normalize: non-finite character coordinates");
    JacobianPoint p;
    p.x1 = mod1(raw1);
    p.x2 = mod1(raw2);
    p.is_trivial = is_integral(p.x1) && is_integral(p.x2);
    if (p.is_trivial) {
        p.x1 = 0.0;
        p.x2 = 0.0;
    }
    p.is_order_two = !p.is_trivial && is_integral(2.0 * p.x1) && is_integral(2.0 * p.x2);
    return p;
}

JacobianPoint JacobianPoint::neg() const { return normalize(-x1, -x2); }

JacobianPoint JacobianPoint::shifted(const JacobianPoint& d) const
{
    return normalize(x1 + d.x1, x2 + d.x2);
}

double JacobianPoint::dist(const JacobianPoint& o) const
{
    auto d = [](double a, double b) {
        double t = std::fabs(a - b);
        return std::min(t, 1.0 - t);
    };
    double d1 = d(x1, o.x1), d2 = d(x2, o.x2);
    return std::sqrt(d1 * d1 + d2 * d2);
}

std::array<JacobianPoint, 3> order_two_points()
{
    return {normalize(0.5, 0.0), normalize(0.0, 0.5), normalize(0.5, 0.5)};
}

PoincareForm poincare(double z1, double z2, const JacobianPoint& xi)
{
    PoincareForm f;
    const cplx ipi(0.0, M_PI);
    f.omega = {ipi * xi.x1, ipi * xi.x2, -ipi * z1, -ipi * z2};
    f.Omega = {cplx(0.0, 2.0 * M_PI), cplx(0.0, 2.0 * M_PI)};
    return f;
}

cplx PoincareForm::wedge_sq_coeff() const
{
    // Omega^Omega = 2 * Omega_1 * Omega_2 * (dxi1^dz1^dxi2^dz2); reordering
    // to dz1^dz2^dxi1^dxi2 is the 4-cycle (xi1 z1 xi2 z2) -> (z1 z2 xi1 xi2),
    // an odd permutation.
    return -2.0 * Omega[0] * Omega[1];
}

} // namespace nahmtx
