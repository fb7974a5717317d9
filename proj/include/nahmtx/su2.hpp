#pragma once

#include "nahmtx/util.hpp"

#include <array>
#include <cmath>

namespace nahmtx {

// su(2) elements as real coefficients against T_c = -(i/2) sigma_c, so
// [T_a, T_b] = eps_abc T_c and Tr(T_a T_b) = -delta_ab / 2. The bracket is
// the cross product of coefficient vectors.
struct Su2 {
    std::array<double, 3> c{0, 0, 0};

    Su2() = default;
    Su2(double a, double b, double d) : c{a, b, d} {}

    Su2 operator+(const Su2& o) const { return {c[0] + o.c[0], c[1] + o.c[1], c[2] + o.c[2]}; }
    Su2 operator-(const Su2& o) const { return {c[0] - o.c[0], c[1] - o.c[1], c[2] - o.c[2]}; }
    Su2 operator*(double s) const { return {c[0] * s, c[1] * s, c[2] * s}; }
    Su2& operator+=(const Su2& o)
    {
        c[0] += o.c[0];
        c[1] += o.c[1];
        c[2] += o.c[2];
        return *this;
    }

    double normsq() const { return c[0] * c[0] + c[1] * c[1] + c[2] * c[2]; }
};

inline Su2 bracket(const Su2& a, const Su2& b)
{
    return {a.c[1] * b.c[2] - a.c[2] * b.c[1], a.c[2] * b.c[0] - a.c[0] * b.c[2],
            a.c[0] * b.c[1] - a.c[1] * b.c[0]};
}

// Tr(a b) in the fundamental representation
inline double tr2(const Su2& a, const Su2& b)
{
    return -0.5 * (a.c[0] * b.c[0] + a.c[1] * b.c[1] + a.c[2] * b.c[2]);
}

// SU(2) group elements as unit quaternions w + i (v . sigma).
struct SU2q {
    double w = 1.0;
    std::array<double, 3> v{0, 0, 0};

    static SU2q identity() { return {}; }

    // exp of the su(2) element with coefficient vector phi against (i sigma_c):
    // exp(i (phi . sigma)) = cos|phi| + i sin|phi| (phi_hat . sigma)
    static SU2q exp_iv(const std::array<double, 3>& phi)
    {
        double m = std::sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2]);
        if (m < 1e-300)
            return {};
        double s = std::sin(m) / m;
        return {std::cos(m), {s * phi[0], s * phi[1], s * phi[2]}};
    }

    SU2q conj() const { return {w, {-v[0], -v[1], -v[2]}}; }

    SU2q operator*(const SU2q& o) const
    {
        // (w1 + i v1.s)(w2 + i v2.s) = w1 w2 - v1.v2 + i((w1 v2 + w2 v1 - v1 x v2).s)
        double dot = v[0] * o.v[0] + v[1] * o.v[1] + v[2] * o.v[2];
        std::array<double, 3> cr{v[1] * o.v[2] - v[2] * o.v[1], v[2] * o.v[0] - v[0] * o.v[2],
                                 v[0] * o.v[1] - v[1] * o.v[0]};
        return {w * o.w - dot,
                {w * o.v[0] + o.w * v[0] - cr[0], w * o.v[1] + o.w * v[1] - cr[1],
                 w * o.v[2] + o.w * v[2] - cr[2]}};
    }

    // adjoint action on su(2): coefficients rotate by the SO(3) image of q
    Su2 rotate(const Su2& x) const
    {
        // q (i u.s) q^-1 with u = -x/2; returns coefficients of the result
        SU2q t{0.0, {x.c[0], x.c[1], x.c[2]}};
        SU2q r = (*this) * t * conj();
        return {r.v[0], r.v[1], r.v[2]};
    }

    // complex 2x2 entries (row-major) of w + i v.sigma
    std::array<cplx, 4> matrix() const
    {
        return {cplx(w, v[2]), cplx(v[1], v[0]), cplx(-v[1], v[0]), cplx(w, -v[2])};
    }
};

// Tangent (non-unit) quaternions represent derivatives of group elements and
// general elements of the real quaternion algebra spanned by {I, i sigma_c}.
struct Quat {
    double w = 0.0;
    std::array<double, 3> v{0, 0, 0};

    static Quat of(const SU2q& q) { return {q.w, q.v}; }

    Quat operator+(const Quat& o) const
    {
        return {w + o.w, {v[0] + o.v[0], v[1] + o.v[1], v[2] + o.v[2]}};
    }
    Quat operator-(const Quat& o) const
    {
        return {w - o.w, {v[0] - o.v[0], v[1] - o.v[1], v[2] - o.v[2]}};
    }
    Quat operator*(double s) const { return {w * s, {v[0] * s, v[1] * s, v[2] * s}}; }
    Quat operator*(const Quat& o) const
    {
        double dot = v[0] * o.v[0] + v[1] * o.v[1] + v[2] * o.v[2];
        std::array<double, 3> cr{v[1] * o.v[2] - v[2] * o.v[1], v[2] * o.v[0] - v[0] * o.v[2],
                                 v[0] * o.v[1] - v[1] * o.v[0]};
        return {w * o.w - dot,
                {w * o.v[0] + o.w * v[0] - cr[0], w * o.v[1] + o.w * v[1] - cr[1],
                 w * o.v[2] + o.w * v[2] - cr[2]}};
    }

    // project to su(2) coefficients against T_c: i(v.sigma) = -2 (v . T),
    // so the T-coefficients are -2v (the w part should be ~0)
    Su2 to_su2() const { return {-2.0 * v[0], -2.0 * v[1], -2.0 * v[2]}; }
};

} // namespace nahmtx
