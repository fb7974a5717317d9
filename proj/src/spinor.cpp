#include "nahmtx/spinor.hpp"

#include "nahmtx/errors.hpp"
#include "nahmtx/kern.hpp"

#include <cmath>

namespace nahmtx {

void Spinor::zero() { std::fill(v.begin(), v.end(), cplx(0, 0)); }

double Spinor::norm() const
{
    return shape.h() * std::sqrt(kern::cnrm2sq(v.size(), v.data()));
}

Spinor& Spinor::operator+=(const Spinor& o)
{
    if (!shape.compatible(o.shape) || chi != o.chi)
        throw ShapeError("spinor +=: representation mismatch");
    kern::caxpy(v.size(), cplx(1, 0), o.v.data(), v.data());
    return *this;
}

Spinor& Spinor::operator-=(const Spinor& o)
{
    if (!shape.compatible(o.shape) || chi != o.chi)
        throw ShapeError("spinor -=: representation mismatch");
    kern::caxpy(v.size(), cplx(-1, 0), o.v.data(), v.data());
    return *this;
}

void Spinor::axpy(cplx a, const Spinor& x)
{
    if (!shape.compatible(x.shape) || chi != x.chi)
        throw ShapeError("spinor axpy: representation mismatch");
    kern::caxpy(v.size(), a, x.v.data(), v.data());
}

void Spinor::scale(cplx a) { kern::cscal(v.size(), a, v.data()); }

cplx inner(const Spinor& a, const Spinor& b)
{
    if (!a.shape.compatible(b.shape) || a.chi != b.chi)
        throw ShapeError("inner: representation mismatch");
    double h = a.shape.h();
    return h * h * kern::cdotc(a.v.size(), a.v.data(), b.v.data());
}

Spinor mul_w(const Spinor& s, bool conjugate)
{
    Spinor out = s;
    const int M = s.shape.M;
    std::vector<cplx> wv(s.shape.plane_size());
    for (int iy = 0; iy < M; ++iy)
        for (int ix = 0; ix < M; ++ix) {
            cplx w(-s.shape.R + ix * s.shape.h(), -s.shape.R + iy * s.shape.h());
            wv[static_cast<std::size_t>(iy) * M + ix] = conjugate ? std::conj(w) : w;
        }
    mul_plane_field(out, wv);
    return out;
}

void mul_plane_field(Spinor& s, const std::vector<cplx>& field)
{
    if (field.size() != s.shape.plane_size())
        throw ShapeError("mul_plane_field: field size mismatch");
    const std::size_t ps = s.shape.plane_size();
    for (std::size_t b = 0; b < s.shape.block_count(); ++b) {
        cplx* p = s.v.data() + b * ps;
        for (std::size_t i = 0; i < ps; ++i)
            p[i] *= field[i];
    }
}

Spinor random_spinor(Rng& rng, Chirality chi, const SpinorShape& shape, double fill)
{
    Spinor s(chi, shape);
    const int M = shape.M;
    const double rmax = fill * shape.R;
    for (std::size_t b = 0; b < shape.block_count(); ++b) {
        cplx* p = s.v.data() + b * shape.plane_size();
        for (int iy = 0; iy < M; ++iy)
            for (int ix = 0; ix < M; ++ix) {
                double x = -shape.R + ix * shape.h();
                double y = -shape.R + iy * shape.h();
                if (x * x + y * y < rmax * rmax)
                    p[static_cast<std::size_t>(iy) * M + ix] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
            }
    }
    double n = s.norm();
    if (n > 0)
        s.scale(1.0 / n);
    return s;
}

double annulus_sup(const Spinor& s, double r0, double r1)
{
    const int M = s.shape.M;
    double best = 0.0;
    for (int iy = 0; iy < M; ++iy)
        for (int ix = 0; ix < M; ++ix) {
            double x = -s.shape.R + ix * s.shape.h();
            double y = -s.shape.R + iy * s.shape.h();
            double r = std::sqrt(x * x + y * y);
            if (r < r0 || r > r1)
                continue;
            std::size_t site = static_cast<std::size_t>(iy) * M + ix;
            double acc = 0.0;
            for (std::size_t b = 0; b < s.shape.block_count(); ++b)
                acc += std::norm(s.v[b * s.shape.plane_size() + site]);
            best = std::max(best, acc);
        }
    return std::sqrt(best);
}

void plane_P(int M, double h, const cplx* in, cplx* out, cplx scale)
{
    const cplx cx = scale / (2.0 * h);
    const cplx cy = cplx(0, 1) * scale / (2.0 * h);
    for (int iy = 0; iy < M; ++iy) {
        const std::size_t row = static_cast<std::size_t>(iy) * M;
        for (int ix = 0; ix < M; ++ix) {
            cplx dx = (ix + 1 < M ? in[row + ix + 1] : cplx(0)) -
                      (ix > 0 ? in[row + ix - 1] : cplx(0));
            cplx dy = (iy + 1 < M ? in[row + M + ix] : cplx(0)) -
                      (iy > 0 ? in[row - M + ix] : cplx(0));
            out[row + ix] += cx * dx + cy * dy;
        }
    }
}

void plane_Pstar(int M, double h, const cplx* in, cplx* out, cplx scale)
{
    // -(D1 - i D2) = exact discrete adjoint of D1 + i D2 with ghost zeros
    const cplx cx = -scale / (2.0 * h);
    const cplx cy = cplx(0, 1) * scale / (2.0 * h);
    for (int iy = 0; iy < M; ++iy) {
        const std::size_t row = static_cast<std::size_t>(iy) * M;
        for (int ix = 0; ix < M; ++ix) {
            cplx dx = (ix + 1 < M ? in[row + ix + 1] : cplx(0)) -
                      (ix > 0 ? in[row + ix - 1] : cplx(0));
            cplx dy = (iy + 1 < M ? in[row + M + ix] : cplx(0)) -
                      (iy > 0 ? in[row - M + ix] : cplx(0));
            out[row + ix] += cx * dx + cy * dy;
        }
    }
}

void plane_lap(int M, double h, const cplx* in, cplx* out, cplx scale)
{
    // exact composition P*P: the outermost ring loses one diagonal unit per
    // direction because the reflected difference path exits the window
    const cplx c = scale / (4.0 * h * h);
    for (int iy = 0; iy < M; ++iy) {
        const std::size_t row = static_cast<std::size_t>(iy) * M;
        const double dy = (iy == 0 || iy == M - 1) ? 1.0 : 2.0;
        for (int ix = 0; ix < M; ++ix) {
            const double dx = (ix == 0 || ix == M - 1) ? 1.0 : 2.0;
            cplx acc = (dx + dy) * in[row + ix];
            if (ix + 2 < M)
                acc -= in[row + ix + 2];
            if (ix >= 2)
                acc -= in[row + ix - 2];
            if (iy + 2 < M)
                acc -= in[row + 2 * static_cast<std::size_t>(M) + ix];
            if (iy >= 2)
                acc -= in[row - 2 * static_cast<std::size_t>(M) + ix];
            out[row + ix] += c * acc;
        }
    }
}

} // namespace nahmtx
