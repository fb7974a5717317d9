#include "nahmtx/linalg.hpp"

#include "nahmtx/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nahmtx {

MatC MatC::identity(int n)
{
    MatC m(n, n);
    for (int i = 0; i < n; ++i)
        m.at(i, i) = 1.0;
    return m;
}

MatC MatC::adjoint() const
{
    MatC m(cols, rows);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m.at(j, i) = std::conj(at(i, j));
    return m;
}

MatC MatC::mul(const MatC& o) const
{
    if (cols != o.rows)
        throw ShapeError("MatC::mul: dimension mismatch");
    MatC m(rows, o.cols);
    for (int i = 0; i < rows; ++i)
        for (int k = 0; k < cols; ++k) {
            cplx v = at(i, k);
            if (v == cplx(0, 0))
                continue;
            for (int j = 0; j < o.cols; ++j)
                m.at(i, j) += v * o.at(k, j);
        }
    return m;
}

MatC MatC::operator+(const MatC& o) const
{
    MatC m = *this;
    for (std::size_t i = 0; i < a.size(); ++i)
        m.a[i] += o.a[i];
    return m;
}

MatC MatC::operator-(const MatC& o) const
{
    MatC m = *this;
    for (std::size_t i = 0; i < a.size(); ++i)
        m.a[i] -= o.a[i];
    return m;
}

MatC MatC::scaled(cplx s) const
{
    MatC m = *this;
    for (auto& v : m.a)
        v *= s;
    return m;
}

double MatC::fro_norm() const
{
    double acc = 0.0;
    for (const auto& v : a)
        acc += std::norm(v);
    return std::sqrt(acc);
}

cplx MatC::trace() const
{
    cplx t = 0.0;
    for (int i = 0; i < std::min(rows, cols); ++i)
        t += at(i, i);
    return t;
}

void hermitian_eig(const MatC& h, std::vector<double>& vals, MatC& vecs)
{
    const int n = h.rows;
    MatC A = h;
    vecs = MatC::identity(n);
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q)
                off += std::norm(A.at(p, q));
        if (off < 1e-30)
            break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                cplx apq = A.at(p, q);
                if (std::abs(apq) < 1e-300)
                    continue;
                double app = A.at(p, p).real(), aqq = A.at(q, q).real();
                // phase to make the pivot real, then a real Jacobi rotation
                cplx phase = apq / std::abs(apq);
                double g = std::abs(apq);
                double theta = 0.5 * std::atan2(2.0 * g, aqq - app);
                double c = std::cos(theta), s = std::sin(theta);
                // columns p, q of A and vecs update: [p'; q'] = R^* [p; q]
                for (int i = 0; i < n; ++i) {
                    cplx aip = A.at(i, p), aiq = A.at(i, q);
                    A.at(i, p) = c * aip - s * std::conj(phase) * aiq;
                    A.at(i, q) = s * phase * aip + c * aiq;
                    cplx vip = vecs.at(i, p), viq = vecs.at(i, q);
                    vecs.at(i, p) = c * vip - s * std::conj(phase) * viq;
                    vecs.at(i, q) = s * phase * vip + c * viq;
                }
                for (int j = 0; j < n; ++j) {
                    cplx apj = A.at(p, j), aqj = A.at(q, j);
                    A.at(p, j) = c * apj - s * phase * aqj;
                    A.at(q, j) = s * std::conj(phase) * apj + c * aqj;
                }
            }
    }
    vals.resize(n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) {
        vals[i] = A.at(i, i).real();
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](int x, int y) { return vals[x] < vals[y]; });
    std::vector<double> sorted(n);
    MatC v2(n, n);
    for (int j = 0; j < n; ++j) {
        sorted[j] = vals[order[j]];
        for (int i = 0; i < n; ++i)
            v2.at(i, j) = vecs.at(i, order[j]);
    }
    vals = sorted;
    vecs = v2;
}

void svd(const MatC& a, std::vector<double>& sing, MatC* U, MatC* V)
{
    // eigen-route on A^* A; adequate at these sizes
    MatC ata = a.adjoint().mul(a);
    std::vector<double> vals;
    MatC vecs;
    hermitian_eig(ata, vals, vecs);
    const int n = a.cols;
    sing.resize(n);
    MatC Vm(n, n), Um(a.rows, n);
    for (int j = 0; j < n; ++j) {
        int src = n - 1 - j; // descending
        sing[j] = std::sqrt(std::max(0.0, vals[src]));
        for (int i = 0; i < n; ++i)
            Vm.at(i, j) = vecs.at(i, src);
    }
    for (int j = 0; j < n; ++j) {
        // u_j = A v_j / s_j (or any unit vector for null directions)
        double s = sing[j];
        for (int i = 0; i < a.rows; ++i) {
            cplx acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += a.at(i, k) * Vm.at(k, j);
            Um.at(i, j) = s > 1e-300 ? acc / s : (i == j ? cplx(1, 0) : cplx(0, 0));
        }
    }
    if (U)
        *U = Um;
    if (V)
        *V = Vm;
}

MatC polar_unitary(const MatC& a)
{
    std::vector<double> s;
    MatC U, V;
    svd(a, s, &U, &V);
    return U.mul(V.adjoint());
}

std::vector<cplx> eigenvalues(const MatC& a)
{
    const int n = a.rows;
    if (n == 0)
        return {};
    if (n == 1)
        return {a.at(0, 0)};
    // characteristic polynomial via Faddeev-LeVerrier
    std::vector<cplx> coef(n + 1, cplx(0, 0)); // p(x) = x^n + c1 x^{n-1} + ... + cn
    coef[0] = 1.0;
    MatC Mk = MatC::identity(n);
    for (int k = 1; k <= n; ++k) {
        Mk = a.mul(Mk);
        cplx ck = -Mk.trace() / static_cast<double>(k);
        coef[k] = ck;
        for (int i = 0; i < n; ++i)
            Mk.at(i, i) += ck;
    }
    // Durand-Kerner
    std::vector<cplx> r(n);
    cplx seed(0.4, 0.9);
    cplx p = 1.0;
    for (int i = 0; i < n; ++i) {
        p *= seed;
        r[i] = p;
    }
    auto poly = [&](cplx x) {
        cplx v = coef[0];
        for (int k = 1; k <= n; ++k)
            v = v * x + coef[k];
        return v;
    };
    // scale roots guess by matrix norm
    double scale = a.fro_norm() + 1e-30;
    for (auto& z : r)
        z *= scale;
    for (int it = 0; it < 500; ++it) {
        double moved = 0.0;
        for (int i = 0; i < n; ++i) {
            cplx denom = 1.0;
            for (int j = 0; j < n; ++j)
                if (j != i)
                    denom *= r[i] - r[j];
            if (std::abs(denom) < 1e-300)
                denom = 1e-300;
            cplx delta = poly(r[i]) / denom;
            r[i] -= delta;
            moved = std::max(moved, std::abs(delta));
        }
        if (moved < 1e-13 * scale)
            break;
    }
    return r;
}

std::vector<cplx> solve_dense(MatC a, std::vector<cplx> b)
{
    const int n = a.rows;
    if (a.cols != n || static_cast<int>(b.size()) != n)
        throw ShapeError("solve_dense: square system expected");
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int i = col + 1; i < n; ++i)
            if (std::abs(a.at(i, col)) > std::abs(a.at(piv, col)))
                piv = i;
        if (std::abs(a.at(piv, col)) < 1e-300)
            throw SolverDiverged("solve_dense: singular matrix");
        if (piv != col) {
            for (int j = 0; j < n; ++j)
                std::swap(a.at(piv, j), a.at(col, j));
            std::swap(b[piv], b[col]);
        }
        for (int i = col + 1; i < n; ++i) {
            cplx f = a.at(i, col) / a.at(col, col);
            if (f == cplx(0, 0))
                continue;
            for (int j = col; j < n; ++j)
                a.at(i, j) -= f * a.at(col, j);
            b[i] -= f * b[col];
        }
    }
    std::vector<cplx> x(n);
    for (int i = n - 1; i >= 0; --i) {
        cplx acc = b[i];
        for (int j = i + 1; j < n; ++j)
            acc -= a.at(i, j) * x[j];
        x[i] = acc / a.at(i, i);
    }
    return x;
}

} // namespace nahmtx
