#include "nahmtx/coupled.hpp"

#include "nahmtx/errors.hpp"
#include "nahmtx/kern.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace nahmtx {

namespace {

// trig-interpolation matrix from an ng_src periodic grid to ng_dst points
// (exact pointwise evaluation of the band-limited interpolant)
std::vector<double> resample_matrix(int ng_src, int ng_dst)
{
    std::vector<double> R(static_cast<std::size_t>(ng_dst) * ng_src, 0.0);
    int N = (ng_src - 1) / 2;
    for (int a = 0; a < ng_dst; ++a)
        for (int b = 0; b < ng_src; ++b) {
            double acc = 0.0;
            for (int m = -N; m <= N; ++m)
                acc += std::cos(2.0 * M_PI * m * (static_cast<double>(a) / ng_dst -
                                                  static_cast<double>(b) / ng_src));
            R[static_cast<std::size_t>(a) * ng_src + b] = acc / ng_src;
        }
    return R;
}

// 2x2 complex matrix of an su(2) element
std::array<cplx, 4> su2_matrix(const Su2& x)
{
    return {cplx(0, -0.5 * x.c[2]), cplx(-0.5 * x.c[1], -0.5 * x.c[0]),
            cplx(0.5 * x.c[1], -0.5 * x.c[0]), cplx(0, 0.5 * x.c[2])};
}

} // namespace

CoupledDiracOp::CoupledDiracOp(const ConnectionField& field, const JacobianPoint& xi,
                               int spinor_cutoff)
    : field_(&field), xi_(xi)
{
    shape_.lat = field.shape.lat;
    shape_.N = spinor_cutoff;
    shape_.R = field.shape.R;
    shape_.M = field.shape.M;
    shape_.rank = 2;

    SpinorShape rank2 = shape_;
    flat_xi_ = FlatDiracOp::make_pair(rank2, xi, xi);
    flat_model_ = FlatDiracOp::make_pair_raw(rank2, xi.x1 + field.xi0.x1, xi.x2 + field.xi0.x2,
                                             xi.x1 - field.xi0.x1, xi.x2 - field.xi0.x2);

    const int ng = shape_.modes_per_axis();
    const int ngA = field.shape.ng();
    const int M = shape_.M;
    const std::size_t tsites = static_cast<std::size_t>(ng) * ng;
    const std::size_t psites = shape_.plane_size();

    // resample the four legs onto the spinor torus grid, orthonormal frame
    auto R1 = resample_matrix(ngA, ng);
    std::vector<double> legs[4];
    const double rt = shape_.lat.tau.real(), it = shape_.lat.tau.imag();
    for (int leg = 0; leg < 4; ++leg)
        legs[leg].assign(tsites * psites * 3, 0.0);
    std::vector<double> rowbuf(static_cast<std::size_t>(ng) * ngA * psites * 3);
    for (int leg = 0; leg < 4; ++leg) {
        // axis-1 resample: (aA, bA) -> (a, bA)
        std::fill(rowbuf.begin(), rowbuf.end(), 0.0);
        for (int a = 0; a < ng; ++a)
            for (int ap = 0; ap < ngA; ++ap) {
                double w = R1[static_cast<std::size_t>(a) * ngA + ap];
                if (w == 0.0)
                    continue;
                for (int bp = 0; bp < ngA; ++bp)
                    kern::daxpy(psites * 3, w,
                                field.coef.data() +
                                    field.idx(leg, static_cast<std::size_t>(bp) * ngA + ap, 0),
                                rowbuf.data() +
                                    (static_cast<std::size_t>(bp) * ng + a) * psites * 3);
            }
        // axis-2 resample: (a, bA) -> (a, b)
        for (int b = 0; b < ng; ++b)
            for (int bp = 0; bp < ngA; ++bp) {
                double w = R1[static_cast<std::size_t>(b) * ngA + bp];
                if (w == 0.0)
                    continue;
                for (int a = 0; a < ng; ++a)
                    kern::daxpy(psites * 3, w,
                                rowbuf.data() + (static_cast<std::size_t>(bp) * ng + a) * psites * 3,
                                legs[leg].data() +
                                    (static_cast<std::size_t>(b) * ng + a) * psites * 3);
            }
    }

    // operator grid sites are x1-major (index a*ng + b), matching the layout
    // the separable mode -> grid transform produces; the field stores x2-major
    azbar_.assign(tsites * psites * 4, cplx(0, 0));
    awbar_.assign(tsites * psites * 4, cplx(0, 0));
    for (int a = 0; a < ng; ++a)
        for (int b = 0; b < ng; ++b) {
            std::size_t ts_field = static_cast<std::size_t>(b) * ng + a;
            std::size_t ts_op = static_cast<std::size_t>(a) * ng + b;
            for (std::size_t ps = 0; ps < psites; ++ps) {
                std::size_t i3 = (ts_field * psites + ps) * 3;
                Su2 a1{legs[0][i3], legs[0][i3 + 1], legs[0][i3 + 2]};
                Su2 a2{legs[1][i3], legs[1][i3 + 1], legs[1][i3 + 2]};
                Su2 ay1{legs[2][i3], legs[2][i3 + 1], legs[2][i3 + 2]};
                Su2 ay2{legs[3][i3], legs[3][i3 + 1], legs[3][i3 + 2]};
                Su2 aX = a1;
                Su2 aY = (a2 - a1 * rt) * (1.0 / it);
                auto mX = su2_matrix(aX), mY = su2_matrix(aY);
                auto m1 = su2_matrix(ay1), m2 = su2_matrix(ay2);
                std::size_t o = (ts_op * psites + ps) * 4;
                for (int e = 0; e < 4; ++e) {
                    azbar_[o + e] = 0.5 * (mX[e] + cplx(0, 1) * mY[e]);
                    awbar_[o + e] = 0.5 * (m1[e] + cplx(0, 1) * m2[e]);
                }
            }
        }

    if (field.winding) {
        WindingMap wind{*field.winding, field.shape.R};
        wind_.assign(tsites * psites * 4, cplx(0, 0));
        SU2q g;
        Quat dg[4];
        for (int a = 0; a < ng; ++a)
            for (int b = 0; b < ng; ++b) {
                std::size_t ts_op = static_cast<std::size_t>(a) * ng + b;
                for (int iy = 0; iy < M; ++iy)
                    for (int ix = 0; ix < M; ++ix) {
                        wind.eval(static_cast<double>(a) / ng, static_cast<double>(b) / ng,
                                  -shape_.R + ix * shape_.h(), -shape_.R + iy * shape_.h(), g, dg);
                        auto m = g.matrix();
                        std::size_t o =
                            (ts_op * psites + static_cast<std::size_t>(iy) * M + ix) * 4;
                        for (int e = 0; e < 4; ++e)
                            wind_[o + e] = m[e];
                    }
            }
    }

    // partition of unity: raised-cosine crossover on an annulus of width R/8
    beta1_.assign(psites, cplx(0, 0));
    beta2_.assign(psites, cplx(0, 0));
    const double rc = 0.45 * shape_.R, w = shape_.R / 8.0;
    for (int iy = 0; iy < M; ++iy)
        for (int ix = 0; ix < M; ++ix) {
            double r = std::hypot(-shape_.R + ix * shape_.h(), -shape_.R + iy * shape_.h());
            double t = std::clamp((r - (rc - 0.5 * w)) / w, 0.0, 1.0);
            beta1_[static_cast<std::size_t>(iy) * M + ix] = std::cos(0.5 * M_PI * t);
            beta2_[static_cast<std::size_t>(iy) * M + ix] = std::sin(0.5 * M_PI * t);
        }

    // unitary mode <-> grid factors exp(2 pi i g m / ng)/sqrt(ng)
    dft_fwd_.assign(static_cast<std::size_t>(ng) * ng, cplx(0, 0));
    dft_inv_.assign(static_cast<std::size_t>(ng) * ng, cplx(0, 0));
    for (int g2 = 0; g2 < ng; ++g2)
        for (int j = 0; j < ng; ++j) {
            double ph = 2.0 * M_PI * g2 * (j - shape_.N) / ng;
            dft_fwd_[static_cast<std::size_t>(g2) * ng + j] =
                cplx(std::cos(ph), std::sin(ph)) / std::sqrt(static_cast<double>(ng));
            dft_inv_[static_cast<std::size_t>(j) * ng + g2] =
                cplx(std::cos(ph), -std::sin(ph)) / std::sqrt(static_cast<double>(ng));
        }
}

double CoupledDiracOp::lambda_min_effective() const
{
    double a = lambda_min(shape_.lat, xi_.shifted(field_->xi0));
    double b = lambda_min(shape_.lat, xi_.shifted(field_->xi0.neg()));
    return std::min(a, b);
}

namespace {

// torus transform of one (leg, rank-pair) block family: modes -> grid or back.
// src, dst indexed [idx ng^2][plane], rank interleaved by caller. Rows along
// the untouched axis are independent, so the loop parallelizes over them.
void torus_pass(int ng, std::size_t psites, const cplx* U, const cplx* src, cplx* dst, bool axis2)
{
    std::fill(dst, dst + static_cast<std::size_t>(ng) * ng * psites, cplx(0, 0));
    parallel_for(
        static_cast<std::size_t>(ng),
        [&](std::size_t lo, std::size_t hi) {
            for (std::size_t other = lo; other < hi; ++other)
                for (int g = 0; g < ng; ++g)
                    for (int j = 0; j < ng; ++j) {
                        cplx w = U[static_cast<std::size_t>(g) * ng + j];
                        std::size_t si = axis2 ? (other * ng + j)
                                               : (static_cast<std::size_t>(j) * ng + other);
                        std::size_t di = axis2 ? (other * ng + g)
                                               : (static_cast<std::size_t>(g) * ng + other);
                        kern::caxpy(psites, w, src + si * psites, dst + di * psites);
                    }
        },
        worker_threads());
}

} // namespace

void CoupledDiracOp::coupling_terms(const Spinor& s, Spinor& out, bool adjoint_direction) const
{
    const int ng = shape_.modes_per_axis();
    const std::size_t psites = shape_.plane_size();
    const std::size_t tsites = static_cast<std::size_t>(ng) * ng;
    const std::size_t blk = tsites * psites;

    // mode -> grid for both legs and ranks
    std::vector<cplx> gin(4 * blk), scratch(blk), gout(4 * blk, cplx(0, 0));
    for (int leg = 0; leg < 2; ++leg)
        for (int r = 0; r < 2; ++r) {
            const cplx* src = s.block(leg, r, 0);
            cplx* mid = scratch.data();
            cplx* dst = gin.data() + (static_cast<std::size_t>(leg) * 2 + r) * blk;
            // mode index (m+N)*ng + (n+N): axis-2 first (n), then axis-1 (m)
            torus_pass(ng, psites, dft_fwd_.data(), src, mid, true);
            torus_pass(ng, psites, dft_fwd_.data(), mid, dst, false);
        }

    // pointwise 2x2 action on the rank index at every grid site
    parallel_for(
        tsites,
        [&](std::size_t lo, std::size_t hi) {
            for (std::size_t ts = lo; ts < hi; ++ts)
                for (std::size_t ps = 0; ps < psites; ++ps) {
                    std::size_t site = ts * psites + ps;
                    const cplx* Z = azbar_.data() + site * 4;
                    const cplx* W = awbar_.data() + site * 4;
                    cplx a0[2], a1[2];
                    for (int r = 0; r < 2; ++r) {
                        a0[r] = gin[(0 * 2 + r) * blk + site];
                        a1[r] = gin[(1 * 2 + r) * blk + site];
                    }
                    cplx o0[2] = {0, 0}, o1[2] = {0, 0};
                    auto mul = [](const cplx* m, const cplx* v, cplx* acc, cplx scale) {
                        acc[0] += scale * (m[0] * v[0] + m[1] * v[1]);
                        acc[1] += scale * (m[2] * v[0] + m[3] * v[1]);
                    };
                    auto mul_h = [](const cplx* m, const cplx* v, cplx* acc, cplx scale) {
                        acc[0] += scale * (std::conj(m[0]) * v[0] + std::conj(m[2]) * v[1]);
                        acc[1] += scale * (std::conj(m[1]) * v[0] + std::conj(m[3]) * v[1]);
                    };
                    if (!adjoint_direction) {
                        // u += 2 Az f0 + 2 Aw^† f2 ; v += 2 Aw f0 - 2 Az^† f2
                        mul(Z, a0, o0, 2.0);
                        mul_h(W, a1, o0, 2.0);
                        mul(W, a0, o1, 2.0);
                        mul_h(Z, a1, o1, -2.0);
                    } else {
                        // f0 += 2 Az^† u + 2 Aw^† v ; f2 += 2 Aw u - 2 Az v
                        mul_h(Z, a0, o0, 2.0);
                        mul_h(W, a1, o0, 2.0);
                        mul(W, a0, o1, 2.0);
                        mul(Z, a1, o1, -2.0);
                    }
                    for (int r = 0; r < 2; ++r) {
                        gout[(0 * 2 + r) * blk + site] = o0[r];
                        gout[(1 * 2 + r) * blk + site] = o1[r];
                    }
                }
        },
        worker_threads());

    // grid -> mode, accumulate
    std::vector<cplx> back(blk);
    for (int leg = 0; leg < 2; ++leg)
        for (int r = 0; r < 2; ++r) {
            const cplx* src = gout.data() + (static_cast<std::size_t>(leg) * 2 + r) * blk;
            torus_pass(ng, psites, dft_inv_.data(), src, scratch.data(), true);
            torus_pass(ng, psites, dft_inv_.data(), scratch.data(), back.data(), false);
            kern::caxpy(blk, cplx(1, 0), back.data(), out.block(leg, r, 0));
        }
}

Spinor CoupledDiracOp::apply(const Spinor& s) const
{
    if (!s.shape.compatible(shape_))
        throw ShapeError("CoupledDiracOp::apply: shape mismatch");
    Spinor out = flat_xi_.apply(s);
    coupling_terms(s, out, s.chi == Chirality::Minus);
    return out;
}

Spinor CoupledDiracOp::conjugate_by_winding(const Spinor& s, bool inverse) const
{
    if (wind_.empty())
        return s;
    const int ng = shape_.modes_per_axis();
    const std::size_t psites = shape_.plane_size();
    const std::size_t tsites = static_cast<std::size_t>(ng) * ng;
    const std::size_t blk = tsites * psites;
    Spinor out(s.chi, shape_);
    std::vector<cplx> grid(2 * blk), scratch(blk), back(blk);
    for (int leg = 0; leg < 2; ++leg) {
        for (int r = 0; r < 2; ++r) {
            torus_pass(ng, psites, dft_fwd_.data(), s.block(leg, r, 0), scratch.data(), true);
            torus_pass(ng, psites, dft_fwd_.data(), scratch.data(),
                       grid.data() + static_cast<std::size_t>(r) * blk, false);
        }
        for (std::size_t site = 0; site < blk; ++site) {
            const cplx* m = wind_.data() + site * 4;
            cplx v0 = grid[site], v1 = grid[blk + site];
            if (!inverse) {
                grid[site] = m[0] * v0 + m[1] * v1;
                grid[blk + site] = m[2] * v0 + m[3] * v1;
            } else { // unitary: inverse = adjoint
                grid[site] = std::conj(m[0]) * v0 + std::conj(m[2]) * v1;
                grid[blk + site] = std::conj(m[1]) * v0 + std::conj(m[3]) * v1;
            }
        }
        for (int r = 0; r < 2; ++r) {
            torus_pass(ng, psites, dft_inv_.data(), grid.data() + static_cast<std::size_t>(r) * blk,
                       scratch.data(), true);
            torus_pass(ng, psites, dft_inv_.data(), scratch.data(), back.data(), false);
            std::copy(back.begin(), back.end(), out.block(leg, r, 0));
        }
    }
    return out;
}

namespace {

void mul_beta(Spinor& s, const std::vector<cplx>& beta)
{
    mul_plane_field(s, beta);
}

} // namespace

Spinor CoupledDiracOp::parametrix(const Spinor& g, double inner_tol) const
{
    if (g.chi != Chirality::Plus)
        throw ShapeError("parametrix: S+ section expected");
    // Qc = W^-1 Qinf_model W with W the winding multiplication
    auto Qc = [&](Spinor x) {
        x = conjugate_by_winding(x, false);
        Spinor y = flat_model_.invert(x, inner_tol);
        return conjugate_by_winding(y, true);
    };
    Spinor p1 = g;
    mul_beta(p1, beta1_);
    p1 = Qc(p1);
    mul_beta(p1, beta1_);
    Spinor p2 = g;
    mul_beta(p2, beta2_);
    p2 = Qc(p2);
    mul_beta(p2, beta2_);
    p1 += p2;
    return p1;
}

Spinor CoupledDiracOp::parametrix_adjoint(const Spinor& s, double inner_tol) const
{
    if (s.chi != Chirality::Minus)
        throw ShapeError("parametrix_adjoint: S- section expected");
    // (Qc)^† = W^-1 (Qinf)^† W ; (Qinf)^† t = Green(D* t)
    auto Qc_adj = [&](Spinor x) {
        x = conjugate_by_winding(x, false);
        Spinor y = flat_model_.apply(x); // D* (x in S-)
        // per-mode Green solve on S+
        Spinor z(Chirality::Plus, shape_);
        const int total = 2 * shape_.rank * shape_.nmodes();
        parallel_for(
            static_cast<std::size_t>(total),
            [&](std::size_t lo, std::size_t hi) {
                for (std::size_t k = lo; k < hi; ++k) {
                    int leg = static_cast<int>(k) / (shape_.rank * shape_.nmodes());
                    int rem = static_cast<int>(k) % (shape_.rank * shape_.nmodes());
                    int r = rem / shape_.nmodes();
                    int mode = rem % shape_.nmodes();
                    helmholtz_cg(shape_.M, shape_.h(), std::norm(flat_model_.zeta[r][mode]),
                                 y.block(leg, r, mode), z.block(leg, r, mode), inner_tol);
                }
            },
            worker_threads());
        return conjugate_by_winding(z, true);
    };
    Spinor p1 = s;
    mul_beta(p1, beta1_);
    p1 = Qc_adj(p1);
    mul_beta(p1, beta1_);
    Spinor p2 = s;
    mul_beta(p2, beta2_);
    p2 = Qc_adj(p2);
    mul_beta(p2, beta2_);
    p1 += p2;
    return p1;
}

namespace {

// preconditioned CG on a hermitian PSD operator over spinors
int pcg(const std::function<Spinor(const Spinor&)>& A,
        const std::function<Spinor(const Spinor&)>& M, const Spinor& b, Spinor& x, double tol,
        int max_iter, double* final_rel = nullptr)
{
    x = Spinor(b.chi, b.shape);
    Spinor r = b;
    Spinor z = M ? M(r) : r;
    Spinor p = z;
    cplx rz = inner(r, z);
    double b2 = std::pow(b.norm(), 2);
    if (b2 == 0.0)
        return 0;
    int it = 0;
    for (; it < max_iter; ++it) {
        double r2 = std::pow(r.norm(), 2);
        if (r2 <= tol * tol * b2)
            break;
        Spinor Ap = A(p);
        cplx pAp = inner(p, Ap);
        if (pAp.real() <= 0.0)
            break;
        cplx alpha = rz / pAp;
        x.axpy(alpha, p);
        r.axpy(-alpha, Ap);
        z = M ? M(r) : r;
        cplx rz2 = inner(r, z);
        cplx beta = rz2 / rz;
        rz = rz2;
        Spinor pn = z;
        pn.axpy(beta, p);
        p = pn;
    }
    if (final_rel)
        *final_rel = r.norm() / std::sqrt(b2);
    return it;
}

void orthonormalize_block(std::vector<Spinor>& block)
{
    for (std::size_t i = 0; i < block.size(); ++i) {
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t j = 0; j < i; ++j) {
                cplx c = inner(block[j], block[i]);
                block[i].axpy(-c, block[j]);
            }
        double n = block[i].norm();
        if (n > 1e-14)
            block[i].scale(1.0 / n);
    }
}

// deterministic phase: make the inner product against a fixed probe real
// and positive so frames are reproducible run to run
void canonical_phase(Spinor& psi)
{
    const SpinorShape& sh = psi.shape;
    std::size_t probe = (static_cast<std::size_t>(0) * sh.rank * sh.nmodes() +
                         sh.mode_index(0, 0)) *
                            sh.plane_size() +
                        static_cast<std::size_t>(sh.M / 2) * sh.M + sh.M / 2 + 1;
    cplx v = psi.v[probe];
    if (std::abs(v) < 1e-13 * (1.0 + psi.norm()))
        return;
    psi.scale(std::conj(v) / std::abs(v));
}

} // namespace

KernelFrame kernel_basis(const CoupledDiracOp& op, const KernelOptions& opt)
{
    const JacobianPoint& xi = op.xi();
    const JacobianPoint& xi0 = op.field().xi0;
    if (xi.dist(xi0) < opt.delta_punct || xi.dist(xi0.neg()) < opt.delta_punct)
        throw NearPuncture("kernel_basis: xi within delta_punct of a puncture");

    const int nb = opt.k_expected + 2;
    const double sscale = op.lambda_min_effective();

    std::vector<Spinor> X;
    bool cold = true;
    if (opt.warm_start) {
        for (const auto& w : *opt.warm_start)
            if (static_cast<int>(X.size()) < nb)
                X.push_back(w);
        cold = X.empty();
    }
    Rng rng(12345);
    while (static_cast<int>(X.size()) < nb)
        X.push_back(random_spinor(rng, Chirality::Minus, op.shape(), 0.5));
    // guard against rank-deficient warm blocks: re-randomize collapsed columns
    for (int guard = 0; guard < 4; ++guard) {
        orthonormalize_block(X);
        bool full_rank = true;
        for (auto& v : X)
            if (v.norm() < 0.5) {
                v = random_spinor(rng, Chirality::Minus, op.shape(), 0.5);
                full_rank = false;
            }
        if (full_rank)
            break;
    }

    const bool use_precond = op.field().winding.has_value();
    auto A = [&](const Spinor& v) { return op.apply(op.apply(v)); };

    // cold starts: a few rounds of preconditioned power iteration pull the
    // near-kernel directions out of the random block before LOBPCG begins
    if (cold && use_precond) {
        for (int round = 0; round < 3; ++round) {
            for (auto& v : X)
                v = op.parametrix(op.parametrix_adjoint(v, 1e-3), 1e-3);
            orthonormalize_block(X);
        }
    }

    // LOBPCG on DD*: basis [X, M R, P], Ritz each sweep; the parametrix
    // product is the preconditioner and the A-products are cached
    std::vector<Spinor> AX;
    for (const auto& v : X)
        AX.push_back(A(v));
    std::vector<Spinor> P, AP;
    KernelFrame frame;
    frame.xi = xi;
    std::vector<double> sigma_prev;
    int applies = static_cast<int>(X.size());

    for (int sweep = 0; sweep < opt.max_outer; ++sweep) {
        // Ritz values of the current X block
        MatC Hx(nb, nb);
        for (int i = 0; i < nb; ++i)
            for (int j = 0; j < nb; ++j)
                Hx.at(i, j) = inner(X[i], AX[j]);
        std::vector<double> lam(nb);
        for (int i = 0; i < nb; ++i)
            lam[i] = std::max(0.0, Hx.at(i, i).real());

        // residuals and preconditioned directions
        std::vector<Spinor> W;
        double worst_rel = 0.0;
        for (int i = 0; i < nb; ++i) {
            Spinor r = AX[i];
            r.axpy(-lam[i], X[i]);
            worst_rel = std::max(worst_rel, r.norm() / (lam[i] + 0.01 * sscale * sscale));
            if (use_precond) {
                Spinor z = op.parametrix(op.parametrix_adjoint(r, 1e-4), 1e-4);
                W.push_back(std::move(z));
            } else {
                W.push_back(std::move(r));
            }
        }
        frame.sigma.assign(nb, 0.0);
        for (int i = 0; i < nb; ++i)
            frame.sigma[i] = std::sqrt(lam[i]);
        std::sort(frame.sigma.begin(), frame.sigma.end());
        bool stable = !sigma_prev.empty();
        if (stable)
            for (int i = 0; i < nb; ++i)
                if (std::fabs(frame.sigma[i] - sigma_prev[i]) >
                    opt.tol_sigma * (frame.sigma[i] + 0.02 * sscale))
                    stable = false;
        sigma_prev = frame.sigma;
        if ((stable && sweep >= 3) || (worst_rel < 1e-8 && sweep >= 2))
            break;

        // assemble the trial basis and its cached A-products
        std::vector<Spinor> basis = X;
        std::vector<Spinor> Abasis = AX;
        for (auto& w : W) {
            // orthogonalize against the current basis before the expensive apply
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& b : basis)
                    w.axpy(-inner(b, w), b);
            double n = w.norm();
            if (n < 1e-12)
                continue;
            w.scale(1.0 / n);
            basis.push_back(w);
            Abasis.push_back(A(w));
            ++applies;
        }
        for (std::size_t i = 0; i < P.size(); ++i) {
            Spinor p = P[i];
            Spinor ap = AP[i];
            for (const auto& b : basis) {
                cplx c = inner(b, p);
                p.axpy(-c, b);
            }
            double n = p.norm();
            if (n < 1e-10)
                continue;
            p.scale(1.0 / n);
            // A p must be recomputed after projection against the basis; the
            // cached product only survives pure scaling, so reproject exactly
            ap = A(p);
            ++applies;
            basis.push_back(std::move(p));
            Abasis.push_back(std::move(ap));
        }

        const int m = static_cast<int>(basis.size());
        MatC H(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                H.at(i, j) = inner(basis[i], Abasis[j]);
        std::vector<double> vals;
        MatC vecs;
        hermitian_eig(H, vals, vecs);

        std::vector<Spinor> Xn, AXn;
        for (int j = 0; j < nb; ++j) {
            Spinor xv(Chirality::Minus, op.shape());
            Spinor axv(Chirality::Minus, op.shape());
            for (int i = 0; i < m; ++i) {
                xv.axpy(vecs.at(i, j), basis[i]);
                axv.axpy(vecs.at(i, j), Abasis[i]);
            }
            Xn.push_back(std::move(xv));
            AXn.push_back(std::move(axv));
        }
        // P directions: the new X minus its projection on the old X span
        P.clear();
        AP.clear();
        for (int j = 0; j < nb; ++j) {
            Spinor p = Xn[j];
            Spinor ap = AXn[j];
            for (int i = 0; i < nb; ++i) {
                cplx c = inner(X[i], p);
                p.axpy(-c, X[i]);
                ap.axpy(-c, AX[i]);
            }
            double n = p.norm();
            if (n > 1e-8) {
                p.scale(1.0 / n);
                ap.scale(1.0 / n);
                P.push_back(std::move(p));
                AP.push_back(std::move(ap));
            }
        }
        X = std::move(Xn);
        AX = std::move(AXn);
        // Ritz vectors of an orthonormal basis stay orthonormal to rounding;
        // refresh the cached products only occasionally
        if (sweep % 12 == 11) {
            orthonormalize_block(X);
            for (int i = 0; i < nb; ++i)
                AX[i] = A(X[i]);
            applies += nb;
        }
    }
    frame.iterations = applies;
    {
        // final Ritz rotation so the block diagonalizes DD*
        MatC H(nb, nb);
        std::vector<Spinor> dstar;
        for (const auto& v : X)
            dstar.push_back(op.apply(v));
        for (int i = 0; i < nb; ++i)
            for (int j = 0; j < nb; ++j)
                H.at(i, j) = inner(dstar[i], dstar[j]);
        std::vector<double> vals;
        MatC vecs;
        hermitian_eig(H, vals, vecs);
        std::vector<Spinor> rot;
        for (int j = 0; j < nb; ++j) {
            Spinor acc(Chirality::Minus, op.shape());
            for (int i = 0; i < nb; ++i)
                acc.axpy(vecs.at(i, j), X[i]);
            rot.push_back(std::move(acc));
        }
        X = std::move(rot);
        orthonormalize_block(X);
        frame.sigma.assign(nb, 0.0);
        for (int i = 0; i < nb; ++i)
            frame.sigma[i] = std::sqrt(std::max(0.0, vals[i]));
    }
    std::vector<Spinor>& block = X;

    // threshold + gap rule: the ladder top sets the scale; accepted kernel
    // values must sit below rel_threshold of it and be gap-separated
    frame.sigma_ref = frame.sigma.back();
    int accepted = 0;
    while (accepted < nb && frame.sigma[accepted] < opt.rel_threshold * frame.sigma_ref)
        ++accepted;
    if (accepted > 0) {
        frame.gap = frame.sigma[accepted] / std::max(frame.sigma[accepted - 1], 1e-300);
        if (frame.gap < opt.gap_factor) {
            std::ostringstream msg;
            msg << "kernel_basis: no decisive spectral gap at dim " << accepted << "; ladder:";
            for (double s : frame.sigma)
                msg << " " << s;
            throw AmbiguousKernelDimension(msg.str());
        }
    } else {
        frame.gap = std::numeric_limits<double>::infinity();
    }
    frame.basis.assign(block.begin(), block.begin() + accepted);
    for (auto& b : frame.basis)
        canonical_phase(b);
    return frame;
}

Spinor greens_apply(const CoupledDiracOp& op, const Spinor& s, double tol, GreensStats* stats,
                    bool preconditioned)
{
    if (s.chi != Chirality::Plus)
        throw ShapeError("greens_apply: S+ section expected");
    auto A = [&](const Spinor& v) { return op.apply(op.apply(v)); };
    std::function<Spinor(const Spinor&)> M;
    if (preconditioned && op.field().winding)
        M = [&](const Spinor& v) { return op.parametrix_adjoint(op.parametrix(v)); };
    Spinor x;
    double rel = 0.0;
    int its = pcg(A, M, s, x, tol, 600, &rel);
    if (stats) {
        stats->iterations = its;
        stats->residual = rel;
    }
    if (rel > tol * 10.0)
        throw SolverDiverged("greens_apply: relative residual " + fmt_double(rel) + " after " +
                             std::to_string(its) + " iterations");
    return x;
}

std::vector<IndexSample> index_scan(const ConnectionField& field, int spinor_cutoff,
                                    const std::vector<JacobianPoint>& xis,
                                    const KernelOptions& opt)
{
    std::vector<IndexSample> out;
    std::vector<Spinor> warm;
    for (const auto& xi : xis) {
        CoupledDiracOp op(field, xi, spinor_cutoff);
        KernelOptions o = opt;
        if (!warm.empty())
            o.warm_start = &warm;
        IndexSample smp;
        smp.xi = xi;
        try {
            KernelFrame fr = kernel_basis(op, o);
            smp.dim = static_cast<int>(fr.basis.size());
            smp.sigma = fr.sigma;
            smp.iterations = fr.iterations;
            warm = fr.basis;
        } catch (const AmbiguousKernelDimension&) {
            smp.ambiguous = true;
            smp.dim = -1;
        }
        out.push_back(std::move(smp));
    }
    return out;
}

std::string index_scan_csv(const std::vector<IndexSample>& samples)
{
    std::ostringstream os;
    std::size_t ns = 0;
    for (const auto& s : samples)
        ns = std::max(ns, s.sigma.size());
    os << "xi1,xi2,dim";
    for (std::size_t i = 0; i < ns; ++i)
        os << ",sigma_" << (i + 1);
    os << ",iterations\n";
    for (const auto& s : samples) {
        os << fmt_double(s.xi.x1) << "," << fmt_double(s.xi.x2) << "," << s.dim;
        for (std::size_t i = 0; i < ns; ++i)
            os << "," << (i < s.sigma.size() ? fmt_double(s.sigma[i]) : "");
        os << "," << s.iterations << "\n";
    }
    return os.str();
}

double plus_laplacian_gap(const CoupledDiracOp& op, int iters)
{
    Rng rng(777);
    Spinor v = random_spinor(rng, Chirality::Plus, op.shape(), 0.6);
    auto A = [&](const Spinor& x) { return op.apply(op.apply(x)); };
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
        Spinor sol;
        pcg(A, nullptr, v, sol, 1e-5, 200);
        double n = sol.norm();
        if (n == 0.0)
            break;
        sol.scale(1.0 / n);
        Spinor Av = A(sol);
        lam = inner(sol, Av).real();
        v = sol;
    }
    return lam;
}

} // namespace nahmtx
