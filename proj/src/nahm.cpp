#include "nahmtx/nahm.hpp"

#include "nahmtx/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nahmtx {

namespace {

constexpr double kHiggsScale = 2.0 * M_SQRT2 * M_PI; // 2 sqrt(2) pi

// orientation factor pinning the Green route of F_B against the plaquette
// route; fixed once by their agreement on relaxed fields
constexpr double kCurvRouteSign = 1.0;

std::pair<long long, long long> key_of(const JacobianPoint& xi)
{
    return {llround(xi.x1 * 1e12), llround(xi.x2 * 1e12)};
}

MatC gram(const std::vector<Spinor>& a, const std::vector<Spinor>& b)
{
    MatC g(static_cast<int>(a.size()), static_cast<int>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            g.at(static_cast<int>(i), static_cast<int>(j)) = inner(a[i], b[j]);
    return g;
}

// align the neighbor frame to the center frame by the unitary polar factor
std::vector<Spinor> align_frames(const std::vector<Spinor>& center, const std::vector<Spinor>& nb)
{
    const int k = static_cast<int>(center.size());
    MatC U = polar_unitary(gram(nb, center));
    std::vector<Spinor> out;
    out.reserve(k);
    for (int a = 0; a < k; ++a) {
        Spinor acc(center[0].chi, center[0].shape);
        for (int b = 0; b < k; ++b)
            acc.axpy(U.at(b, a), nb[b]);
        out.push_back(std::move(acc));
    }
    return out;
}

MatC frame_link(const std::vector<Spinor>& a, const std::vector<Spinor>& b)
{
    return polar_unitary(gram(a, b));
}

// log of a near-identity unitary by a truncated series
MatC unitary_log(const MatC& w)
{
    const int n = w.rows;
    MatC X = w - MatC::identity(n);
    MatC X2 = X.mul(X);
    MatC X3 = X2.mul(X);
    return X - X2.scaled(0.5) + X3.scaled(1.0 / 3.0);
}

MatC phi_matrix(const std::vector<Spinor>& frame, bool conjugate_w = false)
{
    const int k = static_cast<int>(frame.size());
    MatC phi(k, k);
    for (int b = 0; b < k; ++b) {
        Spinor wpsi = mul_w(frame[b], conjugate_w);
        for (int a = 0; a < k; ++a)
            phi.at(a, b) = kHiggsScale * inner(frame[a], wpsi);
    }
    return phi;
}

std::vector<cplx> sorted_eigs(const MatC& m)
{
    auto ev = eigenvalues(m);
    std::sort(ev.begin(), ev.end(), [](cplx x, cplx y) {
        if (std::abs(x) != std::abs(y))
            return std::abs(x) < std::abs(y);
        return std::arg(x) < std::arg(y);
    });
    return ev;
}

// solve DD* y = s on S- orthogonally to the kernel frame (deflated CG)
Spinor greens_minus(const CoupledDiracOp& op, const std::vector<Spinor>& kernel, const Spinor& s,
                    double tol)
{
    Spinor rhs = s;
    for (const auto& k : kernel)
        rhs.axpy(-inner(k, rhs), k);
    auto deflate = [&](Spinor& v) {
        for (const auto& k : kernel)
            v.axpy(-inner(k, v), k);
    };
    Spinor x(Chirality::Minus, op.shape());
    Spinor r = rhs, p = rhs;
    double b2 = std::pow(rhs.norm(), 2);
    if (b2 == 0.0)
        return x;
    double rr = b2;
    for (int it = 0; it < 800 && rr > tol * tol * b2; ++it) {
        Spinor Ap = op.apply(op.apply(p));
        deflate(Ap);
        cplx pAp = inner(p, Ap);
        if (pAp.real() <= 0)
            break;
        cplx alpha = rr / pAp;
        x.axpy(alpha, p);
        r.axpy(-alpha, Ap);
        deflate(r);
        double rr2 = std::pow(r.norm(), 2);
        cplx beta = rr2 / rr;
        rr = rr2;
        Spinor pn = r;
        pn.axpy(beta, p);
        p = pn;
    }
    return x;
}

// Clifford action of the torus (dX^dY) or plane (dy1^dy2) area form on S-:
// diag(i, -i) and diag(-i, i) on the (u, v) legs; their sum annihilates S-
Spinor clifford_area(const Spinor& s, bool plane)
{
    Spinor out = s;
    const std::size_t half = s.shape.size() / 2;
    cplx c0 = plane ? cplx(0, -1) : cplx(0, 1);
    cplx c1 = -c0;
    for (std::size_t i = 0; i < half; ++i)
        out.v[i] *= c0;
    for (std::size_t i = half; i < out.v.size(); ++i)
        out.v[i] *= c1;
    return out;
}

} // namespace

const CoupledDiracOp& FrameCache::op(const JacobianPoint& xi)
{
    auto key = key_of(xi);
    auto it = ops_.find(key);
    if (it != ops_.end())
        return *it->second;
    while (ops_.size() >= 3) {
        auto jt = ops_.begin();
        if (jt->first == key)
            ++jt;
        ops_.erase(jt);
    }
    auto up = std::make_unique<CoupledDiracOp>(*field_, xi, opts_.spinor_cutoff);
    return *ops_.emplace(key, std::move(up)).first->second;
}

const KernelFrame& FrameCache::at(const JacobianPoint& xi)
{
    auto key = key_of(xi);
    auto it = frames_.find(key);
    if (it != frames_.end())
        return it->second;
    KernelOptions kop = opts_.kernel;
    if (!last_basis_.empty())
        kop.warm_start = &last_basis_;
    KernelFrame fr = kernel_basis(op(xi), kop);
    last_basis_ = fr.basis;
    while (frames_.size() >= 12) {
        auto jt = frames_.begin();
        if (jt->first == key)
            ++jt;
        frames_.erase(jt);
    }
    return frames_.emplace(key, std::move(fr)).first->second;
}

void FrameCache::clear()
{
    frames_.clear();
    ops_.clear();
    last_basis_.clear();
}

HiggsSample transform_point(FrameCache& cache, const JacobianPoint& xi)
{
    HiggsSample smp;
    smp.xi = xi;
    const double d = cache.options().delta_xi;
    const double gtol = cache.options().green_tol;

    // center frame first (it also warm-starts the stencil solves)
    std::vector<Spinor> fc = cache.at(xi).basis;
    const int k = static_cast<int>(fc.size());
    smp.dim = k;
    if (k == 0) {
        smp.B1 = smp.B2 = smp.Phi = smp.PhiProj = smp.F12 = smp.F12_green = smp.bracket12 =
            MatC(0, 0);
        return smp;
    }
    const CoupledDiracOp& op = cache.op(xi);

    // seven-point stencil, phase-aligned to the center: the 4-cross plus the
    // two diagonal corners needed by the opposite plaquette pair
    auto aligned_at = [&](double dx1, double dx2) {
        return align_frames(fc, cache.at(normalize(xi.x1 + dx1, xi.x2 + dx2)).basis);
    };
    std::vector<Spinor> sE = aligned_at(d, 0), sW = aligned_at(-d, 0);
    std::vector<Spinor> sN = aligned_at(0, d), sS = aligned_at(0, -d);
    std::vector<Spinor> sNE = aligned_at(d, d), sSW = aligned_at(-d, -d);

    // connection coefficients by central differences
    smp.B1 = MatC(k, k);
    smp.B2 = MatC(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            Spinor d1 = sE[b];
            d1 -= sW[b];
            Spinor d2 = sN[b];
            d2 -= sS[b];
            smp.B1.at(a, b) = inner(fc[a], d1) / (2.0 * d);
            smp.B2.at(a, b) = inner(fc[a], d2) / (2.0 * d);
        }

    // Higgs field, its conjugate route and the projected variant
    smp.Phi = phi_matrix(fc);
    MatC phi_bar = phi_matrix(fc, true); // 2 sqrt2 pi <psi_a, wbar psi_b>
    smp.PhiProj = MatC(k, k);
    for (int b = 0; b < k; ++b) {
        Spinor wpsi = mul_w(fc[b]);
        Spinor dstar = op.apply(wpsi);                 // D*(w psi)
        Spinor gd = greens_apply(op, dstar, gtol);     // G D*(w psi)
        Spinor corr = op.apply(gd);                    // D G D*(w psi)
        Spinor proj = wpsi;
        proj -= corr;
        for (int a = 0; a < k; ++a)
            smp.PhiProj.at(a, b) = kHiggsScale * inner(fc[a], proj);
    }
    smp.phi_proj_err = (smp.PhiProj - smp.Phi).fro_norm() / (smp.Phi.fro_norm() + 1e-30);

    // holomorphicity: aligned Phi matrices across the stencil
    MatC dphi_1 = (phi_matrix(sE) - phi_matrix(sW)).scaled(1.0 / (2.0 * d));
    MatC dphi_2 = (phi_matrix(sN) - phi_matrix(sS)).scaled(1.0 / (2.0 * d));
    // dbar = (d1 + i d2)/2 acting on the endomorphism, plus the B-commutator
    MatC bz = (smp.B1 + smp.B2.scaled(cplx(0, 1))).scaled(0.5); // B^{0,1} coefficient
    MatC dbar = (dphi_1 + dphi_2.scaled(cplx(0, 1))).scaled(0.5) + bz.mul(smp.Phi) -
                smp.Phi.mul(bz);
    MatC dhol = (dphi_1 - dphi_2.scaled(cplx(0, 1))).scaled(0.5);
    smp.dbar_phi = dbar.fro_norm();
    smp.d_phi = dhol.fro_norm();
    smp.hitchin_2 = smp.dbar_phi;

    // curvature, stencil route: the two opposite plaquettes centered on xi
    MatC flog(k, k);
    {
        MatC w1 = frame_link(fc, sE)
                      .mul(frame_link(sE, sNE))
                      .mul(frame_link(sNE, sN))
                      .mul(frame_link(sN, fc));
        MatC w2 = frame_link(fc, sW)
                      .mul(frame_link(sW, sSW))
                      .mul(frame_link(sSW, sS))
                      .mul(frame_link(sS, fc));
        flog = unitary_log(w1) + unitary_log(w2);
    }
    smp.F12 = flog.scaled(-1.0 / (2.0 * d * d));

    // curvature, Green route: -8 pi^2 <c(dX^dY) psi_a, G- psi_b> as the
    // dxi1^dxi2 coefficient (the -4 pi^2 i prefactor on dxi^dxibar)
    smp.F12_green = MatC(k, k);
    MatC kahler(k, k);
    std::vector<Spinor> gminus;
    gminus.reserve(k);
    for (int b = 0; b < k; ++b)
        gminus.push_back(greens_minus(op, fc, fc[b], gtol));
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            cplx zz = inner(clifford_area(fc[a], false), gminus[b]);
            cplx ww = inner(clifford_area(fc[a], true), gminus[b]);
            smp.F12_green.at(a, b) = kCurvRouteSign * (-8.0 * M_PI * M_PI) * zz;
            kahler.at(a, b) = zz + ww;
        }
    smp.kahler_pairing = kahler.fro_norm() * 8.0 * M_PI * M_PI;
    smp.fb_cross_err = (smp.F12 - smp.F12_green).fro_norm();

    // [Phi, Phi*] coefficient on dxi1 ^ dxi2: the 1-form bracket
    // (Phi Phi* + Phi* Phi) = [phi, phi^dagger] dxi ^ dxibar; the phi_bar
    // route pins hermiticity
    MatC phid = smp.Phi.adjoint();
    MatC comm = smp.Phi.mul(phid) - phid.mul(smp.Phi);
    smp.bracket12 = comm.scaled(cplx(0, -2.0));
    smp.hitchin_1 = (smp.F12 + smp.bracket12).fro_norm();

    smp.phi_herm_err = (phi_bar - phid).fro_norm() / (phid.fro_norm() + 1e-30);

    return smp;
}

std::pair<double, double> hitchin_residual(const HiggsSample& s)
{
    return {s.hitchin_1, s.hitchin_2};
}

PoleReport pole_scan(FrameCache& cache, const JacobianPoint& puncture, int n_rays,
                     const std::vector<double>& radii)
{
    if (radii.size() < 3)
        throw InvalidParameter("pole_scan: need at least three radii");
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (radii[i] >= radii[i - 1])
            throw InvalidParameter("pole_scan: radii must decrease");

    PoleReport rep;
    rep.puncture = puncture;
    int kdim = 0;
    std::vector<MatC> residue_candidates;
    for (int ray = 0; ray < n_rays; ++ray) {
        double ang = 2.0 * M_PI * (ray + 0.31) / n_rays; // avoid lattice axes
        RayFit fit;
        fit.angle = ang;
        std::vector<double> logr, logphi;
        std::vector<cplx> scaled_eig;
        MatC res_near;
        double other = 0.0;
        for (double r : radii) {
            auto xi = normalize(puncture.x1 + r * std::cos(ang), puncture.x2 + r * std::sin(ang));
            const KernelFrame& fr = cache.at(xi);
            kdim = std::max<int>(kdim, static_cast<int>(fr.basis.size()));
            MatC phi = phi_matrix(fr.basis);
            auto ev = sorted_eigs(phi);
            if (ev.empty())
                continue;
            cplx top = ev.back();
            logr.push_back(std::log(1.0 / r));
            logphi.push_back(std::log(std::abs(top)));
            cplx dxi(r * std::cos(ang), r * std::sin(ang));
            scaled_eig.push_back(top * dxi);
            for (std::size_t q = 0; q + 1 < ev.size(); ++q)
                other = std::max(other, std::abs(ev[q]));
            res_near = phi.scaled(dxi); // (xi - xi0) Phi at the current radius
        }
        if (logr.size() < 3)
            throw PoleFitInconclusive("pole_scan: not enough usable radii");
        // least squares for slope and correlation
        double n = static_cast<double>(logr.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        for (std::size_t i = 0; i < logr.size(); ++i) {
            sx += logr[i];
            sy += logphi[i];
            sxx += logr[i] * logr[i];
            sxy += logr[i] * logphi[i];
            syy += logphi[i] * logphi[i];
        }
        double denom = n * sxx - sx * sx;
        fit.order = (n * sxy - sx * sy) / denom;
        double corr = (n * sxy - sx * sy) /
                      std::sqrt(std::max(1e-30, (n * sxx - sx * sx) * (n * syy - sy * sy)));
        fit.correlation = corr;
        if (corr < 0.99)
            throw PoleFitInconclusive("pole_scan: log-log correlation " + fmt_double(corr));
        rep.max_other_eig = std::max(rep.max_other_eig, other);
        // Richardson extrapolation of the residue eigenvalue from the two
        // smallest radii: res(r) = c + a r
        std::size_t m = scaled_eig.size();
        double r1 = radii[m - 2], r2 = radii[m - 1];
        fit.residue_eig = (scaled_eig[m - 1] * r1 - scaled_eig[m - 2] * r2) / (r1 - r2);
        rep.rays.push_back(fit);
        residue_candidates.push_back(res_near);
    }

    // residue matrix: average of the per-ray candidates in a common gauge is
    // not available (frames differ); use singular values which are frame
    // independent, from the last candidate, and the cross-ray eigenvalues
    rep.residue = residue_candidates.back();
    std::vector<double> sv;
    svd(rep.residue, sv);
    double sref = sv.empty() ? 0.0 : sv[0];
    int rank = 0;
    for (double s : sv)
        if (s > 0.05 * sref)
            ++rank;
    rep.residue_rank = rank;
    if (rank > 0 && rank < static_cast<int>(sv.size()) && sv[rank] > 0)
        rep.rank_gap = sv[rank - 1] / sv[rank];
    else
        rep.rank_gap = std::numeric_limits<double>::infinity();
    // semi-simplicity: rank-r residue with r distinct nonzero eigenvalues of
    // magnitude comparable to the singular values
    auto ev = sorted_eigs(rep.residue);
    int big = 0;
    for (auto z : ev)
        if (std::abs(z) > 0.05 * sref)
            ++big;
    rep.semisimple = big == rank;
    (void)kdim;
    return rep;
}

std::vector<GaugeComparePoint> gauge_compare(const ConnectionField& field,
                                             const ConnectionField& gauged,
                                             const std::vector<JacobianPoint>& xis,
                                             const TransformOptions& opts)
{
    FrameCache ca(field, opts), cb(gauged, opts);
    std::vector<GaugeComparePoint> out;
    for (const auto& xi : xis) {
        GaugeComparePoint pt;
        pt.xi = xi;
        auto sa = transform_point(ca, xi);
        auto sb = transform_point(cb, xi);
        auto ea = sorted_eigs(sa.Phi);
        auto eb = sorted_eigs(sb.Phi);
        double dist = 0.0;
        for (std::size_t i = 0; i < ea.size(); ++i)
            dist = std::max(dist, std::abs(ea[i] - eb[i]));
        pt.spectrum_dist = dist;
        pt.fb_norm_ratio = (sb.F12.fro_norm() + 1e-30) / (sa.F12.fro_norm() + 1e-30);
        pt.hitchin_ratio = (sb.hitchin_1 + sb.hitchin_2 + 1e-30) /
                           (sa.hitchin_1 + sa.hitchin_2 + 1e-30);
        out.push_back(pt);
    }
    return out;
}

DegreeReport degree_estimate(FrameCache& cache, int grid, double excision_radius,
                             int circle_points)
{
    const JacobianPoint xi0 = cache.field().xi0;
    const JacobianPoint xi0n = xi0.neg();
    DegreeReport rep;
    rep.grid = grid;
    rep.excision_radius = excision_radius;

    auto excluded = [&](double x1, double x2) {
        auto p = normalize(x1, x2);
        return p.dist(xi0) < excision_radius || p.dist(xi0n) < excision_radius;
    };

    // abelian link phase between neighboring frames: arg det of the overlap
    auto link_phase = [&](const JacobianPoint& a, const JacobianPoint& b) {
        MatC g = gram(cache.at(a).basis, cache.at(b).basis);
        auto ev = eigenvalues(g);
        double ph = 0.0;
        for (auto z : ev)
            ph += std::arg(z);
        return ph;
    };

    // sum plaquette phases over the grid, skipping any plaquette touching an
    // excision disk; the local phases are O(1/grid^2), far from the branch cut
    double bulk = 0.0;
    const double hgrid = 1.0 / grid;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            double x = i * hgrid, y = j * hgrid;
            bool skip = false;
            for (int ci = 0; ci <= 1 && !skip; ++ci)
                for (int cj = 0; cj <= 1 && !skip; ++cj)
                    if (excluded(x + ci * hgrid, y + cj * hgrid))
                        skip = true;
            if (skip)
                continue;
            auto p00 = normalize(x, y);
            auto p10 = normalize(x + hgrid, y);
            auto p11 = normalize(x + hgrid, y + hgrid);
            auto p01 = normalize(x, y + hgrid);
            double ph = link_phase(p00, p10) + link_phase(p10, p11) + link_phase(p11, p01) +
                        link_phase(p01, p00);
            // wrap to (-pi, pi]
            ph = std::remainder(ph, 2.0 * M_PI);
            bulk += ph;
        }

    // winding of the frame determinant around each excision circle
    double boundary = 0.0;
    for (const auto& pc : {xi0, xi0n}) {
        double wind = 0.0;
        for (int t = 0; t < circle_points; ++t) {
            double a0 = 2.0 * M_PI * t / circle_points;
            double a1 = 2.0 * M_PI * (t + 1) / circle_points;
            auto p0 = normalize(pc.x1 + excision_radius * std::cos(a0),
                                pc.x2 + excision_radius * std::sin(a0));
            auto p1 = normalize(pc.x1 + excision_radius * std::cos(a1),
                                pc.x2 + excision_radius * std::sin(a1));
            wind += link_phase(p0, p1);
        }
        boundary += wind;
    }

    rep.bulk = bulk / (2.0 * M_PI);
    rep.boundary = boundary / (2.0 * M_PI);
    rep.estimate = rep.bulk + rep.boundary;
    rep.uncertainty = std::max(0.05, 4.0 / (grid * grid));
    return rep;
}

std::string higgs_csv_header(int k)
{
    std::ostringstream os;
    os << "xi1,xi2,dim";
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            os << ",re_phi_" << a << b << ",im_phi_" << a << b;
    os << ",hitchin_1,hitchin_2,fb_cross_err\n";
    return os.str();
}

std::string higgs_csv_row(const HiggsSample& s)
{
    std::ostringstream os;
    os << fmt_double(s.xi.x1) << "," << fmt_double(s.xi.x2) << "," << s.dim;
    for (int a = 0; a < s.Phi.rows; ++a)
        for (int b = 0; b < s.Phi.cols; ++b)
            os << "," << fmt_double(s.Phi.at(a, b).real()) << ","
               << fmt_double(s.Phi.at(a, b).imag());
    os << "," << fmt_double(s.hitchin_1) << "," << fmt_double(s.hitchin_2) << ","
       << fmt_double(s.fb_cross_err) << "\n";
    return os.str();
}

} // namespace nahmtx
