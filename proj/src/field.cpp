#include "nahmtx/field.hpp"

#include "nahmtx/errors.hpp"
#include "nahmtx/kern.hpp"

#include "json.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace nahmtx {

namespace {

// C^3 smoothstep: 0 below 0, 1 above 1
double smooth7(double t)
{
    if (t <= 0.0)
        return 0.0;
    if (t >= 1.0)
        return 1.0;
    double t4 = t * t * t * t;
    return t4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t);
}

double smooth7_d(double t)
{
    if (t <= 0.0 || t >= 1.0)
        return 0.0;
    double t3 = t * t * t;
    return t3 * (140.0 - 420.0 * t + 420.0 * t * t - 140.0 * t3);
}

double wrap_pm(double x) { return x - std::round(x); }

} // namespace

std::vector<double> torus_deriv_matrix(int ng)
{
    // D = F^-1 diag(2 pi i k) F on the ng-periodic unit-coordinate grid;
    // real and antisymmetric for the signed frequency convention
    std::vector<double> D(static_cast<std::size_t>(ng) * ng, 0.0);
    for (int a = 0; a < ng; ++a)
        for (int b = 0; b < ng; ++b) {
            double acc = 0.0;
            for (int k = 1; k <= ng / 2; ++k)
                acc += -4.0 * M_PI * k / ng * std::sin(2.0 * M_PI * k * (a - b) / ng);
            D[static_cast<std::size_t>(a) * ng + b] = acc;
        }
    return D;
}

double WindingMap::eta(double s) const
{
    double R0 = 0.5 * R;
    double s1 = p.s1_frac * R0, s2 = p.s2_frac * R0;
    return smooth7((s - s1) / (s2 - s1));
}

void WindingMap::eval(double x1, double x2, double y1, double y2, SU2q& g, Quat dg[4]) const
{
    g = SU2q::identity();
    for (int l = 0; l < 4; ++l)
        dg[l] = Quat{};
    double s = std::hypot(y1, y2);
    if (s < 1e-12)
        return; // theta undefined; only reached where eta = 0
    double theta = std::atan2(y2, y1);
    if (theta < 0)
        theta += 2.0 * M_PI;
    double u[3] = {wrap_pm(x1 - p.center_x1) / p.width_x, wrap_pm(x2 - p.center_x2) / p.width_x,
                   (theta - M_PI) / p.theta_width};
    double rho2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    if (rho2 >= 1.0)
        return;
    double rho = std::sqrt(rho2);

    // m(rho) = k pi S(1 - rho); g = cos m + i sin m (u_hat . sigma)
    double m = p.k * M_PI * smooth7(1.0 - rho);
    double dm = -p.k * M_PI * smooth7_d(1.0 - rho); // dm/drho
    double cm = std::cos(m), sm = std::sin(m);

    if (rho < 1e-14) {
        // center: g = cos(k pi) = +-1, derivatives vanish (m flat to 4th order)
        g = SU2q{cm, {0, 0, 0}};
        return;
    }
    double uh[3] = {u[0] / rho, u[1] / rho, u[2] / rho};
    g = SU2q{cm, {sm * uh[0], sm * uh[1], sm * uh[2]}};

    // dg/du_j = (-sm dm uh_j) + i sigma . (cm dm uh_j uh_i + sm (delta_ij - uh_i uh_j)/rho)
    Quat dg_du[3];
    for (int j = 0; j < 3; ++j) {
        dg_du[j].w = -sm * dm * uh[j];
        for (int i = 0; i < 3; ++i) {
            double t = cm * dm * uh[j] * uh[i];
            t += sm * ((i == j ? 1.0 : 0.0) - uh[i] * uh[j]) / rho;
            dg_du[j].v[i] = t;
        }
    }
    // chain to the coordinate legs
    double dth_dy1 = -y2 / (s * s), dth_dy2 = y1 / (s * s);
    dg[0] = dg_du[0] * (1.0 / p.width_x);
    dg[1] = dg_du[1] * (1.0 / p.width_x);
    dg[2] = dg_du[2] * (dth_dy1 / p.theta_width);
    dg[3] = dg_du[2] * (dth_dy2 / p.theta_width);
}

ConnectionField::ConnectionField(const FieldShape& s, const JacobianPoint& x0)
    : shape(s), xi0(x0), coef(static_cast<std::size_t>(4) * s.sites() * 3, 0.0)
{
}

ConnectionField synth_ansatz(const FieldShape& shape, int k_target, const JacobianPoint& xi0,
                             const BumpParams& bump)
{
    if (xi0.is_trivial)
        throw UnsupportedAsymptoticState("synth_ansatz: asymptotic state must be nontrivial");
    if (k_target < 0)
        throw InvalidParameter("synth_ansatz: k_target must be >= 0");
    ConnectionField f(shape, xi0);

    const Su2 gamma[2] = {{0, 0, -4.0 * M_PI * xi0.x1}, {0, 0, -4.0 * M_PI * xi0.x2}};
    const int ng = shape.ng();
    const int M = shape.M;

    // flat background on the torus legs
    for (int leg = 0; leg < 2; ++leg)
        for (std::size_t ts = 0; ts < shape.torus_sites(); ++ts)
            for (std::size_t ps = 0; ps < shape.plane_sites(); ++ps)
                f.set(leg, ts, ps, gamma[leg]);

    if (k_target == 0)
        return f;

    BumpParams wp = bump;
    wp.k = k_target;
    WindingMap wind{wp, shape.R};
    f.winding = wp;

    parallel_for(
        shape.torus_sites(),
        [&](std::size_t lo, std::size_t hi) {
            SU2q g;
            Quat dg[4];
            for (std::size_t ts = lo; ts < hi; ++ts) {
                int a = static_cast<int>(ts) % ng, b = static_cast<int>(ts) / ng;
                double x1 = static_cast<double>(a) / ng, x2 = static_cast<double>(b) / ng;
                for (int iy = 0; iy < M; ++iy)
                    for (int ix = 0; ix < M; ++ix) {
                        double y1 = shape.coord(ix), y2 = shape.coord(iy);
                        double et = wind.eta(std::hypot(y1, y2));
                        if (et <= 0.0)
                            continue;
                        wind.eval(x1, x2, y1, y2, g, dg);
                        SU2q gi = g.conj();
                        std::size_t ps = static_cast<std::size_t>(iy) * M + ix;
                        for (int leg = 0; leg < 4; ++leg) {
                            // beta = g^-1 dg + g^-1 Gamma g - Gamma
                            Su2 beta = (Quat::of(gi) * dg[leg]).to_su2();
                            if (leg < 2)
                                beta += gi.rotate(gamma[leg]) - gamma[leg];
                            f.set(leg, ts, ps, f.get(leg, ts, ps) + beta * et);
                        }
                    }
            }
        },
        worker_threads());
    return f;
}

namespace {

// orthonormal-frame legs (A_X, A_Y, A_y1, A_y2) as flat arrays [site*3]
struct OrthoLegs {
    std::vector<double> leg[4];
};

OrthoLegs ortho_legs(const ConnectionField& f)
{
    const double rt = f.shape.lat.tau.real(), it = f.shape.lat.tau.imag();
    OrthoLegs o;
    const std::size_t n3 = f.shape.sites() * 3;
    for (auto& l : o.leg)
        l.assign(n3, 0.0);
    const std::size_t stride = f.shape.plane_sites() * 3;
    for (std::size_t ts = 0; ts < f.shape.torus_sites(); ++ts)
        for (std::size_t i = 0; i < stride; ++i) {
            std::size_t site3 = ts * stride + i;
            double a1 = f.coef[0 * f.shape.sites() * 3 + site3];
            double a2 = f.coef[1 * f.shape.sites() * 3 + site3];
            o.leg[0][site3] = a1;
            o.leg[1][site3] = (a2 - rt * a1) / it;
            o.leg[2][site3] = f.coef[2 * f.shape.sites() * 3 + site3];
            o.leg[3][site3] = f.coef[3 * f.shape.sites() * 3 + site3];
        }
    return o;
}

// derivative of a [site][3] array along orthonormal direction dir
// (0=X, 1=Y, 2=y1, 3=y2)
void deriv_ortho(const FieldShape& shape, int dir, const std::vector<double>& src,
                 std::vector<double>& dst)
{
    const int ng = shape.ng();
    const int M = shape.M;
    const std::size_t pstride = shape.plane_sites() * 3;
    dst.assign(src.size(), 0.0);
    const std::vector<double> Dmat = torus_deriv_matrix(ng); // shared read-only below
    const double rt = shape.lat.tau.real(), it = shape.lat.tau.imag();

    if (dir <= 1) {
        // spectral along x^1 and/or x^2
        parallel_for(
            shape.torus_sites(),
            [&](std::size_t lo, std::size_t hi) {
                for (std::size_t ts = lo; ts < hi; ++ts) {
                    int a = static_cast<int>(ts) % ng, b = static_cast<int>(ts) / ng;
                    for (std::size_t i = 0; i < pstride; ++i) {
                        double d1 = 0.0, d2 = 0.0;
                        if (dir == 0 || rt != 0.0) {
                            for (int ap = 0; ap < ng; ++ap)
                                d1 += Dmat[static_cast<std::size_t>(a) * ng + ap] *
                                      src[(static_cast<std::size_t>(b) * ng + ap) * pstride + i];
                        }
                        if (dir == 1) {
                            for (int bp = 0; bp < ng; ++bp)
                                d2 += Dmat[static_cast<std::size_t>(b) * ng + bp] *
                                      src[(static_cast<std::size_t>(bp) * ng + a) * pstride + i];
                        }
                        dst[ts * pstride + i] = (dir == 0) ? d1 : (d2 - rt * d1) / it;
                    }
                }
            },
            worker_threads());
        return;
    }

    // centered plane differences; one-sided second order at the window edge
    const double h = shape.h();
    parallel_for(
        shape.torus_sites(),
        [&](std::size_t lo, std::size_t hi) {
            for (std::size_t ts = lo; ts < hi; ++ts) {
                const double* s = src.data() + ts * pstride;
                double* d = dst.data() + ts * pstride;
                auto at = [&](int ix, int iy, int c) {
                    return s[(static_cast<std::size_t>(iy) * M + ix) * 3 + c];
                };
                for (int iy = 0; iy < M; ++iy)
                    for (int ix = 0; ix < M; ++ix)
                        for (int c = 0; c < 3; ++c) {
                            double v;
                            if (dir == 2) {
                                if (ix == 0)
                                    v = (-3 * at(0, iy, c) + 4 * at(1, iy, c) - at(2, iy, c));
                                else if (ix == M - 1)
                                    v = (3 * at(M - 1, iy, c) - 4 * at(M - 2, iy, c) +
                                         at(M - 3, iy, c));
                                else
                                    v = at(ix + 1, iy, c) - at(ix - 1, iy, c);
                            } else {
                                if (iy == 0)
                                    v = (-3 * at(ix, 0, c) + 4 * at(ix, 1, c) - at(ix, 2, c));
                                else if (iy == M - 1)
                                    v = (3 * at(ix, M - 1, c) - 4 * at(ix, M - 2, c) +
                                         at(ix, M - 3, c));
                                else
                                    v = at(ix, iy + 1, c) - at(ix, iy - 1, c);
                            }
                            d[(static_cast<std::size_t>(iy) * M + ix) * 3 + c] = v / (2.0 * h);
                        }
            }
        },
        worker_threads());
}

constexpr int kPairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

} // namespace

CurvatureField curvature(const ConnectionField& f)
{
    CurvatureField out;
    out.shape = f.shape;
    const std::size_t n3 = f.shape.sites() * 3;
    out.comp.assign(6 * n3, 0.0);
    OrthoLegs o = ortho_legs(f);
    std::vector<double> dmu, dnu;
    for (int pr = 0; pr < 6; ++pr) {
        int mu = kPairs[pr][0], nu = kPairs[pr][1];
        deriv_ortho(f.shape, mu, o.leg[nu], dmu);
        deriv_ortho(f.shape, nu, o.leg[mu], dnu);
        double* dst = out.comp.data() + static_cast<std::size_t>(pr) * n3;
        for (std::size_t s = 0; s < f.shape.sites(); ++s) {
            const double* am = o.leg[mu].data() + s * 3;
            const double* an = o.leg[nu].data() + s * 3;
            Su2 cr = bracket({am[0], am[1], am[2]}, {an[0], an[1], an[2]});
            for (int c = 0; c < 3; ++c)
                dst[s * 3 + c] = dmu[s * 3 + c] - dnu[s * 3 + c] + cr.c[c];
        }
    }
    out.dens_sd.assign(f.shape.sites(), 0.0);
    out.dens_asd.assign(f.shape.sites(), 0.0);
    out.trff.assign(f.shape.sites(), 0.0);
    const double* C = out.comp.data();
    for (std::size_t s = 0; s < f.shape.sites(); ++s) {
        double sd = 0.0, asd = 0.0, tr = 0.0;
        // (pair, partner, relative sign): SD combos (XY + y1y2)/2,
        // (Xy1 - Yy2)/2, (Xy2 + Yy1)/2
        const int combos[3][3] = {{0, 5, +1}, {1, 4, -1}, {2, 3, +1}};
        for (auto& cb : combos) {
            const double* A = C + static_cast<std::size_t>(cb[0]) * n3 + s * 3;
            const double* B = C + static_cast<std::size_t>(cb[1]) * n3 + s * 3;
            for (int c = 0; c < 3; ++c) {
                double plus = 0.5 * (A[c] + cb[2] * B[c]);
                double minus = 0.5 * (A[c] - cb[2] * B[c]);
                sd += plus * plus;
                asd += minus * minus;
                tr += -cb[2] * A[c] * B[c];
            }
        }
        out.dens_sd[s] = sd;
        out.dens_asd[s] = asd;
        out.trff[s] = tr;
    }
    return out;
}

ChargeReport charge_report(const ConnectionField& f)
{
    CurvatureField F = curvature(f);
    const double w = f.shape.vol_weight();
    ChargeReport rep;
    double sd = 0.0;
    for (std::size_t s = 0; s < f.shape.sites(); ++s) {
        rep.charge += F.trff[s];
        rep.energy += F.dens_sd[s] + F.dens_asd[s];
        sd += F.dens_sd[s];
    }
    rep.charge *= w / (8.0 * M_PI * M_PI);
    rep.energy *= w / (8.0 * M_PI * M_PI);
    rep.eps_asd = std::sqrt(sd * w);
    return rep;
}

namespace {

// ||f+||^2 and its gradient with respect to the stored legs
double asd_energy_grad(const ConnectionField& f, std::vector<double>* grad)
{
    const FieldShape& shape = f.shape;
    const std::size_t n3 = shape.sites() * 3;
    const double w = shape.vol_weight();
    OrthoLegs o = ortho_legs(f);

    double energy = 0.0;
    std::vector<double> gleg[4];
    if (grad)
        for (auto& g : gleg)
            g.assign(n3, 0.0);

    std::vector<double> dmu, dnu, G(n3), tmp;
    // curvature components kept per pair to form the SD projections
    std::vector<double> comp[6];
    for (int pr = 0; pr < 6; ++pr) {
        int mu = kPairs[pr][0], nu = kPairs[pr][1];
        deriv_ortho(shape, mu, o.leg[nu], dmu);
        deriv_ortho(shape, nu, o.leg[mu], dnu);
        comp[pr].resize(n3);
        for (std::size_t s = 0; s < shape.sites(); ++s) {
            const double* am = o.leg[mu].data() + s * 3;
            const double* an = o.leg[nu].data() + s * 3;
            Su2 cr = bracket({am[0], am[1], am[2]}, {an[0], an[1], an[2]});
            for (int c = 0; c < 3; ++c)
                comp[pr][s * 3 + c] = dmu[s * 3 + c] - dnu[s * 3 + c] + cr.c[c];
        }
    }
    const int combos[3][3] = {{0, 5, +1}, {1, 4, -1}, {2, 3, +1}};
    std::vector<double> Gpair[6];
    for (auto& g : Gpair)
        g.assign(n3, 0.0);
    for (auto& cb : combos) {
        for (std::size_t i = 0; i < n3; ++i) {
            double plus = 0.5 * (comp[cb[0]][i] + cb[2] * comp[cb[1]][i]);
            energy += w * plus * plus;
            Gpair[cb[0]][i] += w * plus;
            Gpair[cb[1]][i] += w * cb[2] * plus;
        }
    }
    if (!grad)
        return energy;

    // backpropagate: grad A_nu += -d_mu G + G x A_mu; grad A_mu += d_nu G + A_nu x G
    std::vector<double> gortho[4];
    for (auto& g : gortho)
        g.assign(n3, 0.0);
    for (int pr = 0; pr < 6; ++pr) {
        int mu = kPairs[pr][0], nu = kPairs[pr][1];
        deriv_ortho(shape, mu, Gpair[pr], tmp);
        for (std::size_t i = 0; i < n3; ++i)
            gortho[nu][i] -= tmp[i];
        deriv_ortho(shape, nu, Gpair[pr], tmp);
        for (std::size_t i = 0; i < n3; ++i)
            gortho[mu][i] += tmp[i];
        for (std::size_t s = 0; s < shape.sites(); ++s) {
            const double* am = o.leg[mu].data() + s * 3;
            const double* an = o.leg[nu].data() + s * 3;
            const double* g = Gpair[pr].data() + s * 3;
            Su2 gx_amu = bracket({g[0], g[1], g[2]}, {am[0], am[1], am[2]});
            Su2 anu_xg = bracket({an[0], an[1], an[2]}, {g[0], g[1], g[2]});
            for (int c = 0; c < 3; ++c) {
                gortho[nu][s * 3 + c] += gx_amu.c[c];
                gortho[mu][s * 3 + c] += anu_xg.c[c];
            }
        }
    }
    // orthonormal legs -> stored legs (transpose of the forward map)
    const double rt = shape.lat.tau.real(), it = shape.lat.tau.imag();
    for (std::size_t i = 0; i < n3; ++i) {
        gleg[0][i] = gortho[0][i] - (rt / it) * gortho[1][i];
        gleg[1][i] = gortho[1][i] / it;
        gleg[2][i] = gortho[2][i];
        gleg[3][i] = gortho[3][i];
    }
    grad->assign(4 * n3, 0.0);
    for (int leg = 0; leg < 4; ++leg)
        std::copy(gleg[leg].begin(), gleg[leg].end(), grad->begin() + leg * n3);
    return energy;
}

} // namespace

RelaxResult asd_relax(const ConnectionField& f0, int max_steps, double step_size)
{
    RelaxResult res{f0, {}};
    ConnectionField& f = res.field;
    const FieldShape& shape = f.shape;
    const std::size_t n3 = shape.sites() * 3;

    // interior mask: update only strictly inside the freeze radius
    std::vector<double> mask(shape.plane_sites(), 0.0);
    for (int iy = 0; iy < shape.M; ++iy)
        for (int ix = 0; ix < shape.M; ++ix) {
            double s = std::hypot(shape.coord(ix), shape.coord(iy));
            mask[static_cast<std::size_t>(iy) * shape.M + ix] = s < f.freeze_radius() ? 1.0 : 0.0;
        }

    auto apply_mask = [&](std::vector<double>& g) {
        for (int leg = 0; leg < 4; ++leg)
            for (std::size_t ts = 0; ts < shape.torus_sites(); ++ts)
                for (std::size_t ps = 0; ps < shape.plane_sites(); ++ps)
                    if (mask[ps] == 0.0) {
                        std::size_t gi =
                            static_cast<std::size_t>(leg) * n3 + (ts * shape.plane_sites() + ps) * 3;
                        g[gi] = g[gi + 1] = g[gi + 2] = 0.0;
                    }
    };

    // SPD smoothing of a direction field: drop the outermost torus mode shell
    // (its spectral derivative is aliasing-ambiguous and admits phantom
    // descent directions) and binomially smooth the plane directions
    const int ng = shape.ng();
    std::vector<double> proj(static_cast<std::size_t>(ng) * ng, 0.0);
    for (int a = 0; a < ng; ++a)
        for (int b = 0; b < ng; ++b) {
            double acc = 0.0;
            for (int k = -(shape.N - 1); k <= shape.N - 1; ++k)
                acc += std::cos(2.0 * M_PI * k * (a - b) / ng) / ng;
            proj[static_cast<std::size_t>(a) * ng + b] = acc;
        }
    const std::size_t pstride = shape.plane_sites() * 3;
    std::vector<double> snap;
    auto smooth_dir = [&](std::vector<double>& g) {
        const int M = shape.M;
        for (int leg = 0; leg < 4; ++leg) {
            double* base = g.data() + static_cast<std::size_t>(leg) * n3;
            // torus shell cut, both axes
            snap.assign(n3, 0.0);
            for (int b = 0; b < ng; ++b)
                for (int a = 0; a < ng; ++a)
                    for (int ap = 0; ap < ng; ++ap)
                        kern::daxpy(pstride, proj[static_cast<std::size_t>(a) * ng + ap],
                                    base + (static_cast<std::size_t>(b) * ng + ap) * pstride,
                                    snap.data() + (static_cast<std::size_t>(b) * ng + a) * pstride);
            std::fill(base, base + n3, 0.0);
            for (int b = 0; b < ng; ++b)
                for (int a = 0; a < ng; ++a)
                    for (int bp = 0; bp < ng; ++bp)
                        kern::daxpy(pstride, proj[static_cast<std::size_t>(b) * ng + bp],
                                    snap.data() + (static_cast<std::size_t>(bp) * ng + a) * pstride,
                                    base + (static_cast<std::size_t>(b) * ng + a) * pstride);
            // plane binomial smoothing [1 2 1]/4 per axis
            for (std::size_t ts = 0; ts < shape.torus_sites(); ++ts) {
                double* blk = base + ts * pstride;
                for (int iy = 0; iy < M; ++iy)
                    for (int c = 0; c < 3; ++c) {
                        double prev = 0.0;
                        for (int ix = 0; ix < M; ++ix) {
                            std::size_t i = (static_cast<std::size_t>(iy) * M + ix) * 3 + c;
                            double nxt = ix + 1 < M ? blk[(static_cast<std::size_t>(iy) * M + ix + 1) * 3 + c] : 0.0;
                            double cur = blk[i];
                            blk[i] = 0.25 * prev + 0.5 * cur + 0.25 * nxt;
                            prev = cur;
                        }
                    }
                for (int ix = 0; ix < M; ++ix)
                    for (int c = 0; c < 3; ++c) {
                        double prev = 0.0;
                        for (int iy = 0; iy < M; ++iy) {
                            std::size_t i = (static_cast<std::size_t>(iy) * M + ix) * 3 + c;
                            double nxt = iy + 1 < M ? blk[(static_cast<std::size_t>(iy + 1) * M + ix) * 3 + c] : 0.0;
                            double cur = blk[i];
                            blk[i] = 0.25 * prev + 0.5 * cur + 0.25 * nxt;
                            prev = cur;
                        }
                    }
            }
        }
    };
    auto shifted = [&](const ConnectionField& base, const std::vector<double>& d, double t) {
        ConnectionField out = base;
        kern::daxpy(out.coef.size(), t, d.data(), out.coef.data());
        return out;
    };

    // L-BFGS on the masked functional, with the smoothing operator as the
    // initial inverse-Hessian metric. Plain and conjugate descent are far too
    // slow for these stiff shell configurations.
    const int hist = 12;
    std::vector<std::vector<double>> sv, yv;
    std::vector<double> rho_h;

    std::vector<double> grad, grad_prev, dir, q;
    double E = asd_energy_grad(f, &grad);
    apply_mask(grad);
    res.info.eps_initial = std::sqrt(E);
    double step = step_size > 0 ? step_size : 1e-5;
    int consecutive_fails = 0;

    for (int it = 0; it < max_steps;) {
        double g2 = kern::ddot(grad.size(), grad.data(), grad.data());
        if (E < 1e-24 || g2 < 1e-26 * (1.0 + E))
            break; // critical point

        // two-loop recursion; H0 = gamma * smoothing
        q = grad;
        std::vector<double> alpha(sv.size());
        for (int i = static_cast<int>(sv.size()) - 1; i >= 0; --i) {
            alpha[i] = rho_h[i] * kern::ddot(q.size(), sv[i].data(), q.data());
            kern::daxpy(q.size(), -alpha[i], yv[i].data(), q.data());
        }
        smooth_dir(q);
        apply_mask(q);
        if (!sv.empty()) {
            double sy = 1.0 / rho_h.back();
            double yy = kern::ddot(yv.back().size(), yv.back().data(), yv.back().data());
            if (yy > 0.0) {
                double gamma = sy / yy;
                for (auto& v : q)
                    v *= gamma;
            }
        }
        for (std::size_t i = 0; i < sv.size(); ++i) {
            double beta = rho_h[i] * kern::ddot(q.size(), yv[i].data(), q.data());
            kern::daxpy(q.size(), alpha[i] - beta, sv[i].data(), q.data());
        }
        dir.assign(q.size(), 0.0);
        kern::daxpy(dir.size(), -1.0, q.data(), dir.data());

        double slope = kern::ddot(grad.size(), grad.data(), dir.data());
        if (slope >= 0.0) { // reset the memory on a non-descent direction
            sv.clear();
            yv.clear();
            rho_h.clear();
            dir = grad;
            smooth_dir(dir);
            apply_mask(dir);
            for (auto& v : dir)
                v = -v;
            slope = kern::ddot(grad.size(), grad.data(), dir.data());
        }

        double t = sv.empty() ? step : 1.0; // natural L-BFGS step once warmed up
        ConnectionField trial = shifted(f, dir, t);
        double Et = asd_energy_grad(trial, nullptr);
        double denom = Et - E - slope * t;
        if (denom > 0.0) {
            double t2 = std::clamp(-0.5 * slope * t * t / denom, 0.05 * t, 4.0 * t);
            ConnectionField trial2 = shifted(f, dir, t2);
            double Et2 = asd_energy_grad(trial2, nullptr);
            if (Et2 < Et) {
                trial.coef.swap(trial2.coef);
                Et = Et2;
                t = t2;
            }
        }
        if (Et < E) {
            grad_prev.swap(grad);
            f.coef.swap(trial.coef);
            E = Et;
            ++it;
            ++res.info.steps_accepted;
            consecutive_fails = 0;
            asd_energy_grad(f, &grad);
            apply_mask(grad);
            // curvature pair (s, y)
            std::vector<double> snew(dir.size()), ynew(dir.size());
            for (std::size_t i = 0; i < dir.size(); ++i) {
                snew[i] = t * dir[i];
                ynew[i] = grad[i] - grad_prev[i];
            }
            double sy = kern::ddot(snew.size(), snew.data(), ynew.data());
            if (sy > 1e-14) {
                sv.push_back(std::move(snew));
                yv.push_back(std::move(ynew));
                rho_h.push_back(1.0 / sy);
                if (static_cast<int>(sv.size()) > hist) {
                    sv.erase(sv.begin());
                    yv.erase(yv.begin());
                    rho_h.erase(rho_h.begin());
                }
            }
            if (sv.empty())
                step = std::min(t * 1.5, 1.0);
        } else {
            ++res.info.steps_rejected;
            if (++consecutive_fails >= 10) {
                res.info.stalled = res.info.steps_accepted == 0 ||
                                   std::sqrt(E) > 0.999 * res.info.eps_initial;
                break;
            }
            // shrink and drop the memory; resume from smoothed descent
            sv.clear();
            yv.clear();
            rho_h.clear();
            step = std::max(0.25 * step, 1e-12);
        }
    }
    res.info.eps_final = std::sqrt(E);
    f.relax_info = res.info;
    return res;
}

AsymptoticReport asymptotic_state(const ConnectionField& f)
{
    const FieldShape& shape = f.shape;
    AsymptoticReport rep;
    rep.used_winding = f.winding.has_value();
    WindingMap wind;
    if (f.winding) {
        wind.p = *f.winding;
        wind.R = shape.R;
    }
    const int ng = shape.ng(), M = shape.M;
    // fit over the frozen outer ring, where synthesized and relaxed fields
    // agree exactly with the generator output
    const double r_lo = shape.R - 2.8 * shape.h(), r_hi = 1.45 * shape.R;

    // mean of the (unwound) connection over the boundary annulus
    Su2 mean[4];
    std::size_t count = 0;
    std::vector<Su2> samples[4];
    for (std::size_t ts = 0; ts < shape.torus_sites(); ++ts) {
        int a = static_cast<int>(ts) % ng, b = static_cast<int>(ts) / ng;
        double x1 = static_cast<double>(a) / ng, x2 = static_cast<double>(b) / ng;
        for (int iy = 0; iy < M; ++iy)
            for (int ix = 0; ix < M; ++ix) {
                double y1 = shape.coord(ix), y2 = shape.coord(iy);
                double s = std::hypot(y1, y2);
                if (s < r_lo || s > r_hi)
                    continue;
                std::size_t ps = static_cast<std::size_t>(iy) * M + ix;
                SU2q g;
                Quat dg[4];
                if (f.winding)
                    wind.eval(x1, x2, y1, y2, g, dg);
                for (int leg = 0; leg < 4; ++leg) {
                    Su2 A = f.get(leg, ts, ps);
                    if (f.winding) {
                        // unwind: A_check = g A g^-1 - (dg) g^-1
                        Su2 rot = g.rotate(A);
                        Su2 dgg = (dg[leg] * Quat::of(g.conj())).to_su2();
                        A = rot - dgg;
                    }
                    mean[leg] += A;
                    samples[leg].push_back(A);
                }
                ++count;
            }
    }
    if (count == 0)
        throw AsymptoticExtractionFailed("asymptotic_state: no annulus sites");
    for (auto& mleg : mean)
        mleg = mleg * (1.0 / static_cast<double>(count));

    double dev = 0.0;
    for (int leg = 0; leg < 4; ++leg)
        for (const auto& aa : samples[leg])
            dev = std::max(dev, std::sqrt((aa - mean[leg]).normsq()));
    rep.flat_residual = dev;

    // plane legs of a product flat connection vanish
    double scale = std::sqrt(mean[0].normsq() + mean[1].normsq()) + 1.0;
    if (dev > 0.05 * scale || std::sqrt(mean[2].normsq() + mean[3].normsq()) > 0.05 * scale)
        throw AsymptoticExtractionFailed("asymptotic_state: end region is not constant-flat");

    // commuting pair: common axis, signed eigenvalues give the character
    const Su2& g1 = mean[0];
    const Su2& g2 = mean[1];
    double n1 = std::sqrt(g1.normsq()), n2 = std::sqrt(g2.normsq());
    double axis[3];
    if (n1 < 1e-9 && n2 < 1e-9) {
        rep.xi_estimate = normalize(0, 0); // trivial end
    } else {
        const Su2& big = n1 >= n2 ? g1 : g2;
        double nb = std::max(n1, n2);
        for (int c = 0; c < 3; ++c)
            axis[c] = big.c[c] / nb;
        if (std::sqrt(bracket(g1, g2).normsq()) > 0.02 * (n1 + n2) * (n1 + n2))
            throw AsymptoticExtractionFailed("asymptotic_state: end holonomies do not commute");
        double mu1 = (g1.c[0] * axis[0] + g1.c[1] * axis[1] + g1.c[2] * axis[2]) / (4.0 * M_PI);
        double mu2 = (g2.c[0] * axis[0] + g2.c[1] * axis[1] + g2.c[2] * axis[2]) / (4.0 * M_PI);
        auto cand = normalize(-mu1, -mu2);
        auto neg = cand.neg();
        bool pick = (cand.x1 < neg.x1) || (cand.x1 == neg.x1 && cand.x2 <= neg.x2);
        rep.xi_estimate = pick ? cand : neg;
    }

    // decay monitor sup s |alpha| / log s against the fitted constant
    double decay = 0.0;
    std::size_t k = 0;
    for (std::size_t ts = 0; ts < shape.torus_sites(); ++ts)
        for (int iy = 0; iy < M; ++iy)
            for (int ix = 0; ix < M; ++ix) {
                double s = std::hypot(shape.coord(ix), shape.coord(iy));
                if (s < r_lo || s > r_hi)
                    continue;
                double a2 = 0.0;
                for (int leg = 0; leg < 4; ++leg)
                    a2 += (samples[leg][k] - mean[leg]).normsq();
                decay = std::max(decay, s * std::sqrt(a2) / std::log(2.0 + s));
                ++k;
            }
    rep.decay_sup = decay;
    return rep;
}

void GaugeBump::eval(double x1, double x2, double y1, double y2, double R, SU2q& g,
                     Quat dg[4]) const
{
    double r0 = radius > 0 ? radius : 0.45 * R;
    double s = std::hypot(y1, y2);
    g = SU2q::identity();
    for (int l = 0; l < 4; ++l)
        dg[l] = Quat{};
    if (s >= r0)
        return;
    // fixed axis from the seed
    double ax[3] = {std::cos(1.7 * (seed + 1)), std::sin(2.3 * (seed + 1)), 0.81};
    double an = std::sqrt(ax[0] * ax[0] + ax[1] * ax[1] + ax[2] * ax[2]);
    for (auto& a : ax)
        a /= an;
    double chi = smooth7(1.0 - s / r0);
    double osc = 0.5 + 0.5 * std::sin(2.0 * M_PI * (nx1 * x1 + nx2 * x2));
    double psi = amp * chi * osc;
    g = SU2q::exp_iv({psi * ax[0], psi * ax[1], psi * ax[2]});

    // d/dpsi exp(i psi a.sigma) = -sin psi + i cos psi (a.sigma)
    Quat dpsi{-std::sin(psi), {std::cos(psi) * ax[0], std::cos(psi) * ax[1], std::cos(psi) * ax[2]}};
    double dchi = s > 1e-12 ? -smooth7_d(1.0 - s / r0) / r0 : 0.0;
    double dosc = M_PI * std::cos(2.0 * M_PI * (nx1 * x1 + nx2 * x2));
    double dpsi_leg[4] = {amp * chi * dosc * 2.0 * nx1, amp * chi * dosc * 2.0 * nx2,
                          s > 1e-12 ? amp * dchi * osc * (y1 / s) : 0.0,
                          s > 1e-12 ? amp * dchi * osc * (y2 / s) : 0.0};
    for (int l = 0; l < 4; ++l)
        dg[l] = dpsi * dpsi_leg[l];
}

ConnectionField apply_gauge(const ConnectionField& f, const GaugeBump& bump)
{
    ConnectionField out = f;
    const int ng = f.shape.ng(), M = f.shape.M;
    parallel_for(
        f.shape.torus_sites(),
        [&](std::size_t lo, std::size_t hi) {
            SU2q g;
            Quat dg[4];
            for (std::size_t ts = lo; ts < hi; ++ts) {
                int a = static_cast<int>(ts) % ng, b = static_cast<int>(ts) / ng;
                double x1 = static_cast<double>(a) / ng, x2 = static_cast<double>(b) / ng;
                for (int iy = 0; iy < M; ++iy)
                    for (int ix = 0; ix < M; ++ix) {
                        bump.eval(x1, x2, f.shape.coord(ix), f.shape.coord(iy), f.shape.R, g, dg);
                        std::size_t ps = static_cast<std::size_t>(iy) * M + ix;
                        for (int leg = 0; leg < 4; ++leg) {
                            // A' = g A g^-1 - (dg) g^-1
                            Su2 A = f.get(leg, ts, ps);
                            Su2 rot = g.rotate(A);
                            Su2 dgg = (dg[leg] * Quat::of(g.conj())).to_su2();
                            out.set(leg, ts, ps, rot - dgg);
                        }
                    }
            }
        },
        worker_threads());
    return out;
}

void save_ntf1(const ConnectionField& f, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw MissingArtifact("save_ntf1: cannot open " + path);
    const char magic[4] = {'N', 'T', 'F', '1'};
    out.write(magic, 4);
    auto w32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto w64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    w32(1);
    w32(2);
    w32(static_cast<std::uint32_t>(f.shape.ng()));
    w32(static_cast<std::uint32_t>(f.shape.M));
    w64(f.shape.R);
    w64(f.shape.lat.tau.real());
    w64(f.shape.lat.tau.imag());
    w64(f.xi0.x1);
    w64(f.xi0.x2);
    // site-major (torus site then plane site), component-minor (4 legs),
    // 3 reals per su(2) slot
    for (std::size_t ts = 0; ts < f.shape.torus_sites(); ++ts)
        for (std::size_t ps = 0; ps < f.shape.plane_sites(); ++ps)
            for (int leg = 0; leg < 4; ++leg) {
                Su2 v = f.get(leg, ts, ps);
                out.write(reinterpret_cast<const char*>(v.c.data()), 24);
            }
    if (f.winding || f.relax_info.steps_accepted > 0) {
        nlohmann::json meta;
        if (f.winding) {
            meta["winding"] = {{"k", f.winding->k},
                               {"center_x1", f.winding->center_x1},
                               {"center_x2", f.winding->center_x2},
                               {"width_x", f.winding->width_x},
                               {"theta_width", f.winding->theta_width},
                               {"s1_frac", f.winding->s1_frac},
                               {"s2_frac", f.winding->s2_frac}};
        }
        meta["relax"] = {{"steps_accepted", f.relax_info.steps_accepted},
                         {"steps_rejected", f.relax_info.steps_rejected},
                         {"eps_initial", f.relax_info.eps_initial},
                         {"eps_final", f.relax_info.eps_final},
                         {"stalled", f.relax_info.stalled}};
        write_file(path + ".meta.json", meta.dump(2) + "\n");
    }
}

ConnectionField load_ntf1(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw MissingArtifact("load_ntf1: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "NTF1", 4) != 0)
        throw ConfigError("load_ntf1: bad magic");
    auto r32 = [&]() {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto r64 = [&]() {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    std::uint32_t version = r32(), rank = r32(), ng = r32(), M = r32();
    if (version != 1 || rank != 2)
        throw ConfigError("load_ntf1: unsupported version or rank");
    if (ng % 2 == 0 || ng < 3)
        throw ConfigError("load_ntf1: torus grid must be odd and >= 3");
    FieldShape shape;
    shape.R = r64();
    double tre = r64(), tim = r64();
    shape.lat = TorusLattice{cplx(tre, tim)};
    shape.N = (static_cast<int>(ng) - 1) / 2;
    shape.M = static_cast<int>(M);
    double x1 = r64(), x2 = r64();
    ConnectionField f(shape, normalize(x1, x2));
    for (std::size_t ts = 0; ts < f.shape.torus_sites(); ++ts)
        for (std::size_t ps = 0; ps < f.shape.plane_sites(); ++ps)
            for (int leg = 0; leg < 4; ++leg) {
                Su2 v;
                in.read(reinterpret_cast<char*>(v.c.data()), 24);
                f.set(leg, ts, ps, v);
            }
    if (!in)
        throw ConfigError("load_ntf1: truncated file");

    std::ifstream meta(path + ".meta.json");
    if (meta) {
        nlohmann::json j;
        meta >> j;
        if (j.contains("winding")) {
            BumpParams b;
            b.k = j["winding"]["k"];
            b.center_x1 = j["winding"]["center_x1"];
            b.center_x2 = j["winding"]["center_x2"];
            b.width_x = j["winding"]["width_x"];
            b.theta_width = j["winding"]["theta_width"];
            b.s1_frac = j["winding"]["s1_frac"];
            b.s2_frac = j["winding"]["s2_frac"];
            f.winding = b;
        }
        if (j.contains("relax")) {
            f.relax_info.steps_accepted = j["relax"]["steps_accepted"];
            f.relax_info.steps_rejected = j["relax"]["steps_rejected"];
            f.relax_info.eps_initial = j["relax"]["eps_initial"];
            f.relax_info.eps_final = j["relax"]["eps_final"];
            f.relax_info.stalled = j["relax"]["stalled"];
        }
    }
    return f;
}

} // namespace nahmtx
