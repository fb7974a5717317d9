#pragma once

#include "nahmtx/geometry.hpp"
#include "nahmtx/su2.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nahmtx {

// Discretization of T^2 x (truncated plane) for connection fields: a
// (2N+1)^2 periodic torus grid (lattice coordinates x1, x2 in [0,1)) crossed
// with the M x M plane window of half-width R.
struct FieldShape {
    TorusLattice lat;
    int N = 0;
    double R = 0.0;
    int M = 0;

    int ng() const { return 2 * N + 1; }
    std::size_t torus_sites() const { return static_cast<std::size_t>(ng()) * ng(); }
    std::size_t plane_sites() const { return static_cast<std::size_t>(M) * M; }
    std::size_t sites() const { return torus_sites() * plane_sites(); }
    double h() const { return 2.0 * R / M; }
    double coord(int i) const { return -R + i * h(); }
    // quadrature weight of one site
    double vol_weight() const { return lat.area() / static_cast<double>(torus_sites()) * h() * h(); }

    bool operator==(const FieldShape& o) const
    {
        return lat.tau == o.lat.tau && N == o.N && R == o.R && M == o.M;
    }
};

// Shell-and-ball parameters of the charge-carrying end winding. The winding
// map g(x1, x2, theta) is a degree-k bump supported in a ball of the
// 3-manifold T^2 x S^1_theta; the connection interpolates between the
// constant flat Gamma_{xi0} (inside radius s1) and its g-gauge transform
// (outside s2), so all curvature lives on the shell s1 < |w| < s2.
struct BumpParams {
    int k = 1;
    double center_x1 = 0.5;
    double center_x2 = 0.5;
    double width_x = 0.48;       // ball semi-axis in each torus direction
    double theta_width = 2.5133; // ~0.8 pi, ball semi-axis in theta
    double s1_frac = 0.30;       // shell start, fraction of R0 = R/2
    double s2_frac = 0.85;       // shell end, fraction of R0
};

struct RelaxInfo {
    int steps_accepted = 0;
    int steps_rejected = 0;
    double eps_initial = 0.0;
    double eps_final = 0.0;
    bool stalled = false;
};

// Analytic winding map evaluator shared by the generator, the asymptotic
// unwinding and the end-conjugated flat solves.
struct WindingMap {
    BumpParams p;
    double R = 0.0;

    // g at (x1, x2, w); legs ordered (d/dx^1, d/dx^2, d/dy1, d/dy2)
    void eval(double x1, double x2, double y1, double y2, SU2q& g, Quat dg[4]) const;
    double eta(double s) const;       // shell interpolation profile
};

// su(2)-valued connection on the field grid. Legs are stored against the
// coordinate coframe (dx^1, dx^2, dy1, dy2) where dx^j are dual to the
// lattice vectors; su(2) slots are 3 real coefficients each.
struct ConnectionField {
    FieldShape shape;
    JacobianPoint xi0;
    std::vector<double> coef; // [leg][torus site][plane site][3]
    std::optional<BumpParams> winding; // analytic end-gauge data when synthesized
    RelaxInfo relax_info;

    ConnectionField() = default;
    ConnectionField(const FieldShape& s, const JacobianPoint& x0);

    // Relaxation updates sites strictly inside this radius. Only a thin
    // outer ring is pinned: it fixes the topological sector and keeps the
    // asymptotic state exact, while letting the flow absorb the spurious
    // discrete self-dual energy that the under-resolved end winding carries
    // on any coarse torus grid.
    double freeze_radius() const { return shape.R - 3.0 * shape.h(); }

    std::size_t idx(int leg, std::size_t ts, std::size_t ps) const
    {
        return ((static_cast<std::size_t>(leg) * shape.torus_sites() + ts) * shape.plane_sites() +
                ps) *
               3;
    }
    Su2 get(int leg, std::size_t ts, std::size_t ps) const
    {
        std::size_t i = idx(leg, ts, ps);
        return {coef[i], coef[i + 1], coef[i + 2]};
    }
    void set(int leg, std::size_t ts, std::size_t ps, const Su2& v)
    {
        std::size_t i = idx(leg, ts, ps);
        coef[i] = v.c[0];
        coef[i + 1] = v.c[1];
        coef[i + 2] = v.c[2];
    }
};

// Curvature components in the orthonormal frame (X, Y, y1, y2); pair order
// XY, Xy1, Xy2, Yy1, Yy2, y1y2.
struct CurvatureField {
    FieldShape shape;
    std::vector<double> comp;     // [6][site][3]
    std::vector<double> dens_sd;  // |f+|^2 per site (self-dual coefficient norm)
    std::vector<double> dens_asd; // |f-|^2 per site
    std::vector<double> trff;     // Tr(F^F) density, computed from components

    Su2 get(int pair, std::size_t site) const
    {
        std::size_t i = (static_cast<std::size_t>(pair) * shape.sites() + site) * 3;
        return {comp[i], comp[i + 1], comp[i + 2]};
    }
};

struct ChargeReport {
    double charge = 0.0;   // (1/8pi^2) integral Tr(F ^ F)
    double energy = 0.0;   // (1/8pi^2) integral (|f-|^2 + |f+|^2)
    double eps_asd = 0.0;  // sqrt(integral |f+|^2)
};

struct AsymptoticReport {
    JacobianPoint xi_estimate;
    double flat_residual = 0.0; // sup deviation of the (unwound) end from constant
    double decay_sup = 0.0;     // sup over annulus of s |alpha(s)| / log(s+2)
    bool used_winding = false;
};

// Interior-supported analytic SU(2) gauge bump exp(amp chi(|w|) n(x).i sigma).
struct GaugeBump {
    double amp = 0.6;
    double radius = 0.0;   // support radius in the plane (defaults to 0.45 R)
    double nx1 = 1.0, nx2 = 2.0; // torus phase twists of the axis direction
    unsigned seed = 1;

    void eval(double x1, double x2, double y1, double y2, double R, SU2q& g, Quat dg[4]) const;
};

ConnectionField synth_ansatz(const FieldShape& shape, int k_target, const JacobianPoint& xi0,
                             const BumpParams& bump = {});

CurvatureField curvature(const ConnectionField& f);

ChargeReport charge_report(const ConnectionField& f);
inline double charge(const ConnectionField& f) { return charge_report(f).charge; }

struct RelaxResult {
    ConnectionField field;
    RelaxInfo info;
};

RelaxResult asd_relax(const ConnectionField& f, int max_steps, double step_size);

AsymptoticReport asymptotic_state(const ConnectionField& f);

ConnectionField apply_gauge(const ConnectionField& f, const GaugeBump& bump);

// NTF1 binary format round-trip; the optional sidecar <path>.meta.json
// carries the analytic winding parameters and relaxation history.
void save_ntf1(const ConnectionField& f, const std::string& path);
ConnectionField load_ntf1(const std::string& path);

// dual-coordinate spectral derivative matrix of the ng-periodic grid
std::vector<double> torus_deriv_matrix(int ng);

} // namespace nahmtx
