#pragma once

#include "nahmtx/coupled.hpp"
#include "nahmtx/linalg.hpp"

#include <map>
#include <memory>
#include <optional>

namespace nahmtx {

struct TransformOptions {
    int spinor_cutoff = 6;
    double delta_xi = 0.01;   // xi-stencil step for B, F_B, dbar Phi
    double green_tol = 1e-8;
    KernelOptions kernel;
};

// One transformed sample: connection coefficients, Higgs field and curvature
// of the index bundle at a dual-torus point, plus the cross-route and
// Hitchin diagnostics.
struct HiggsSample {
    JacobianPoint xi;
    int dim = 0;
    MatC B1, B2;          // anti-hermitian frame coefficients of nabla_B
    MatC Phi;             // k x k coefficient of dxi (2 sqrt2 pi <psi, w psi>)
    MatC PhiProj;         // same with the explicit kernel projector applied
    MatC F12;             // curvature coefficient on dxi1 ^ dxi2 (stencil route)
    MatC F12_green;       // Green-operator route of the same coefficient
    MatC bracket12;       // [Phi, Phi*] coefficient on dxi1 ^ dxi2
    double fb_cross_err = 0.0;
    double hitchin_1 = 0.0;   // ||F12 + bracket12||_F
    double hitchin_2 = 0.0;   // ||dbar_B Phi||_F
    double dbar_phi = 0.0;    // |d Phi / d xi-bar| (holomorphicity diagnostic)
    double d_phi = 0.0;       // |d Phi / d xi| for contrast
    double phi_proj_err = 0.0;
    double phi_herm_err = 0.0;  // conjugate-route hermiticity defect
    double kahler_pairing = 0.0; // <(dz1dz2 + dw1dw2) psi, G- psi> combination
};

// Frame cache so stencil-adjacent samples reuse kernel solves.
class FrameCache {
public:
    explicit FrameCache(const ConnectionField& field, const TransformOptions& opts)
        : field_(&field), opts_(opts)
    {
    }
    const KernelFrame& at(const JacobianPoint& xi);
    const CoupledDiracOp& op(const JacobianPoint& xi);
    const TransformOptions& options() const { return opts_; }
    const ConnectionField& field() const { return *field_; }
    void clear();

private:
    const ConnectionField* field_;
    TransformOptions opts_;
    std::map<std::pair<long long, long long>, KernelFrame> frames_;
    std::map<std::pair<long long, long long>, std::unique_ptr<CoupledDiracOp>> ops_;
    std::vector<Spinor> last_basis_;
};

HiggsSample transform_point(FrameCache& cache, const JacobianPoint& xi);

// Frobenius norms of the two Hitchin residuals of a completed sample.
std::pair<double, double> hitchin_residual(const HiggsSample& s);

struct RayFit {
    double angle = 0.0;
    double order = 0.0;       // fitted pole order
    double correlation = 0.0; // of the log-log fit
    cplx residue_eig = 0.0;   // extrapolated eigenvalue of (xi - xi0) Phi
};

struct PoleReport {
    JacobianPoint puncture;
    std::vector<RayFit> rays;
    MatC residue;             // extrapolated residue matrix
    int residue_rank = 0;
    double rank_gap = 0.0;
    bool semisimple = true;
    double max_other_eig = 0.0; // largest bounded eigenvalue over the scan
};

PoleReport pole_scan(FrameCache& cache, const JacobianPoint& puncture, int n_rays,
                     const std::vector<double>& radii);

struct GaugeComparePoint {
    JacobianPoint xi;
    double spectrum_dist = 0.0; // max sorted-eigenvalue distance of Phi
    double fb_norm_ratio = 1.0;
    double hitchin_ratio = 1.0;
};

std::vector<GaugeComparePoint> gauge_compare(const ConnectionField& field,
                                             const ConnectionField& gauged,
                                             const std::vector<JacobianPoint>& xis,
                                             const TransformOptions& opts);

struct DegreeReport {
    double estimate = 0.0;
    double bulk = 0.0;              // plaquette-sum part
    double boundary = 0.0;          // excision-circle windings
    double uncertainty = 0.0;
    int grid = 0;
    double excision_radius = 0.0;
};

DegreeReport degree_estimate(FrameCache& cache, int grid, double excision_radius,
                             int circle_points = 20);

// CSV row block for transformed samples (xi, Phi entries, residuals, cross err)
std::string higgs_csv_header(int k);
std::string higgs_csv_row(const HiggsSample& s);

} // namespace nahmtx
