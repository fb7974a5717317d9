#pragma once

#include "nahmtx/field.hpp"
#include "nahmtx/flat_dirac.hpp"
#include "nahmtx/linalg.hpp"
#include "nahmtx/spinor.hpp"

namespace nahmtx {

// Dirac operator coupled to (field tensor L_xi) on rank-2 spinors. The flat
// xi-twist acts mode-diagonally; the connection acts pointwise on the torus
// grid through the unitary mode <-> grid transform:
//   Z_A = Z(xi) + 2 Azbar .   P_A = P + 2 Awbar .
// For a flat field the operator block-diagonalizes into the two flat twists
// xi0 + xi and -xi0 + xi.
class CoupledDiracOp {
public:
    CoupledDiracOp(const ConnectionField& field, const JacobianPoint& xi, int spinor_cutoff);

    const SpinorShape& shape() const { return shape_; }
    const JacobianPoint& xi() const { return xi_; }
    const ConnectionField& field() const { return *field_; }

    // chirality-flipping application (D on S+, D* on S-)
    Spinor apply(const Spinor& s) const;

    // D*D on S+ or DD* on S- (two applications)
    Spinor laplacian(const Spinor& s) const { return apply(apply(s)); }

    // direct-sum flat model at the shifted twists (exact for flat fields)
    const FlatDiracOp& flat_model() const { return flat_model_; }

    // glued parametrix P g = b1 Qc(b1 g) + b2 Qc(b2 g), where Qc is the
    // winding-conjugated flat-model inverse; and its adjoint
    Spinor parametrix(const Spinor& s, double inner_tol = 1e-8) const;
    Spinor parametrix_adjoint(const Spinor& s, double inner_tol = 1e-8) const;

    // pointwise multiplication by the analytic end-winding map (identity when
    // the field carries no winding data)
    Spinor conjugate_by_winding(const Spinor& s, bool inverse) const;

    double lambda_min_effective() const; // min over the two shifted twists

private:
    void coupling_terms(const Spinor& s, Spinor& out, bool adjoint_direction) const;

    const ConnectionField* field_;
    JacobianPoint xi_;
    SpinorShape shape_;
    FlatDiracOp flat_xi_;     // rank-2 flat operator at bare twist xi
    FlatDiracOp flat_model_;  // direct sum at xi0 + xi and -xi0 + xi
    // 2x2 complex coupling fields [torus grid site][plane site][2][2]
    std::vector<cplx> azbar_, awbar_;
    std::vector<cplx> wind_;  // winding map entries, same layout, or empty
    std::vector<cplx> beta1_, beta2_; // partition of unity over the plane
    std::vector<cplx> dft_fwd_, dft_inv_; // unitary ng x ng mode<->grid
};

struct KernelFrame {
    JacobianPoint xi;
    std::vector<Spinor> basis;       // orthonormal, dim = accepted kernel size
    std::vector<double> sigma;       // smallest k+2 singular values, ascending
    double sigma_ref = 0.0;          // ladder top (sigma_{k+2}) scale reference
    double gap = 0.0;                // sigma_{r+1}/sigma_r at the cut
    int iterations = 0;
};

struct KernelOptions {
    int k_expected = 1;
    double delta_punct = 0.05;
    double rel_threshold = 0.15;     // accept sigma < rel_threshold * sigma_ref
    double gap_factor = 10.0;
    int max_outer = 140; // LOBPCG sweeps
    int cg_iters = 60;   // used by the scalar solves (greens etc.)
    double tol_sigma = 1e-4;         // ladder stabilization target
    const std::vector<Spinor>* warm_start = nullptr;
    bool check_plus_kernel = false;  // verify ker D (S+) is empty
};

KernelFrame kernel_basis(const CoupledDiracOp& op, const KernelOptions& opt);

// Green's operator of the S+ Dirac laplacian: solves D*D x = s by
// preconditioned CG (H_xi = 0 for the irreducible fields handled here).
struct GreensStats {
    int iterations = 0;
    double residual = 0.0;
};
Spinor greens_apply(const CoupledDiracOp& op, const Spinor& s, double tol = 1e-8,
                    GreensStats* stats = nullptr, bool preconditioned = true);

struct IndexSample {
    JacobianPoint xi;
    int dim = 0;
    std::vector<double> sigma;
    int iterations = 0;
    bool ambiguous = false;
};

std::vector<IndexSample> index_scan(const ConnectionField& field, int spinor_cutoff,
                                    const std::vector<JacobianPoint>& xis,
                                    const KernelOptions& opt);

std::string index_scan_csv(const std::vector<IndexSample>& samples);

// smallest eigenvalue of the S+ laplacian (Weitzenboeck gap diagnostic)
double plus_laplacian_gap(const CoupledDiracOp& op, int iters = 18);

} // namespace nahmtx
