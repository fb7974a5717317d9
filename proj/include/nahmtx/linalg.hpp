#pragma once

#include "nahmtx/util.hpp"

#include <vector>

namespace nahmtx {

// Dense complex matrices just large enough for frame bookkeeping: Gram
// matrices, Ritz blocks and Higgs samples are all k x k with k <= ~8.
struct MatC {
    int rows = 0;
    int cols = 0;
    std::vector<cplx> a;

    MatC() = default;
    MatC(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, cplx(0, 0)) {}

    cplx& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    const cplx& at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static MatC identity(int n);
    MatC adjoint() const;
    MatC mul(const MatC& o) const;
    MatC operator+(const MatC& o) const;
    MatC operator-(const MatC& o) const;
    MatC scaled(cplx s) const;
    double fro_norm() const;
    cplx trace() const;
};

// Hermitian eigendecomposition by cyclic Jacobi rotations; eigenvalues
// ascending, columns of vecs are eigenvectors.
void hermitian_eig(const MatC& h, std::vector<double>& vals, MatC& vecs);

// Singular values (descending) and optionally U, V with A = U diag(s) V^*.
void svd(const MatC& a, std::vector<double>& sing, MatC* U = nullptr, MatC* V = nullptr);

// Unitary polar factor of a square (near-unitary) matrix: argmin ||Q - A||
// over unitaries, via SVD.
MatC polar_unitary(const MatC& a);

// Eigenvalues of a general square complex matrix by Durand-Kerner iteration
// on the characteristic polynomial; adequate for the small diagnostic blocks.
std::vector<cplx> eigenvalues(const MatC& a);

// Solve the small linear system A x = b by partial-pivot elimination.
std::vector<cplx> solve_dense(MatC a, std::vector<cplx> b);

} // namespace nahmtx
