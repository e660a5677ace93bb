#pragma once

#include "forge/types.hpp"

#include <functional>
#include <string_view>
#include <vector>

namespace forge::linalg {

inline constexpr double kDefaultKernelTol = 1e-10;
inline constexpr double kEigResidualTol = 1e-9;

ComplexMatrix kron(const ComplexMatrix &a, const ComplexMatrix &b);

// Column stacking: entry (i,j) goes to index j*D + i.
ComplexVector vectorize(const ComplexMatrix &rho);
ComplexMatrix devectorize(const ComplexVector &v);
ComplexMatrix devectorize(const ComplexVector &v, Index dim);

bool all_finite(const ComplexMatrix &m);
void require_finite(const ComplexMatrix &m, std::string_view what);
void require_square(const ComplexMatrix &m, std::string_view what);

// Largest singular value.
double spectral_norm(const ComplexMatrix &m);
double one_norm(const ComplexMatrix &m);
RealVector singular_values(const ComplexMatrix &m);

struct EigenDecomposition {
    std::vector<cplx> values;           // sorted by descending real part
    ComplexMatrix vectors;              // right eigenvectors, unit 2-norm, column k pairs with values[k]
    std::vector<double> residuals;      // ||Mv - lambda v||
    std::vector<double> conditions;     // 1/|y^H x|, empty if left vectors were skipped
    std::vector<bool> flagged;          // residual or conditioning outside contract
    double matrix_norm = 0.0;           // Frobenius norm of the input

    double residual_max() const;
    bool any_flagged() const;
};

// Dense general eigensolver (LAPACK zgeev). Left vectors are only computed
// when with_conditions is set; they are what exposes defective pairs.
EigenDecomposition eig_general(const ComplexMatrix &m, bool with_conditions = true);

// Values only, same ordering as eig_general.
std::vector<cplx> eigvals_general(const ComplexMatrix &m);

void sort_descending_real(std::vector<cplx> &values);

// e^{tM} v by scaled truncated Taylor series.
ComplexVector expm_apply(const ComplexMatrix &m, const ComplexVector &v, double t);
ComplexMatrix expm_apply(const ComplexMatrix &m, const ComplexMatrix &block, double t);

// Orthonormal basis (columns) of singular vectors with s <= tol * s_max.
ComplexMatrix null_space(const ComplexMatrix &m, double tol = kDefaultKernelTol);

struct PartialSpectrum {
    std::vector<cplx> values;       // sorted by descending real part
    std::vector<double> residuals;  // against the undeflated matrix
    int krylov_dim = 0;
};

// Eigenvalues of m closest to the origin, excluding the known simple zero
// eigenvalue with right vector r and left vector l. The zero mode is shifted
// out by a rank-one update, then Arnoldi runs on the inverse.
PartialSpectrum eigs_near_zero(const ComplexMatrix &m, const ComplexVector &r,
                               const ComplexVector &l, int count);

// y = A x for an n-dimensional operator given only through its action.
using LinearOperator = std::function<void(const ComplexVector &x, ComplexVector &y)>;

// The count eigenvalues of largest real part, by implicitly restarted
// Arnoldi (ARPACK). Residuals are ||A x - lambda x|| for unit x.
// Throws NumericalError if fewer than count values converge.
PartialSpectrum eigs_rightmost(const LinearOperator &op, Index n, int count, double tol = 1e-12,
                               int max_restarts = 5000);

} // namespace forge::linalg
