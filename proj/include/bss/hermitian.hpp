#ifndef BSS_HERMITIAN_HPP
#define BSS_HERMITIAN_HPP

#include <vector>

#include "bss/tensor.hpp"

namespace bss {

// Small-dimension complex linear algebra used by every estimator. Channel
// counts stay around 8, per-frequency loops dominate, and regression tests
// need deterministic results, hence a dedicated kernel instead of BLAS.

// Default relative diagonal loading applied before inversions in the
// estimator modules; masks can drive covariances arbitrarily close to
// rank deficiency.
inline constexpr double kDefaultLoading = 1e-10;

// (A + A^H) / 2.
CMatrix hermitize(const CMatrix& a);

// A + eps_rel * (trace(A)/n) * I; falls back to A + eps_rel * I when the
// trace vanishes so that a zero matrix still becomes invertible.
CMatrix load_diagonal(const CMatrix& a, double eps_rel);

double trace_real(const CMatrix& a);

// Cholesky factor of a Hermitian positive definite matrix (lower L with
// A = L L^H). Throws NotPositiveDefinite.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const CMatrix& a);

  std::size_t dim() const { return l_.rows(); }

  // Solves A x = b.
  CVector solve(const CVector& b) const;
  // y^H A^{-1} y = ||L^{-1} y||^2, real and nonnegative.
  double quadform(const cdouble* y) const;
  // log det A = 2 sum log diag(L).
  double log_det() const;

 private:
  CMatrix l_;
};

CVector solve_hermitian(const CMatrix& a, const CVector& b);

// LU with partial pivoting; pivots below 1e-12 * max|A_ij| raise
// SingularMatrix.
CVector solve_general(const CMatrix& a, const CVector& b);
// Solves A X = B column-wise with a single factorization.
CMatrix solve_general_matrix(const CMatrix& a, const CMatrix& b);
// log |det A| via LU pivots (used for likelihood reporting).
double log_abs_det(const CMatrix& a);

struct EighResult {
  std::vector<double> eigenvalues;  // ascending
  CMatrix eigenvectors;             // columns, unitary, canonical phase
};

// Cyclic complex Jacobi eigendecomposition of a Hermitian matrix. The phase
// of each eigenvector is canonicalized (largest-magnitude component made
// real positive) so results are deterministic.
EighResult eigh(const CMatrix& a);

// Helpers shared by the estimators.
CMatrix matmul(const CMatrix& a, const CMatrix& b);
CMatrix conj_transpose(const CMatrix& a);
CMatrix transpose(const CMatrix& a);
double max_abs(const CMatrix& a);

}  // namespace bss

#endif  // BSS_HERMITIAN_HPP
