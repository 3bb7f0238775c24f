#include "bss/hermitian.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "bss/errors.hpp"

namespace bss {

namespace {
constexpr std::size_t kMaxDim = 16;  // per-frequency problems are tiny
constexpr double kPivotRel = 1e-12;

void check_dim(std::size_t n) {
  if (n == 0 || n > kMaxDim) throw Error("hermitian kernel: bad dimension");
}
}  // namespace

CMatrix hermitize(const CMatrix& a) {
  const std::size_t n = a.rows();
  CMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
  return out;
}

double trace_real(const CMatrix& a) {
  double tr = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) tr += a(i, i).real();
  return tr;
}

CMatrix load_diagonal(const CMatrix& a, double eps_rel) {
  const std::size_t n = a.rows();
  const double tr = trace_real(a);
  const double load = tr > 0.0 ? eps_rel * tr / static_cast<double>(n)
                               : eps_rel;
  CMatrix out = a;
  for (std::size_t i = 0; i < n; ++i) out(i, i) += load;
  return out;
}

CholeskyFactor::CholeskyFactor(const CMatrix& a) : l_(a.rows(), a.rows()) {
  const std::size_t n = a.rows();
  check_dim(n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (std::size_t r = 0; r < j; ++r) d -= std::norm(l_(j, r));
    if (!(d > 0.0) || !std::isfinite(d))
      throw NotPositiveDefinite("cholesky: nonpositive pivot");
    const double ljj = std::sqrt(d);
    l_(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      cdouble s = a(i, j);
      for (std::size_t r = 0; r < j; ++r)
        s -= l_(i, r) * std::conj(l_(j, r));
      l_(i, j) = s / ljj;
    }
  }
}

CVector CholeskyFactor::solve(const CVector& b) const {
  const std::size_t n = dim();
  CVector x(b);
  // L z = b
  for (std::size_t i = 0; i < n; ++i) {
    cdouble s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= l_(i, j) * x[j];
    x[i] = s / l_(i, i);
  }
  // L^H x = z
  for (std::size_t ii = n; ii-- > 0;) {
    cdouble s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j)
      s -= std::conj(l_(j, ii)) * x[j];
    x[ii] = s / l_(ii, ii);
  }
  return x;
}

double CholeskyFactor::quadform(const cdouble* y) const {
  const std::size_t n = dim();
  std::array<cdouble, kMaxDim> z;
  // z = L^{-1} y, quadform = ||z||^2
  for (std::size_t i = 0; i < n; ++i) {
    cdouble s = y[i];
    for (std::size_t j = 0; j < i; ++j) s -= l_(i, j) * z[j];
    z[i] = s / l_(i, i);
  }
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) q += std::norm(z[i]);
  return q;
}

double CholeskyFactor::log_det() const {
  double ld = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) ld += std::log(l_(i, i).real());
  return 2.0 * ld;
}

CVector solve_hermitian(const CMatrix& a, const CVector& b) {
  return CholeskyFactor(a).solve(b);
}

namespace {

struct LuFactor {
  CMatrix lu;
  std::array<std::size_t, kMaxDim> perm;
  int sign = 1;
};

LuFactor lu_factor(const CMatrix& a) {
  const std::size_t n = a.rows();
  check_dim(n);
  const double threshold = kPivotRel * std::max(max_abs(a), 1e-300);
  LuFactor f{a, {}, 1};
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(f.lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(f.lu(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (!(best > threshold) || !std::isfinite(best))
      throw SingularMatrix("lu: pivot below threshold");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j)
        std::swap(f.lu(k, j), f.lu(piv, j));
      std::swap(f.perm[k], f.perm[piv]);
      f.sign = -f.sign;
    }
    const cdouble pivot = f.lu(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const cdouble m = f.lu(i, k) / pivot;
      f.lu(i, k) = m;
      for (std::size_t j = k + 1; j < n; ++j) f.lu(i, j) -= m * f.lu(k, j);
    }
  }
  return f;
}

CVector lu_solve(const LuFactor& f, const CVector& b) {
  const std::size_t n = f.lu.rows();
  CVector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[f.perm[i]];
  for (std::size_t i = 1; i < n; ++i) {
    cdouble s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= f.lu(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    cdouble s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= f.lu(ii, j) * x[j];
    x[ii] = s / f.lu(ii, ii);
  }
  return x;
}

}  // namespace

CVector solve_general(const CMatrix& a, const CVector& b) {
  return lu_solve(lu_factor(a), b);
}

CMatrix solve_general_matrix(const CMatrix& a, const CMatrix& b) {
  const LuFactor f = lu_factor(a);
  CMatrix x(b.rows(), b.cols());
  CVector col(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
    const CVector sol = lu_solve(f, col);
    for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

double log_abs_det(const CMatrix& a) {
  const LuFactor f = lu_factor(a);
  double ld = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    ld += std::log(std::abs(f.lu(i, i)));
  return ld;
}

EighResult eigh(const CMatrix& a_in) {
  const std::size_t n = a_in.rows();
  check_dim(n);
  CMatrix a = hermitize(a_in);
  CMatrix v = CMatrix::identity(n);

  double scale = max_abs(a);
  if (scale == 0.0) scale = 1.0;
  const double tol = 1e-14 * scale;
  constexpr int kMaxSweeps = 100;

  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::abs(a(p, q));
    if (off <= tol * static_cast<double>(n)) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double m = std::abs(a(p, q));
        if (m <= 1e-300) continue;
        const cdouble phase = a(p, q) / m;
        const double tau = (a(q, q).real() - a(p, p).real()) / (2.0 * m);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const cdouble s = phase * (t * c);
        // A <- G^H A G with the plane rotation G(p, q; c, s).
        for (std::size_t i = 0; i < n; ++i) {
          const cdouble aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - std::conj(s) * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t j = 0; j < n; ++j) {
          const cdouble apj = a(p, j), aqj = a(q, j);
          a(p, j) = c * apj - s * aqj;
          a(q, j) = std::conj(s) * apj + c * aqj;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (std::size_t i = 0; i < n; ++i) {
          const cdouble vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - std::conj(s) * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  if (sweep == kMaxSweeps)
    throw ConvergenceFailure("eigh: jacobi sweep cap exceeded");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a(i, i).real() < a(j, j).real();
  });

  EighResult res;
  res.eigenvalues.resize(n);
  res.eigenvectors = CMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    res.eigenvalues[j] = a(order[j], order[j]).real();
    // Canonical phase: component with the largest magnitude made real > 0.
    std::size_t imax = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = std::abs(v(i, order[j]));
      if (mag > best) {
        best = mag;
        imax = i;
      }
    }
    cdouble rot = 1.0;
    if (best > 0.0) rot = std::conj(v(imax, order[j])) / best;
    for (std::size_t i = 0; i < n; ++i)
      res.eigenvectors(i, j) = v(i, order[j]) * rot;
  }
  return res;
}

CMatrix matmul(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cdouble aik = a(i, k);
      if (aik == cdouble{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j)
        out(i, j) += aik * b(k, j);
    }
  return out;
}

CMatrix conj_transpose(const CMatrix& a) {
  CMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      out(j, i) = std::conj(a(i, j));
  return out;
}

CMatrix transpose(const CMatrix& a) {
  CMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

double max_abs(const CMatrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      m = std::max(m, std::abs(a(i, j)));
  return m;
}

}  // namespace bss
