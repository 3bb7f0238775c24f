#include "bss/overiva.hpp"

#include <cmath>

#include "bss/errors.hpp"
#include "bss/parallel.hpp"

namespace bss {

namespace {

constexpr double kVarianceFloorRel = 1e-10;
constexpr double kVarianceFloorAbs = 1e-30;
constexpr double kRetryLoading = 1e-6;

CMatrix matrix_at(const Tensor3<cdouble>& W, std::size_t f) {
  const std::size_t m = W.dim1();
  CMatrix out(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = W(f, i, j);
  return out;
}

void store_matrix(Tensor3<cdouble>* W, std::size_t f, const CMatrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) (*W)(f, i, j) = m(i, j);
}

}  // namespace

RMatrix update_source_variances(const MultichannelSpectrogram& spec,
                                const Tensor3<cdouble>& W_tilde,
                                std::size_t num_sources) {
  const std::size_t F = spec.num_bins();
  const std::size_t T = spec.num_frames();
  const std::size_t M = spec.num_channels();

  // Rows of W already hold w^H, so applying them is a plain product.
  RMatrix r(T, num_sources, 0.0);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t t = 0; t < T; ++t) {
      const cdouble* y = spec.data.slice(f, t);
      for (std::size_t k = 0; k < num_sources; ++k) {
        cdouble d = 0.0;
        for (std::size_t m = 0; m < M; ++m) d += W_tilde(f, k, m) * y[m];
        r(t, k) += std::norm(d);
      }
    }
  }
  double mean = 0.0;
  const double inv_f = 1.0 / static_cast<double>(F);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < num_sources; ++k) {
      r(t, k) *= inv_f;
      mean += r(t, k);
    }
  mean /= static_cast<double>(T * num_sources);
  const double floor =
      mean > 0.0 ? kVarianceFloorRel * mean : kVarianceFloorAbs;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < num_sources; ++k)
      r(t, k) = std::max(r(t, k), floor);
  return r;
}

CMatrix weighted_covariance(const MultichannelSpectrogram& spec, std::size_t f,
                            const RMatrix& r, std::size_t k) {
  const std::size_t T = spec.num_frames();
  const std::size_t M = spec.num_channels();
  CMatrix acc(M, M);
  for (std::size_t t = 0; t < T; ++t) {
    const double w = 1.0 / r(t, k);
    const cdouble* y = spec.data.slice(f, t);
    for (std::size_t i = 0; i < M; ++i) {
      const cdouble wy = w * y[i];
      for (std::size_t j = 0; j <= i; ++j) acc(i, j) += wy * std::conj(y[j]);
    }
  }
  const double inv_t = 1.0 / static_cast<double>(T);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      acc(i, j) *= inv_t;
      acc(j, i) = std::conj(acc(i, j));
    }
  return load_diagonal(hermitize(acc), kDefaultLoading);
}

IpRowResult ip_update_row(const CMatrix& W_tilde_f, const CMatrix& R,
                          std::size_t k) {
  const std::size_t M = R.rows();
  CVector e_k(M, cdouble{});
  e_k[k] = 1.0;

  IpRowResult result;
  CMatrix system = matmul(W_tilde_f, R);
  try {
    result.w = solve_general(system, e_k);
  } catch (const SingularMatrix&) {
    // One retry with a heavier-loaded covariance.
    const CMatrix reloaded = load_diagonal(R, kRetryLoading);
    system = matmul(W_tilde_f, reloaded);
    try {
      result.w = solve_general(system, e_k);
    } catch (const SingularMatrix&) {
      result.skipped = true;
      return result;
    }
  }

  double quad = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    cdouble s = 0.0;
    for (std::size_t j = 0; j < M; ++j) s += R(i, j) * result.w[j];
    quad += (std::conj(result.w[i]) * s).real();
  }
  if (!(quad > 0.0) || !std::isfinite(quad)) {
    result.skipped = true;
    result.w.clear();
    return result;
  }
  const double inv = 1.0 / std::sqrt(quad);
  for (auto& v : result.w) v *= inv;
  return result;
}

bool update_background(const CMatrix& W_f, const CMatrix& sigma_y,
                       CMatrix* U_f) {
  const std::size_t K = W_f.rows();
  const std::size_t M = W_f.cols();
  if (M == K) return true;  // determined case: no background rows

  // Sigma_y W^H split into the top K x K and bottom (M-K) x K blocks.
  const CMatrix swh = matmul(sigma_y, conj_transpose(W_f));
  CMatrix top(K, K), bottom(M - K, K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) top(i, j) = swh(i, j);
  for (std::size_t i = 0; i < M - K; ++i)
    for (std::size_t j = 0; j < K; ++j) bottom(i, j) = swh(K + i, j);

  // J = bottom * top^{-1} via top^T J^T = bottom^T.
  CMatrix jt;
  try {
    jt = solve_general_matrix(transpose(top), transpose(bottom));
  } catch (const SingularMatrix&) {
    return false;
  }

  CMatrix u(M - K, M, cdouble{});
  for (std::size_t i = 0; i < M - K; ++i) {
    for (std::size_t j = 0; j < K; ++j) u(i, j) = jt(j, i);
    u(i, K + i) = -1.0;
  }
  *U_f = std::move(u);
  return true;
}

CMatrix observation_covariance(const MultichannelSpectrogram& spec,
                               std::size_t f) {
  const std::size_t T = spec.num_frames();
  const std::size_t M = spec.num_channels();
  CMatrix acc(M, M);
  for (std::size_t t = 0; t < T; ++t) {
    const cdouble* y = spec.data.slice(f, t);
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        acc(i, j) += y[i] * std::conj(y[j]);
  }
  const double inv_t = 1.0 / static_cast<double>(T);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      acc(i, j) *= inv_t;
      acc(j, i) = std::conj(acc(i, j));
    }
  return load_diagonal(hermitize(acc), kDefaultLoading);
}

double minimum_distortion_rescale(SourceEstimates* estimates,
                                  const MultichannelSpectrogram& spec,
                                  std::size_t ref_channel) {
  const std::size_t F = estimates->num_bins();
  const std::size_t T = estimates->num_frames();
  const std::size_t K = estimates->num_sources();
  if (spec.num_bins() != F || spec.num_frames() != T)
    throw ConfigError("minimum_distortion_rescale: shape mismatch");
  if (ref_channel >= spec.num_channels())
    throw ConfigError("minimum_distortion_rescale: bad reference channel");

  double max_residual = 0.0;
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t k = 0; k < K; ++k) {
      cdouble cross = 0.0;
      double energy = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const cdouble d = estimates->data(f, t, k);
        cross += spec.data(f, t, ref_channel) * std::conj(d);
        energy += std::norm(d);
      }
      if (energy <= 0.0) continue;  // all-zero estimate stays unchanged
      const cdouble beta = cross / energy;
      for (std::size_t t = 0; t < T; ++t) estimates->data(f, t, k) *= beta;

      // Orthogonality of the least-squares residual:
      // sum_t (y_r - beta d) d^* = cross - beta * energy = 0 up to rounding.
      cdouble resid = 0.0;
      double scale = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        const cdouble d = estimates->data(f, t, k);
        resid += (spec.data(f, t, ref_channel) - d) * std::conj(d);
        scale += std::abs(spec.data(f, t, ref_channel)) * std::abs(d);
      }
      if (scale > 0.0)
        max_residual = std::max(max_residual, std::abs(resid) / scale);
    }
  }
  return max_residual;
}

double negative_log_likelihood(const MultichannelSpectrogram& spec,
                               const IvaState& state) {
  const std::size_t F = spec.num_bins();
  const std::size_t T = spec.num_frames();
  const std::size_t M = spec.num_channels();
  const std::size_t K = state.num_sources;

  double nll = 0.0;
  // Frequency-independent source terms: sum over (t,k) of
  // log(pi r) + |w^H y|^2 / r accumulated per frequency below.
  for (std::size_t f = 0; f < F; ++f) {
    const CMatrix W_tilde = matrix_at(state.W_tilde, f);
    nll -= 2.0 * static_cast<double>(T) * log_abs_det(W_tilde);

    for (std::size_t t = 0; t < T; ++t) {
      const cdouble* y = spec.data.slice(f, t);
      for (std::size_t k = 0; k < K; ++k) {
        cdouble d = 0.0;
        for (std::size_t m = 0; m < M; ++m) d += state.W_tilde(f, k, m) * y[m];
        nll += std::log(M_PI * state.r(t, k)) + std::norm(d) / state.r(t, k);
      }
    }

    if (M > K) {
      // Background at the analytically optimal covariance U Sigma_y U^H:
      // T * [(M-K) log pi + log det + (M-K)].
      CMatrix u(M - K, M);
      for (std::size_t i = 0; i < M - K; ++i)
        for (std::size_t j = 0; j < M; ++j) u(i, j) = state.W_tilde(f, K + i, j);
      const CMatrix sigma = observation_covariance(spec, f);
      const CMatrix usu =
          load_diagonal(hermitize(matmul(matmul(u, sigma), conj_transpose(u))),
                        kDefaultLoading);
      const CholeskyFactor chol(usu);
      nll += static_cast<double>(T) *
             (static_cast<double>(M - K) * (std::log(M_PI) + 1.0) +
              chol.log_det());
    }
  }
  return nll;
}

IvaResult run_overiva(const MultichannelSpectrogram& spec,
                      const IvaOptions& options) {
  const std::size_t F = spec.num_bins();
  const std::size_t T = spec.num_frames();
  const std::size_t M = spec.num_channels();
  const std::size_t K = options.num_sources;
  if (K < 1 || K > M)
    throw ConfigError("overiva: need 1 <= sources <= channels");
  if (options.iterations < 1)
    throw ConfigError("overiva: need at least one iteration");
  if (options.rescale_reference >= M)
    throw ConfigError("overiva: reference channel out of range");

  IvaResult result;
  IvaState& state = result.state;
  state.num_sources = K;
  if (options.initial_W) {
    if (options.initial_W->dim0() != F || options.initial_W->dim1() != M ||
        options.initial_W->dim2() != M)
      throw ConfigError("overiva: initial W must be F x M x M");
    state.W_tilde = *options.initial_W;
  } else {
    state.W_tilde = Tensor3<cdouble>(F, M, M);
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t i = 0; i < M; ++i) state.W_tilde(f, i, i) = 1.0;
  }

  // Sigma_y has no time dependence; computed once per run.
  std::vector<CMatrix> sigma_y(F);
  parallel_for(F, options.num_threads, [&](std::size_t f) {
    sigma_y[f] = observation_covariance(spec, f);
  });

  std::vector<std::size_t> skips(F, 0), bg_failures(F, 0);
  std::vector<double> norm_errors(F, 0.0);

  for (std::size_t iter = 0; iter < options.iterations; ++iter) {
    if (options.track_likelihood) {
      state.r = update_source_variances(spec, state.W_tilde, K);
      result.diagnostics.negative_log_likelihood.push_back(
          negative_log_likelihood(spec, state));
    }
    for (std::size_t k = 0; k < K; ++k) {
      state.r = update_source_variances(spec, state.W_tilde, K);
      parallel_for(F, options.num_threads, [&](std::size_t f) {
        const CMatrix R = weighted_covariance(spec, f, state.r, k);
        CMatrix W_tilde_f = matrix_at(state.W_tilde, f);
        const IpRowResult row = ip_update_row(W_tilde_f, R, k);
        if (row.skipped) {
          ++skips[f];
        } else {
          for (std::size_t m = 0; m < M; ++m)
            W_tilde_f(k, m) = std::conj(row.w[m]);

          // Diagnostic: w^H R w after normalization.
          double quad = 0.0;
          for (std::size_t i = 0; i < M; ++i) {
            cdouble s = 0.0;
            for (std::size_t j = 0; j < M; ++j) s += R(i, j) * row.w[j];
            quad += (std::conj(row.w[i]) * s).real();
          }
          norm_errors[f] = std::max(norm_errors[f], std::abs(quad - 1.0));
        }
        if (M > K) {
          CMatrix W_f(K, M);
          for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < M; ++j) W_f(i, j) = W_tilde_f(i, j);
          CMatrix U_f(M - K, M);
          for (std::size_t i = 0; i < M - K; ++i)
            for (std::size_t j = 0; j < M; ++j) U_f(i, j) = W_tilde_f(K + i, j);
          if (update_background(W_f, sigma_y[f], &U_f)) {
            for (std::size_t i = 0; i < M - K; ++i)
              for (std::size_t j = 0; j < M; ++j)
                W_tilde_f(K + i, j) = U_f(i, j);
          } else {
            ++bg_failures[f];
          }
        }
        store_matrix(&state.W_tilde, f, W_tilde_f);
      });
    }
  }
  state.r = update_source_variances(spec, state.W_tilde, K);

  for (std::size_t f = 0; f < F; ++f) {
    result.diagnostics.singular_row_skips += skips[f];
    result.diagnostics.background_failures += bg_failures[f];
    result.diagnostics.max_ip_norm_error =
        std::max(result.diagnostics.max_ip_norm_error, norm_errors[f]);
  }

  // Separate with the source rows, then fix the per-frequency scaling.
  SourceEstimates& est = result.estimates;
  est.config = spec.config;
  est.sample_rate = spec.sample_rate;
  est.data = Tensor3<cdouble>(F, T, K);
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t t = 0; t < T; ++t) {
      const cdouble* y = spec.data.slice(f, t);
      for (std::size_t k = 0; k < K; ++k) {
        cdouble d = 0.0;
        for (std::size_t m = 0; m < M; ++m) d += state.W_tilde(f, k, m) * y[m];
        est.data(f, t, k) = d;
      }
    }
  result.diagnostics.max_rescale_residual =
      minimum_distortion_rescale(&est, spec, options.rescale_reference);
  return result;
}

}  // namespace bss
