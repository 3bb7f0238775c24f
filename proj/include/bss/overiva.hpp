#ifndef BSS_OVERIVA_HPP
#define BSS_OVERIVA_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "bss/beamforming.hpp"
#include "bss/hermitian.hpp"
#include "bss/stft.hpp"
#include "bss/tensor.hpp"

namespace bss {

// Overdetermined IVA: maximum-likelihood demixing with per-source
// nonstationary Gaussian models and a stationary full-covariance background,
// iterative-projection row updates, minimum-distortion rescaling.

struct IvaState {
  // Square demixing matrix per frequency; rows 0..K-1 hold w^H (sources),
  // rows K..M-1 hold the background U = [J  -I].
  Tensor3<cdouble> W_tilde;  // F x M x M
  RMatrix r;                 // T x K source variances
  std::size_t num_sources = 0;
};

struct IvaDiagnostics {
  std::size_t singular_row_skips = 0;
  std::size_t background_failures = 0;
  double max_ip_norm_error = 0.0;          // max |w^H R w - 1| after updates
  double max_rescale_residual = 0.0;       // min-distortion orthogonality
  std::vector<double> negative_log_likelihood;  // per outer iteration
};

struct IvaOptions {
  std::size_t num_sources = 2;
  std::size_t iterations = 100;
  std::size_t rescale_reference = 0;
  // Initial demixing matrices (F x M x M); identity when absent.
  std::optional<Tensor3<cdouble>> initial_W;
  bool track_likelihood = false;
  int num_threads = 1;
};

struct IvaResult {
  IvaState state;
  SourceEstimates estimates;  // separated and minimum-distortion rescaled
  IvaDiagnostics diagnostics;
};

// r(t,k) = (1/F) sum_f |w(f,k)^H y(f,t)|^2, floored at
// 1e-10 * mean(raw values) (absolute 1e-30 when that mean vanishes).
RMatrix update_source_variances(const MultichannelSpectrogram& spec,
                                const Tensor3<cdouble>& W_tilde,
                                std::size_t num_sources);

// R(f,k) = (1/T) sum_t y y^H / r(t,k), symmetrized and loaded.
CMatrix weighted_covariance(const MultichannelSpectrogram& spec, std::size_t f,
                            const RMatrix& r, std::size_t k);

// Iterative projection: w = (W_tilde R)^{-1} e_k, then w <- w / sqrt(w^H R w).
// On a singular system the covariance is reloaded once with eps 1e-6; if
// still singular the row is left unchanged and the skip counted.
struct IpRowResult {
  CVector w;
  bool skipped = false;
};
IpRowResult ip_update_row(const CMatrix& W_tilde_f, const CMatrix& R,
                          std::size_t k);

// J = (E2 Sigma_y W^H)(E1 Sigma_y W^H)^{-1}, U = [J  -I]. No-op when M == K.
// Returns false (keeping prev_U) when the K x K system is singular.
bool update_background(const CMatrix& W_f, const CMatrix& sigma_y,
                       CMatrix* U_f);

// Covariance of the observations at frequency f over all frames, loaded.
CMatrix observation_covariance(const MultichannelSpectrogram& spec,
                               std::size_t f);

// Per-frequency complex rescaling of each estimate to best match the
// reference channel in least squares. Estimates that are identically zero
// stay unchanged. Returns the largest relative orthogonality residual.
double minimum_distortion_rescale(SourceEstimates* estimates,
                                  const MultichannelSpectrogram& spec,
                                  std::size_t ref_channel);

// Negative log-likelihood of the model with the analytically optimal
// background covariance (diagnostic; decreases over iterations).
double negative_log_likelihood(const MultichannelSpectrogram& spec,
                               const IvaState& state);

IvaResult run_overiva(const MultichannelSpectrogram& spec,
                      const IvaOptions& options);

}  // namespace bss

#endif  // BSS_OVERIVA_HPP
