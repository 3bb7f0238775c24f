#include "bss/beamforming.hpp"

#include <cmath>

#include "bss/errors.hpp"

namespace bss {

namespace {
constexpr double kMassFloor = 1e-10;
constexpr double kTraceFloor = 1e-12;
}  // namespace

ScmPerFrequency estimate_scm(const MultichannelSpectrogram& spec,
                             const RMatrix& mask) {
  const std::size_t F = spec.num_bins();
  const std::size_t T = spec.num_frames();
  const std::size_t M = spec.num_channels();
  if (mask.rows() != F || mask.cols() != T)
    throw ConfigError("estimate_scm: mask shape mismatch");

  ScmPerFrequency out;
  out.phi.reserve(F);
  for (std::size_t f = 0; f < F; ++f) {
    CMatrix acc(M, M);
    double mass = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double m = mask(f, t);
      if (m <= 0.0) continue;
      mass += m;
      const cdouble* y = spec.data.slice(f, t);
      for (std::size_t i = 0; i < M; ++i) {
        const cdouble my = m * y[i];
        for (std::size_t j = 0; j <= i; ++j) acc(i, j) += my * std::conj(y[j]);
      }
    }
    if (mass < kMassFloor) out.degenerate = true;
    const double denom = std::max(mass, kMassFloor);
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        acc(i, j) /= denom;
        acc(j, i) = std::conj(acc(i, j));
      }
    out.phi.push_back(load_diagonal(hermitize(acc), kDefaultLoading));
  }
  return out;
}

CVector mvdr_souden(const CMatrix& phi_target, const CMatrix& phi_distortion,
                    std::size_t ref, bool* degenerate) {
  const std::size_t M = phi_target.rows();
  const CholeskyFactor chol(phi_distortion);

  // Columns of N = Phi_n^{-1} Phi_x; the trace normalizes, column ref is w.
  CMatrix numerator(M, M);
  CVector col(M);
  for (std::size_t j = 0; j < M; ++j) {
    for (std::size_t i = 0; i < M; ++i) col[i] = phi_target(i, j);
    const CVector sol = chol.solve(col);
    for (std::size_t i = 0; i < M; ++i) numerator(i, j) = sol[i];
  }
  cdouble trace = 0.0;
  for (std::size_t i = 0; i < M; ++i) trace += numerator(i, i);

  CVector w(M, cdouble{});
  if (std::abs(trace) < kTraceFloor) {
    if (degenerate) *degenerate = true;
    return w;
  }
  for (std::size_t i = 0; i < M; ++i) w[i] = numerator(i, ref) / trace;
  return w;
}

std::size_t select_reference_channel(
    const std::vector<CMatrix>& phi_target,
    const std::vector<CMatrix>& phi_distortion,
    const std::vector<std::vector<CVector>>& candidate_w) {
  const std::size_t F = phi_target.size();
  if (F == 0 || candidate_w.empty()) return 0;
  const std::size_t M = phi_target[0].rows();
  if (M == 1) return 0;

  const auto quad = [M](const CMatrix& a, const CVector& w) {
    double q = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      cdouble s = 0.0;
      for (std::size_t j = 0; j < M; ++j) s += a(i, j) * w[j];
      q += (std::conj(w[i]) * s).real();
    }
    return q;
  };

  std::size_t best_ref = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t ref = 0; ref < M; ++ref) {
    double score = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      const CVector& w = candidate_w[f][ref];
      const double den = quad(phi_distortion[f], w);
      if (den <= 1e-300) continue;  // zero (degenerate) candidates score 0
      score += quad(phi_target[f], w) / den;
    }
    if (score > best_score) {  // strict: ties keep the lowest index
      best_score = score;
      best_ref = ref;
    }
  }
  return best_ref;
}

SourceEstimates extract_with_beamformer(const MultichannelSpectrogram& spec,
                                        const BeamformerSet& bf) {
  const std::size_t F = spec.num_bins();
  const std::size_t T = spec.num_frames();
  const std::size_t M = spec.num_channels();
  const std::size_t K = bf.w.dim1();
  if (bf.w.dim0() != F || bf.w.dim2() != M)
    throw ConfigError("extract_with_beamformer: shape mismatch");

  SourceEstimates est;
  est.config = spec.config;
  est.sample_rate = spec.sample_rate;
  est.data = Tensor3<cdouble>(F, T, K);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t k = 0; k < K; ++k) {
      const cdouble* w = bf.w.slice(f, k);
      for (std::size_t t = 0; t < T; ++t) {
        const cdouble* y = spec.data.slice(f, t);
        cdouble d = 0.0;
        for (std::size_t m = 0; m < M; ++m) d += std::conj(w[m]) * y[m];
        est.data(f, t, k) = d;
      }
    }
  }
  return est;
}

BeamformFromMasksResult beamform_from_masks(
    const MultichannelSpectrogram& spec, const Tensor3<double>& masks,
    const std::vector<std::size_t>& target_classes,
    std::optional<std::size_t> forced_reference) {
  const std::size_t F = spec.num_bins();
  const std::size_t T = spec.num_frames();
  const std::size_t M = spec.num_channels();
  const std::size_t K = target_classes.size();
  if (masks.dim0() != F || masks.dim1() != T)
    throw ConfigError("beamform_from_masks: mask shape mismatch");
  if (forced_reference && *forced_reference >= M)
    throw ConfigError("beamform_from_masks: reference channel out of range");

  BeamformerSet bf;
  bf.w = Tensor3<cdouble>(F, K, M);
  bf.reference_channel.resize(K);

  RMatrix mask(F, T), complement(F, T);
  for (std::size_t idx = 0; idx < K; ++idx) {
    const std::size_t cls = target_classes[idx];
    if (cls >= masks.dim2())
      throw ConfigError("beamform_from_masks: target class out of range");
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t t = 0; t < T; ++t) {
        const double m = masks(f, t, cls);
        mask(f, t) = m;
        complement(f, t) = 1.0 - m;  // all other classes pooled
      }

    const ScmPerFrequency phi_x = estimate_scm(spec, mask);
    const ScmPerFrequency phi_n = estimate_scm(spec, complement);

    // Candidates for every reference share the Phi_n^{-1} Phi_x columns.
    std::vector<std::vector<CVector>> candidates(
        F, std::vector<CVector>(M));
    for (std::size_t f = 0; f < F; ++f) {
      bool degenerate = false;
      for (std::size_t ref = 0; ref < M; ++ref)
        candidates[f][ref] =
            mvdr_souden(phi_x.phi[f], phi_n.phi[f], ref,
                        ref == 0 ? &degenerate : nullptr);
      if (degenerate) ++bf.degenerate_bins;
    }

    const std::size_t ref =
        forced_reference ? *forced_reference
                         : select_reference_channel(phi_x.phi, phi_n.phi,
                                                    candidates);
    bf.reference_channel[idx] = ref;
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t m = 0; m < M; ++m)
        bf.w(f, idx, m) = candidates[f][ref][m];
  }

  BeamformFromMasksResult result;
  result.estimates = extract_with_beamformer(spec, bf);
  result.beamformers = std::move(bf);
  return result;
}

SourceEstimates mask_multiply(const MultichannelSpectrogram& spec,
                              const Tensor3<double>& masks,
                              const std::vector<std::size_t>& target_classes,
                              std::size_t reference_channel) {
  const std::size_t F = spec.num_bins();
  const std::size_t T = spec.num_frames();
  if (reference_channel >= spec.num_channels())
    throw ConfigError("mask_multiply: reference channel out of range");

  SourceEstimates est;
  est.config = spec.config;
  est.sample_rate = spec.sample_rate;
  est.data = Tensor3<cdouble>(F, T, target_classes.size());
  for (std::size_t idx = 0; idx < target_classes.size(); ++idx)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t t = 0; t < T; ++t)
        est.data(f, t, idx) = masks(f, t, target_classes[idx]) *
                              spec.data(f, t, reference_channel);
  return est;
}

}  // namespace bss
