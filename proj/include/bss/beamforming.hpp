#ifndef BSS_BEAMFORMING_HPP
#define BSS_BEAMFORMING_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "bss/hermitian.hpp"
#include "bss/stft.hpp"
#include "bss/tensor.hpp"

namespace bss {

// Mask-driven linear source extraction: spatial covariance estimation,
// MVDR in the Souden formulation, SNR-proxy reference channel selection.

// Complex source estimate tensor indexed (frequency, frame, source).
struct SourceEstimates {
  Tensor3<cdouble> data;  // F x T x K
  StftConfig config;
  unsigned sample_rate = 8000;

  std::size_t num_bins() const { return data.dim0(); }
  std::size_t num_frames() const { return data.dim1(); }
  std::size_t num_sources() const { return data.dim2(); }
};

struct BeamformerSet {
  Tensor3<cdouble> w;  // F x K x M coefficients
  std::vector<std::size_t> reference_channel;  // per source
  std::size_t degenerate_bins = 0;  // (f, k) cells that produced zero vectors
};

struct ScmPerFrequency {
  std::vector<CMatrix> phi;  // one loaded Hermitian matrix per frequency
  bool degenerate = false;   // true when some bin had (near) zero mask mass
};

// Phi_f = sum_t mask(f,t) y y^H / max(sum_t mask(f,t), 1e-10), symmetrized
// and diagonally loaded.
ScmPerFrequency estimate_scm(const MultichannelSpectrogram& spec,
                             const RMatrix& mask);

// Souden MVDR: w = (Phi_n^{-1} Phi_x / trace(Phi_n^{-1} Phi_x)) e_ref.
// A vanishing trace yields a zero vector and sets *degenerate.
CVector mvdr_souden(const CMatrix& phi_target, const CMatrix& phi_distortion,
                    std::size_t ref, bool* degenerate = nullptr);

// Picks the reference maximizing the output SNR proxy
// sum_f (w^H Phi_x w) / (w^H Phi_n w); ties break toward the lowest index.
std::size_t select_reference_channel(
    const std::vector<CMatrix>& phi_target,
    const std::vector<CMatrix>& phi_distortion,
    const std::vector<std::vector<CVector>>& candidate_w);

// d_hat(f,t,k) = w(f,k)^H y(f,t).
SourceEstimates extract_with_beamformer(const MultichannelSpectrogram& spec,
                                        const BeamformerSet& bf);

struct BeamformFromMasksResult {
  SourceEstimates estimates;
  BeamformerSet beamformers;
};

// Full mask -> MVDR pipeline. Each target class is extracted against the
// complement mask (everything else pooled); the reference channel is chosen
// globally per source unless forced.
BeamformFromMasksResult beamform_from_masks(
    const MultichannelSpectrogram& spec, const Tensor3<double>& masks,
    const std::vector<std::size_t>& target_classes,
    std::optional<std::size_t> forced_reference = std::nullopt);

// Debug path: mask-multiplied estimates (no beamforming).
SourceEstimates mask_multiply(const MultichannelSpectrogram& spec,
                              const Tensor3<double>& masks,
                              const std::vector<std::size_t>& target_classes,
                              std::size_t reference_channel);

}  // namespace bss

#endif  // BSS_BEAMFORMING_HPP
