#ifndef BSS_CHAIN_HPP
#define BSS_CHAIN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bss/beamforming.hpp"
#include "bss/cacgmm.hpp"
#include "bss/overiva.hpp"
#include "bss/stft.hpp"

namespace bss {

// Serial SMM -> IVA pipeline: mixture-model masks and beamforming at one
// STFT size, handoff through the time domain, per-frequency least-squares
// initialization of the IVA demixing rows at the other size.

// Identity demixing matrices at every frequency.
Tensor3<cdouble> init_identity(std::size_t num_bins, std::size_t channels);

// Source rows from the conjugate-transposed top-K eigenvectors of the
// observation covariance (descending eigenvalue, canonical phase);
// background rows completed with the structured update.
Tensor3<cdouble> init_pca(const std::vector<CMatrix>& sigma_y, std::size_t K,
                          std::size_t M);

struct LsInitResult {
  Tensor3<cdouble> W_tilde;          // F x M x M
  std::size_t zero_estimate_rows = 0;  // replaced by PCA rows
  std::size_t background_fallbacks = 0;
};

// w(f,k) = (sum_t y y^H)^{-1} sum_t y d_hat^*; identically-zero estimates
// fall back to the PCA row for that (f,k). Spectrogram and estimates must
// share one STFT config.
LsInitResult ls_init_from_estimates(const MultichannelSpectrogram& spec_iva,
                                    const SourceEstimates& estimates_iva);

struct ChainConfig {
  std::size_t num_speakers = 2;
  StftConfig smm_stft{1024, 256};
  StftConfig iva_stft{2048, 512};
  std::size_t smm_iterations = 20;
  std::size_t iva_iterations = 50;
  std::uint64_t seed = 0;
  bool noise_class = true;  // SMM runs speakers + 1 classes when set
  bool permutation_solver = true;
  std::size_t rescale_reference = 0;
  std::optional<std::size_t> forced_beamform_reference;
  bool mask_multiply_handoff = false;  // debug path, beamforming is default
  int num_threads = 1;
  // When set, stage artifacts are written here (WAV + BSST tensors).
  std::optional<std::string> dump_dir;
};

struct ChainReport {
  std::size_t smm_classes = 0;
  std::size_t noise_class_index = 0;
  double smm_final_log_likelihood = 0.0;
  std::size_t smm_reseeds = 0;
  std::size_t beamform_degenerate_bins = 0;
  std::vector<std::size_t> beamform_references;
  std::size_t ls_zero_rows = 0;
  std::size_t ls_background_fallbacks = 0;
  IvaDiagnostics iva;
};

struct ChainResult {
  std::vector<TimeSignal> sources;  // K mono signals, input length each
  ChainReport report;
};

ChainResult run_chain(const TimeSignal& signal, const ChainConfig& config);

}  // namespace bss

#endif  // BSS_CHAIN_HPP
