#ifndef BSS_CACGMM_HPP
#define BSS_CACGMM_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "bss/hermitian.hpp"
#include "bss/stft.hpp"
#include "bss/tensor.hpp"

namespace bss {

// Complex angular central Gaussian mixture on unit-normalized observations:
// EM estimation with time-varying weights and an integrated frequency
// permutation solver.

// Observations normalized to unit length. Bins whose norm falls below the
// silence floor carry an arbitrary unit vector, are excluded from M-step
// sums and receive uniform posteriors.
struct NormalizedObservations {
  Tensor3<cdouble> y_tilde;       // F x T x M, unit vectors
  Matrix<std::uint8_t> silent;    // F x T

  std::size_t num_bins() const { return y_tilde.dim0(); }
  std::size_t num_frames() const { return y_tilde.dim1(); }
  std::size_t num_channels() const { return y_tilde.dim2(); }
};

struct SmmState {
  std::vector<CMatrix> B;   // F * K matrices, index f * K + k; trace M each
  RMatrix pi;               // T x K, rows on the simplex
  Tensor3<double> gamma;    // F x T x K posteriors
  std::size_t num_classes = 0;

  CMatrix& shape(std::size_t f, std::size_t k) {
    return B[f * num_classes + k];
  }
  const CMatrix& shape(std::size_t f, std::size_t k) const {
    return B[f * num_classes + k];
  }
};

NormalizedObservations normalize_observations(
    const MultichannelSpectrogram& spec, double floor = 1e-8);

// log density of the cACG:
//   log A(y; B) = log (M-1)! - log 2 - M log pi - log det B
//                 - M log(y^H B^{-1} y).
// The class decision is invariant to scaling B, so the trace normalization
// of the shape matrices never changes posteriors.
double cacg_log_pdf(const CVector& y_tilde, const CMatrix& B);

// Posteriors gamma(f,t,k) proportional to pi(t,k) * A(y; B(f,k)), computed
// in the log domain. Silent bins get uniform posteriors.
Tensor3<double> e_step(const NormalizedObservations& obs, const SmmState& state,
                       int num_threads = 1);

// Shape update with one fixed-point sweep:
//   B = M * sum_t gamma * y y^H / (y^H B_prev^{-1} y) / sum_t gamma,
// then symmetrized, diagonally loaded and trace-normalized to M.
void m_step_B(const NormalizedObservations& obs, const Tensor3<double>& gamma,
              SmmState& state, int num_threads = 1);

// pi(t,k) = mean over (non-silent) frequencies of gamma, floored at 1e-6
// and renormalized.
RMatrix m_step_pi(const Tensor3<double>& gamma,
                  const Matrix<std::uint8_t>& silent);

// Greedy global alignment of per-frequency class order against centroid
// activity profiles (cosine similarity, exhaustive over K! permutations,
// two passes, frequencies visited most-confident first). Mutates gamma and
// returns the applied permutation per frequency.
std::vector<std::vector<std::size_t>> solve_permutation(Tensor3<double>& gamma);

// Incomplete-data log-likelihood over non-silent bins; EM moves it up.
double log_likelihood(const NormalizedObservations& obs, const SmmState& state);

enum class SmmInit { kRandom, kMask };

struct CacgmmOptions {
  std::size_t num_classes = 3;
  std::size_t iterations = 20;
  std::uint64_t seed = 0;
  SmmInit init = SmmInit::kRandom;
  // Required for SmmInit::kMask: initial posteriors (F x T x num_classes).
  std::optional<Tensor3<double>> initial_masks;
  bool permutation_solver = true;
  double silence_floor = 1e-8;
  int num_threads = 1;
};

struct CacgmmResult {
  SmmState state;
  Tensor3<double> masks;  // final aligned posteriors
  std::size_t reseeded_classes = 0;
  double final_log_likelihood = 0.0;
  std::vector<double> log_likelihood_trace;  // one value per EM iteration
};

CacgmmResult run_cacgmm(const MultichannelSpectrogram& spec,
                        const CacgmmOptions& options);

// Index of the class with the lowest average mixture weight; the chain
// treats it as the noise class and drops it before beamforming.
std::size_t lowest_weight_class(const RMatrix& pi);

}  // namespace bss

#endif  // BSS_CACGMM_HPP
