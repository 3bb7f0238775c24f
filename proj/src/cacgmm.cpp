#include "bss/cacgmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bss/errors.hpp"
#include "bss/parallel.hpp"
#include "bss/rng.hpp"

namespace bss {

namespace {

constexpr double kPiFloor = 1e-6;
constexpr double kReseedMassFraction = 1e-3;

double log_factorial(std::size_t n) {
  return std::lgamma(static_cast<double>(n) + 1.0);
}

// Trace-normalize to trace(B) = M.
CMatrix normalize_trace(const CMatrix& b) {
  const double tr = trace_real(b);
  const std::size_t m = b.rows();
  CMatrix out = b;
  if (tr > 0.0) {
    const double scale = static_cast<double>(m) / tr;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) out(i, j) *= scale;
  }
  return out;
}

CMatrix random_shape(std::size_t m, Rng& rng) {
  // I + 0.1 * G G^H with G complex Gaussian, then trace-normalized.
  CMatrix g(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      g(i, j) = cdouble(rng.gaussian(), rng.gaussian()) / std::sqrt(2.0);
  CMatrix b = CMatrix::identity(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      cdouble s = 0.0;
      for (std::size_t r = 0; r < m; ++r) s += g(i, r) * std::conj(g(j, r));
      b(i, j) += 0.1 * s;
    }
  return normalize_trace(hermitize(b));
}

double cosine_similarity(const std::vector<double>& a,
                         const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace

NormalizedObservations normalize_observations(
    const MultichannelSpectrogram& spec, double floor) {
  const std::size_t F = spec.num_bins();
  const std::size_t T = spec.num_frames();
  const std::size_t M = spec.num_channels();

  NormalizedObservations obs;
  obs.y_tilde = Tensor3<cdouble>(F, T, M);
  obs.silent = Matrix<std::uint8_t>(F, T, 0);

  // Global RMS of the bin norms sets the silence threshold.
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < spec.data.size(); ++i)
    sum_sq += std::norm(spec.data.data()[i]);
  const double rms =
      std::sqrt(sum_sq / static_cast<double>(std::max<std::size_t>(F * T, 1)));
  const double threshold = floor * rms;

  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t t = 0; t < T; ++t) {
      const cdouble* y = spec.data.slice(f, t);
      double nrm_sq = 0.0;
      for (std::size_t m = 0; m < M; ++m) nrm_sq += std::norm(y[m]);
      const double nrm = std::sqrt(nrm_sq);
      cdouble* out = obs.y_tilde.slice(f, t);
      if (nrm >= threshold && nrm > 0.0) {
        for (std::size_t m = 0; m < M; ++m) out[m] = y[m] / nrm;
      } else {
        out[0] = 1.0;  // arbitrary unit vector, excluded from sums
        obs.silent(f, t) = 1;
      }
    }
  }
  return obs;
}

double cacg_log_pdf(const CVector& y_tilde, const CMatrix& B) {
  const std::size_t m = y_tilde.size();
  const CholeskyFactor chol(B);
  const double q = std::max(chol.quadform(y_tilde.data()), 1e-300);
  return log_factorial(m - 1) - std::log(2.0) -
         static_cast<double>(m) * std::log(M_PI) - chol.log_det() -
         static_cast<double>(m) * std::log(q);
}

Tensor3<double> e_step(const NormalizedObservations& obs, const SmmState& state,
                       int num_threads) {
  const std::size_t F = obs.num_bins();
  const std::size_t T = obs.num_frames();
  const std::size_t M = obs.num_channels();
  const std::size_t K = state.num_classes;
  const double mm = static_cast<double>(M);

  Tensor3<double> gamma(F, T, K);
  const double log_const =
      log_factorial(M - 1) - std::log(2.0) - mm * std::log(M_PI);

  parallel_for(F, num_threads, [&](std::size_t f) {
    // Factor each class shape once per frequency.
    std::vector<CholeskyFactor> chol;
    std::vector<double> log_det(K);
    chol.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      chol.emplace_back(state.shape(f, k));
      log_det[k] = chol.back().log_det();
    }
    std::vector<double> lg(K);
    for (std::size_t t = 0; t < T; ++t) {
      double* g = gamma.slice(f, t);
      if (obs.silent(f, t)) {
        for (std::size_t k = 0; k < K; ++k) g[k] = 1.0 / static_cast<double>(K);
        continue;
      }
      const cdouble* y = obs.y_tilde.slice(f, t);
      double lg_max = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) {
        const double q = std::max(chol[k].quadform(y), 1e-300);
        lg[k] = std::log(state.pi(t, k)) + log_const - log_det[k] -
                mm * std::log(q);
        lg_max = std::max(lg_max, lg[k]);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        lg[k] = std::exp(lg[k] - lg_max);
        sum += lg[k];
      }
      for (std::size_t k = 0; k < K; ++k) g[k] = lg[k] / sum;
    }
  });
  return gamma;
}

void m_step_B(const NormalizedObservations& obs, const Tensor3<double>& gamma,
              SmmState& state, int num_threads) {
  const std::size_t F = obs.num_bins();
  const std::size_t T = obs.num_frames();
  const std::size_t M = obs.num_channels();
  const std::size_t K = state.num_classes;

  parallel_for(F, num_threads, [&](std::size_t f) {
    for (std::size_t k = 0; k < K; ++k) {
      const CholeskyFactor chol_prev(state.shape(f, k));
      CMatrix acc(M, M);
      double mass = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        if (obs.silent(f, t)) continue;
        const double g = gamma(f, t, k);
        if (g <= 0.0) continue;
        const cdouble* y = obs.y_tilde.slice(f, t);
        const double q = std::max(chol_prev.quadform(y), 1e-300);
        const double w = g / q;
        mass += g;
        for (std::size_t i = 0; i < M; ++i) {
          const cdouble wy = w * y[i];
          for (std::size_t j = 0; j <= i; ++j)
            acc(i, j) += wy * std::conj(y[j]);
        }
      }
      if (mass <= 1e-300) continue;  // dead class at this frequency
      const double scale = static_cast<double>(M) / mass;
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          acc(i, j) *= scale;
          acc(j, i) = std::conj(acc(i, j));
        }
      state.shape(f, k) =
          normalize_trace(load_diagonal(hermitize(acc), kDefaultLoading));
    }
  });
}

RMatrix m_step_pi(const Tensor3<double>& gamma,
                  const Matrix<std::uint8_t>& silent) {
  const std::size_t F = gamma.dim0();
  const std::size_t T = gamma.dim1();
  const std::size_t K = gamma.dim2();

  RMatrix pi(T, K, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t count = 0;
    for (std::size_t f = 0; f < F; ++f) {
      if (silent(f, t)) continue;
      ++count;
      for (std::size_t k = 0; k < K; ++k) pi(t, k) += gamma(f, t, k);
    }
    if (count == 0) {
      for (std::size_t k = 0; k < K; ++k)
        pi(t, k) = 1.0 / static_cast<double>(K);
    } else {
      for (std::size_t k = 0; k < K; ++k)
        pi(t, k) /= static_cast<double>(count);
    }
    // Floor against class death, then renormalize to the simplex.
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      pi(t, k) = std::max(pi(t, k), kPiFloor);
      sum += pi(t, k);
    }
    for (std::size_t k = 0; k < K; ++k) pi(t, k) /= sum;
  }
  return pi;
}

std::vector<std::vector<std::size_t>> solve_permutation(
    Tensor3<double>& gamma) {
  const std::size_t F = gamma.dim0();
  const std::size_t T = gamma.dim1();
  const std::size_t K = gamma.dim2();

  std::vector<std::vector<std::size_t>> result(
      F, std::vector<std::size_t>(K));
  for (std::size_t f = 0; f < F; ++f)
    std::iota(result[f].begin(), result[f].end(), 0);
  if (K < 2) return result;

  // Visit order: most decisive posteriors first (largest entropy gap).
  std::vector<double> gap(F, 0.0);
  const double log_k = std::log(static_cast<double>(K));
  for (std::size_t f = 0; f < F; ++f) {
    double entropy = 0.0;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < K; ++k) {
        const double g = gamma(f, t, k);
        if (g > 0.0) entropy -= g * std::log(g);
      }
    gap[f] = static_cast<double>(T) * log_k - entropy;
  }
  std::vector<std::size_t> order(F);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gap[a] > gap[b]; });

  // Centroid profiles start from the average over all frequencies.
  std::vector<std::vector<double>> centroid(K, std::vector<double>(T, 0.0));
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < K; ++k)
        centroid[k][t] += gamma(f, t, k) / static_cast<double>(F);
  double centroid_weight = 1.0;

  std::vector<std::size_t> base(K);
  std::iota(base.begin(), base.end(), 0);
  std::vector<std::vector<double>> profile(K, std::vector<double>(T));
  std::vector<double> buffer(K);

  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t f : order) {
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t t = 0; t < T; ++t) profile[k][t] = gamma(f, t, k);

      // Exhaustive search over class orders (K <= 4 in practice).
      std::vector<std::size_t> perm = base;
      std::vector<std::size_t> best_perm = base;
      double best_score = -std::numeric_limits<double>::infinity();
      do {
        double score = 0.0;
        for (std::size_t k = 0; k < K; ++k)
          score += cosine_similarity(profile[perm[k]], centroid[k]);
        if (score > best_score) {
          best_score = score;
          best_perm = perm;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));

      bool identity = true;
      for (std::size_t k = 0; k < K; ++k)
        if (best_perm[k] != k) identity = false;
      if (!identity) {
        for (std::size_t t = 0; t < T; ++t) {
          double* g = gamma.slice(f, t);
          for (std::size_t k = 0; k < K; ++k) buffer[k] = g[best_perm[k]];
          for (std::size_t k = 0; k < K; ++k) g[k] = buffer[k];
        }
        // Compose with the permutation applied so far at this frequency.
        std::vector<std::size_t> composed(K);
        for (std::size_t k = 0; k < K; ++k)
          composed[k] = result[f][best_perm[k]];
        result[f] = composed;
      }

      // Running mean over the aligned profiles; confident frequencies
      // accumulate first.
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t t = 0; t < T; ++t)
          centroid[k][t] =
              (centroid[k][t] * centroid_weight + gamma(f, t, k)) /
              (centroid_weight + 1.0);
      centroid_weight += 1.0;
    }
  }
  return result;
}

double log_likelihood(const NormalizedObservations& obs,
                      const SmmState& state) {
  const std::size_t F = obs.num_bins();
  const std::size_t T = obs.num_frames();
  const std::size_t M = obs.num_channels();
  const std::size_t K = state.num_classes;
  const double mm = static_cast<double>(M);
  const double log_const =
      log_factorial(M - 1) - std::log(2.0) - mm * std::log(M_PI);

  double total = 0.0;
  for (std::size_t f = 0; f < F; ++f) {
    std::vector<CholeskyFactor> chol;
    std::vector<double> log_det(K);
    chol.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      chol.emplace_back(state.shape(f, k));
      log_det[k] = chol.back().log_det();
    }
    for (std::size_t t = 0; t < T; ++t) {
      if (obs.silent(f, t)) continue;
      const cdouble* y = obs.y_tilde.slice(f, t);
      double lg_max = -std::numeric_limits<double>::infinity();
      std::vector<double> lg(K);
      for (std::size_t k = 0; k < K; ++k) {
        const double q = std::max(chol[k].quadform(y), 1e-300);
        lg[k] = std::log(state.pi(t, k)) + log_const - log_det[k] -
                mm * std::log(q);
        lg_max = std::max(lg_max, lg[k]);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < K; ++k) sum += std::exp(lg[k] - lg_max);
      total += lg_max + std::log(sum);
    }
  }
  return total;
}

std::size_t lowest_weight_class(const RMatrix& pi) {
  const std::size_t T = pi.rows();
  const std::size_t K = pi.cols();
  std::size_t best = 0;
  double best_avg = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    double avg = 0.0;
    for (std::size_t t = 0; t < T; ++t) avg += pi(t, k);
    avg /= static_cast<double>(T);
    if (avg < best_avg) {
      best_avg = avg;
      best = k;
    }
  }
  return best;
}

namespace {

// Mean outer product of the non-silent normalized observations,
// trace-normalized; the reseed perturbation is built around it.
CMatrix global_shape(const NormalizedObservations& obs) {
  const std::size_t M = obs.num_channels();
  CMatrix acc(M, M);
  double count = 0.0;
  for (std::size_t f = 0; f < obs.num_bins(); ++f)
    for (std::size_t t = 0; t < obs.num_frames(); ++t) {
      if (obs.silent(f, t)) continue;
      const cdouble* y = obs.y_tilde.slice(f, t);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j)
          acc(i, j) += y[i] * std::conj(y[j]);
      count += 1.0;
    }
  if (count == 0.0) return CMatrix::identity(M);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < M; ++j) acc(i, j) /= count;
  return normalize_trace(load_diagonal(hermitize(acc), 1e-6));
}

}  // namespace

CacgmmResult run_cacgmm(const MultichannelSpectrogram& spec,
                        const CacgmmOptions& options) {
  const std::size_t K = options.num_classes;
  if (K == 0) throw ConfigError("cacgmm: need at least one class");
  if (options.iterations == 0)
    throw ConfigError("cacgmm: need at least one iteration");

  const NormalizedObservations obs =
      normalize_observations(spec, options.silence_floor);
  const std::size_t F = obs.num_bins();
  const std::size_t T = obs.num_frames();
  const std::size_t M = obs.num_channels();

  CacgmmResult result;
  SmmState& state = result.state;
  state.num_classes = K;
  state.pi = RMatrix(T, K, 1.0 / static_cast<double>(K));
  state.B.resize(F * K);

  Rng rng(options.seed, Stream::kSmmInit);
  if (options.init == SmmInit::kMask) {
    if (!options.initial_masks ||
        options.initial_masks->dim0() != F ||
        options.initial_masks->dim1() != T ||
        options.initial_masks->dim2() != K)
      throw ConfigError("cacgmm: mask init requires F x T x K masks");
    // Seed the shapes from the provided posteriors via one M-step with
    // identity weights.
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t k = 0; k < K; ++k)
        state.shape(f, k) = CMatrix::identity(M);
    state.gamma = *options.initial_masks;
    m_step_B(obs, state.gamma, state, options.num_threads);
    state.pi = m_step_pi(state.gamma, obs.silent);
  } else {
    // Frequency-shared random perturbations reduce the initial permutation
    // ambiguity across frequencies.
    std::vector<CMatrix> class_shape;
    class_shape.reserve(K);
    for (std::size_t k = 0; k < K; ++k) class_shape.push_back(random_shape(M, rng));
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t k = 0; k < K; ++k) state.shape(f, k) = class_shape[k];
  }

  Rng reseed_rng(options.seed, Stream::kSmmReseed);
  const double reseed_threshold =
      kReseedMassFraction * static_cast<double>(F) * static_cast<double>(T);

  for (std::size_t it = 0; it < options.iterations; ++it) {
    result.log_likelihood_trace.push_back(log_likelihood(obs, state));
    state.gamma = e_step(obs, state, options.num_threads);
    if (options.permutation_solver) solve_permutation(state.gamma);
    m_step_B(obs, state.gamma, state, options.num_threads);
    state.pi = m_step_pi(state.gamma, obs.silent);

    // Reseed classes whose posterior mass collapsed.
    const CMatrix base = global_shape(obs);
    for (std::size_t k = 0; k < K; ++k) {
      double mass = 0.0;
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t t = 0; t < T; ++t) mass += state.gamma(f, t, k);
      if (mass < reseed_threshold) {
        CMatrix perturbed = base;
        const CMatrix noise = random_shape(M, reseed_rng);
        for (std::size_t i = 0; i < M; ++i)
          for (std::size_t j = 0; j < M; ++j)
            perturbed(i, j) += 0.2 * (noise(i, j) - (i == j ? 1.0 : 0.0));
        perturbed = normalize_trace(
            load_diagonal(hermitize(perturbed), kDefaultLoading));
        for (std::size_t f = 0; f < F; ++f) state.shape(f, k) = perturbed;
        ++result.reseeded_classes;
      }
    }
  }

  state.gamma = e_step(obs, state, options.num_threads);
  if (options.permutation_solver) solve_permutation(state.gamma);
  result.final_log_likelihood = log_likelihood(obs, state);
  result.masks = state.gamma;
  return result;
}

}  // namespace bss
