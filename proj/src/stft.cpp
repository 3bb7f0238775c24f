#include "bss/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "bss/errors.hpp"

namespace bss {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// FFTW plan creation is not thread safe; executions on private buffers are.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// One-dimensional real FFT pair with private, aligned buffers.
class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        real_(fftw_alloc_real(n)),
        cplx_(fftw_alloc_complex(n / 2 + 1)) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_, cplx_,
                                FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), cplx_, real_,
                                FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(cplx_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // Unnormalized one-sided forward transform.
  void forward(const double* in, cdouble* out) {
    for (std::size_t i = 0; i < n_; ++i) real_[i] = in[i];
    fftw_execute(fwd_);
    for (std::size_t f = 0; f < n_ / 2 + 1; ++f)
      out[f] = cdouble(cplx_[f][0], cplx_[f][1]);
  }

  // Inverse of forward including the 1/N normalization.
  void backward(const cdouble* in, double* out) {
    for (std::size_t f = 0; f < n_ / 2 + 1; ++f) {
      cplx_[f][0] = in[f].real();
      cplx_[f][1] = in[f].imag();
    }
    fftw_execute(bwd_);
    const double inv = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = real_[i] * inv;
  }

 private:
  std::size_t n_;
  double* real_;
  fftw_complex* cplx_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

}  // namespace

void validate(const StftConfig& config) {
  if (!is_power_of_two(config.window_size))
    throw ConfigError("stft: window size must be a power of two");
  if (config.shift == 0 || config.window_size % config.shift != 0)
    throw ConfigError("stft: shift must divide the window size");
  if (config.window_size / config.shift < 2)
    throw ConfigError("stft: sqrt-hann needs overlap factor >= 2 for COLA");
}

std::vector<double> sqrt_hann_window(std::size_t size) {
  // Periodic Hann; its square overlap-adds to a constant for shift = size/k.
  std::vector<double> w(size);
  for (std::size_t n = 0; n < size; ++n) {
    const double hann =
        0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(n) /
                              static_cast<double>(size)));
    w[n] = std::sqrt(hann);
  }
  return w;
}

std::size_t num_frames_for(std::size_t num_samples, const StftConfig& config) {
  // Chosen so that every original sample is covered by the full overlap
  // factor window_size/shift after symmetric padding.
  return (num_samples - 1) / config.shift + config.window_size / config.shift;
}

MultichannelSpectrogram stft(const TimeSignal& signal,
                             const StftConfig& config) {
  validate(config);
  const std::size_t n = signal.num_samples();
  const std::size_t window = config.window_size;
  const std::size_t shift = config.shift;
  if (n < window) throw SignalTooShort("stft: signal shorter than one window");

  const std::size_t num_frames = num_frames_for(n, config);
  const std::size_t bins = config.num_bins();
  const std::size_t channels = signal.num_channels;
  const std::size_t pad = config.pad();
  const std::size_t padded_len = (num_frames - 1) * shift + window;

  const std::vector<double> win = sqrt_hann_window(window);

  MultichannelSpectrogram spec;
  spec.config = config;
  spec.sample_rate = signal.sample_rate;
  spec.data = Tensor3<cdouble>(bins, num_frames, channels);

  RealFft fft(window);
  std::vector<double> padded(padded_len, 0.0);
  std::vector<double> frame(window);
  std::vector<cdouble> spectrum(bins);

  for (std::size_t ch = 0; ch < channels; ++ch) {
    std::fill(padded.begin(), padded.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) padded[pad + i] = signal.at(i, ch);
    for (std::size_t t = 0; t < num_frames; ++t) {
      const double* x = padded.data() + t * shift;
      for (std::size_t j = 0; j < window; ++j) frame[j] = win[j] * x[j];
      fft.forward(frame.data(), spectrum.data());
      for (std::size_t f = 0; f < bins; ++f) spec.data(f, t, ch) = spectrum[f];
    }
  }
  return spec;
}

TimeSignal istft(const MultichannelSpectrogram& spec,
                 std::size_t target_length) {
  const StftConfig& config = spec.config;
  validate(config);
  const std::size_t window = config.window_size;
  const std::size_t shift = config.shift;
  const std::size_t bins = spec.num_bins();
  const std::size_t num_frames = spec.num_frames();
  const std::size_t channels = spec.num_channels();
  const std::size_t pad = config.pad();
  const std::size_t padded_len = (num_frames - 1) * shift + window;

  const std::vector<double> win = sqrt_hann_window(window);
  std::vector<double> win_sq_sum(padded_len, 0.0);
  for (std::size_t t = 0; t < num_frames; ++t)
    for (std::size_t j = 0; j < window; ++j)
      win_sq_sum[t * shift + j] += win[j] * win[j];

  TimeSignal out;
  out.num_channels = channels;
  out.sample_rate = spec.sample_rate;
  out.samples.assign(target_length * channels, 0.0);

  RealFft fft(window);
  std::vector<cdouble> spectrum(bins);
  std::vector<double> frame(window);
  std::vector<double> acc(padded_len);

  for (std::size_t ch = 0; ch < channels; ++ch) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = 0; t < num_frames; ++t) {
      for (std::size_t f = 0; f < bins; ++f) spectrum[f] = spec.data(f, t, ch);
      fft.backward(spectrum.data(), frame.data());
      double* y = acc.data() + t * shift;
      for (std::size_t j = 0; j < window; ++j) y[j] += win[j] * frame[j];
    }
    for (std::size_t i = 0; i < target_length; ++i) {
      const std::size_t q = pad + i;
      if (q < padded_len && win_sq_sum[q] > 1e-12)
        out.at(i, ch) = acc[q] / win_sq_sum[q];
    }
  }
  return out;
}

}  // namespace bss
