#ifndef BSS_STFT_HPP
#define BSS_STFT_HPP

#include <cstddef>

#include "bss/audio_io.hpp"
#include "bss/tensor.hpp"

namespace bss {

// Square-root Hann analysis/synthesis pair. The pair satisfies COLA for any
// shift that divides the window size with at least 2x overlap, which makes
// every sample perfectly reconstructible after symmetric zero padding.
struct StftConfig {
  std::size_t window_size = 1024;  // power of two; fft_size == window_size
  std::size_t shift = 256;

  std::size_t fft_size() const { return window_size; }
  std::size_t num_bins() const { return window_size / 2 + 1; }
  std::size_t pad() const { return window_size - shift; }

  bool operator==(const StftConfig& o) const {
    return window_size == o.window_size && shift == o.shift;
  }
};

// Throws ConfigError unless window_size is a power of two, shift divides it
// and the overlap factor is >= 2 (sqrt-Hann COLA requirement).
void validate(const StftConfig& config);

// Complex STFT tensor indexed (frequency, frame, channel).
struct MultichannelSpectrogram {
  Tensor3<cdouble> data;  // F x T x M
  StftConfig config;
  unsigned sample_rate = 8000;

  std::size_t num_bins() const { return data.dim0(); }
  std::size_t num_frames() const { return data.dim1(); }
  std::size_t num_channels() const { return data.dim2(); }
};

std::size_t num_frames_for(std::size_t num_samples, const StftConfig& config);

// Analysis. Frame t covers padded samples [t*shift, t*shift + window_size);
// the signal is zero padded by window_size - shift at both ends so every
// original sample receives full synthesis weight. Throws SignalTooShort when
// the signal is shorter than one window.
MultichannelSpectrogram stft(const TimeSignal& signal,
                             const StftConfig& config);

// Weighted overlap-add synthesis with the same sqrt-Hann window, trimmed to
// target_length samples. Exact inverse of stft up to numerical error.
TimeSignal istft(const MultichannelSpectrogram& spec,
                 std::size_t target_length);

std::vector<double> sqrt_hann_window(std::size_t size);

}  // namespace bss

#endif  // BSS_STFT_HPP
