#ifndef BSS_AUDIO_IO_HPP
#define BSS_AUDIO_IO_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace bss {

// Time-domain multichannel signal. Samples are stored frame-major
// (num_samples x num_channels), i.e. exactly the WAV interleaving.
struct TimeSignal {
  std::vector<double> samples;
  std::size_t num_channels = 1;
  unsigned sample_rate = 8000;  // metadata only, never resampled

  std::size_t num_samples() const {
    return num_channels == 0 ? 0 : samples.size() / num_channels;
  }
  double& at(std::size_t n, std::size_t ch) {
    return samples[n * num_channels + ch];
  }
  double at(std::size_t n, std::size_t ch) const {
    return samples[n * num_channels + ch];
  }
  // Copy of a single channel.
  std::vector<double> channel(std::size_t ch) const;
};

TimeSignal mono_signal(std::vector<double> samples, unsigned sample_rate);

enum class WavFormat { kFloat32, kPcm16 };

// Reads a RIFF/WAVE file with PCM16/24/32 or IEEE float32 samples. Integer
// PCM is normalized by 2^(bits-1); float passes through unchanged.
TimeSignal read_wav(const std::string& path);

// Writes float32 (lossless round-trip) or PCM16 (clipped to [-1, 1-2^-15],
// round-to-nearest quantization).
void write_wav(const std::string& path, const TimeSignal& signal,
               WavFormat format = WavFormat::kFloat32);

}  // namespace bss

#endif  // BSS_AUDIO_IO_HPP
