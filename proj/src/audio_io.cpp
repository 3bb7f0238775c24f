#include "bss/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bss/errors.hpp"

namespace bss {

std::vector<double> TimeSignal::channel(std::size_t ch) const {
  std::vector<double> out(num_samples());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = at(n, ch);
  return out;
}

TimeSignal mono_signal(std::vector<double> samples, unsigned sample_rate) {
  TimeSignal s;
  s.samples = std::move(samples);
  s.num_channels = 1;
  s.sample_rate = sample_rate;
  return s;
}

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(x & 0xFF);
  v.push_back((x >> 8) & 0xFF);
  v.push_back((x >> 16) & 0xFF);
  v.push_back((x >> 24) & 0xFF);
}

void put_u16(std::vector<unsigned char>& v, std::uint16_t x) {
  v.push_back(x & 0xFF);
  v.push_back((x >> 8) & 0xFF);
}

void put_tag(std::vector<unsigned char>& v, const char* tag) {
  v.insert(v.end(), tag, tag + 4);
}

}  // namespace

TimeSignal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoFailure("read error on " + path);

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw CorruptHeader(path + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t channels = 0;
  bool have_fmt = false;
  std::size_t data_off = 0, data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t chunk_len = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_len > bytes.size())
      throw CorruptHeader(path + ": chunk extends past end of file");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw CorruptHeader(path + ": fmt chunk too small");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      sample_rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        // Sub-format GUID starts with the real format code.
        if (chunk_len < 40)
          throw CorruptHeader(path + ": truncated extensible fmt chunk");
        format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_off == 0)
    throw CorruptHeader(path + ": missing fmt or data chunk");
  if (channels == 0 || sample_rate == 0)
    throw CorruptHeader(path + ": invalid fmt fields");

  const bool pcm = format == kFormatPcm;
  const bool flt = format == kFormatFloat;
  if (!pcm && !flt)
    throw UnsupportedFormat(path + ": unsupported codec (format tag " +
                            std::to_string(format) + ")");
  if (pcm && bits != 16 && bits != 24 && bits != 32)
    throw UnsupportedFormat(path + ": unsupported PCM depth " +
                            std::to_string(bits));
  if (flt && bits != 32)
    throw UnsupportedFormat(path + ": only float32 is supported");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  if (frame_bytes == 0 || data_len % frame_bytes != 0)
    throw CorruptHeader(path + ": data chunk not a whole number of frames");
  const std::size_t num_frames = data_len / frame_bytes;
  if (num_frames == 0) throw CorruptHeader(path + ": empty data chunk");

  TimeSignal sig;
  sig.num_channels = channels;
  sig.sample_rate = sample_rate;
  sig.samples.resize(num_frames * channels);

  const unsigned char* d = bytes.data() + data_off;
  for (std::size_t i = 0; i < num_frames * channels; ++i) {
    const unsigned char* p = d + i * bytes_per_sample;
    double v = 0.0;
    if (flt) {
      float x;
      std::memcpy(&x, p, 4);
      v = static_cast<double>(x);
    } else if (bits == 16) {
      const std::int16_t x = static_cast<std::int16_t>(read_u16(p));
      v = static_cast<double>(x) / 32768.0;
    } else if (bits == 24) {
      std::int32_t x = p[0] | (p[1] << 8) | (p[2] << 16);
      if (x & 0x800000) x |= ~0xFFFFFF;  // sign extend
      v = static_cast<double>(x) / 8388608.0;
    } else {  // 32-bit int
      const std::int32_t x = static_cast<std::int32_t>(read_u32(p));
      v = static_cast<double>(x) / 2147483648.0;
    }
    sig.samples[i] = v;
  }
  return sig;
}

void write_wav(const std::string& path, const TimeSignal& signal,
               WavFormat format) {
  if (signal.num_channels == 0 || signal.num_samples() == 0)
    throw IoFailure("write_wav: empty signal");

  const bool flt = format == WavFormat::kFloat32;
  const std::uint16_t bits = flt ? 32 : 16;
  const std::size_t frame_bytes = (bits / 8) * signal.num_channels;
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(signal.num_samples() * frame_bytes);

  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_len);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, flt ? kFormatFloat : kFormatPcm);
  put_u16(out, static_cast<std::uint16_t>(signal.num_channels));
  put_u32(out, signal.sample_rate);
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate * frame_bytes));
  put_u16(out, static_cast<std::uint16_t>(frame_bytes));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_len);

  for (double v : signal.samples) {
    if (flt) {
      const float x = static_cast<float>(v);
      unsigned char b[4];
      std::memcpy(b, &x, 4);
      out.insert(out.end(), b, b + 4);
    } else {
      const double clipped = std::clamp(v, -1.0, 1.0 - 1.0 / 32768.0);
      const long q = std::lround(clipped * 32768.0);
      const std::int16_t x =
          static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767));
      put_u16(out, static_cast<std::uint16_t>(x));
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(out.data()),
           static_cast<std::streamsize>(out.size()));
  os.flush();
  if (!os) throw IoFailure("write failed on " + path);
}

}  // namespace bss
