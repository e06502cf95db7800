#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "rtts/signal.hpp"

namespace rtts {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint16_t read_u16(const unsigned char* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void put_u16(std::ostream& os, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void put_u32(std::ostream& os, uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>(v >> 24)};
  os.write(b, 4);
}

struct FormatChunk {
  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t bits = 0;
};

float decode_sample(const unsigned char* p, const FormatChunk& fmt) {
  if (fmt.format == kFormatFloat) {
    float v;
    std::memcpy(&v, p, sizeof v);
    return v;
  }
  switch (fmt.bits) {
    case 16:
      return static_cast<float>(static_cast<int16_t>(read_u16(p))) / 32768.0f;
    case 24: {
      int32_t v = static_cast<int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v |= ~0xFFFFFF;
      return static_cast<float>(v) / 8388608.0f;
    }
    case 32:
      return static_cast<float>(static_cast<int32_t>(read_u32(p)) / 2147483648.0);
    default:
      return 0.0f;
  }
}

}  // namespace

UnsupportedChannelsError::UnsupportedChannelsError(const std::string& path, int channels)
    : AudioError(path + ": expected mono audio, found " + std::to_string(channels) +
                 " channels"),
      channels_(channels) {}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioReadError(path.string() + ": cannot open file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) {
    return AudioReadError(path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  FormatChunk fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  size_t data_size = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const size_t size = read_u32(chunk + 4);
    const size_t body = pos + 8;
    const size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || available < 16) throw fail("truncated fmt chunk");
      const unsigned char* f = chunk + 8;
      fmt.format = read_u16(f);
      fmt.channels = read_u16(f + 2);
      fmt.sample_rate = read_u32(f + 4);
      fmt.bits = read_u16(f + 14);
      if (fmt.format == kFormatExtensible) {
        if (size < 40 || available < 40) throw fail("truncated extensible fmt chunk");
        fmt.format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      // Streams written with an unknown length often carry 0 or 0xFFFFFFFF.
      data_size = std::min(size, available);
      if (size == 0) data_size = available;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  if (fmt.channels != 1) throw UnsupportedChannelsError(path.string(), fmt.channels);
  const bool pcm_ok = fmt.format == kFormatPcm && (fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32);
  const bool float_ok = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm_ok && !float_ok) {
    throw fail("unsupported sample format (format " + std::to_string(fmt.format) + ", " +
               std::to_string(fmt.bits) + " bits)");
  }
  if (fmt.sample_rate == 0) throw fail("zero sample rate");

  const size_t width = fmt.bits / 8;
  const size_t n = data_size / width;
  Waveform wave;
  wave.sample_rate = static_cast<int>(fmt.sample_rate);
  wave.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    float v = decode_sample(data + i * width, fmt);
    if (!std::isfinite(v)) throw fail("non-finite sample at index " + std::to_string(i));
    wave.samples[i] = std::clamp(v, -1.0f, 1.0f);
  }
  return wave;
}

Waveform load_audio(const std::filesystem::path& path) {
  Waveform wave = read_wav(path);
  if (wave.sample_rate != kSampleRate) {
    wave.samples = resample(wave.samples, wave.sample_rate, kSampleRate);
    wave.sample_rate = kSampleRate;
  }
  return wave;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AudioError(path.string() + ": cannot open for writing");
  const auto n = static_cast<uint32_t>(wave.samples.size());
  const uint32_t data_bytes = n * 2;
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<uint32_t>(wave.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (float s : wave.samples) {
    const float c = std::isfinite(s) ? std::clamp(s, -1.0f, 1.0f) : 0.0f;
    put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(std::lround(c * 32767.0f))));
  }
  if (!out) throw AudioError(path.string() + ": write failed");
}

std::vector<float> resample(std::span<const float> input, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw SignalError("resample: rates must be positive");
  if (from_rate == to_rate) return {input.begin(), input.end()};

  const double ratio = static_cast<double>(to_rate) / from_rate;
  // Cutoff in cycles per input sample, slightly below Nyquist of the slower rate.
  const double cutoff = 0.5 * std::min(1.0, ratio) * 0.97;
  constexpr double kZeroCrossings = 16.0;
  const double half_width = kZeroCrossings / (2.0 * cutoff);

  const auto n_in = static_cast<int64_t>(input.size());
  const auto n_out = static_cast<int64_t>(
      static_cast<long double>(n_in) * to_rate / from_rate);
  std::vector<float> out(static_cast<size_t>(n_out));
  for (int64_t n = 0; n < n_out; ++n) {
    const double centre = static_cast<double>(n) * from_rate / to_rate;
    const auto lo = std::max<int64_t>(0, static_cast<int64_t>(std::ceil(centre - half_width)));
    const auto hi = std::min<int64_t>(n_in - 1, static_cast<int64_t>(std::floor(centre + half_width)));
    double acc = 0.0;
    for (int64_t k = lo; k <= hi; ++k) {
      const double x = static_cast<double>(k) - centre;
      const double u = 2.0 * cutoff * x;
      const double sinc = std::abs(u) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * u) / (std::numbers::pi * u);
      const double window = 0.5 + 0.5 * std::cos(std::numbers::pi * x / half_width);
      acc += input[static_cast<size_t>(k)] * 2.0 * cutoff * sinc * window;
    }
    out[static_cast<size_t>(n)] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace rtts
