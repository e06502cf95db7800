#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace rtts {

inline constexpr int kSampleRate = 22050;

class AudioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing, truncated, or not a RIFF/WAVE file we can decode.
class AudioReadError : public AudioError {
 public:
  using AudioError::AudioError;
};

/// Only mono input is accepted.
class UnsupportedChannelsError : public AudioError {
 public:
  UnsupportedChannelsError(const std::string& path, int channels);
  int channels() const { return channels_; }

 private:
  int channels_;
};

class SignalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Waveform {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  int64_t size() const { return static_cast<int64_t>(samples.size()); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Reads a mono WAV (PCM 16/24/32-bit or IEEE float32) without resampling.
Waveform read_wav(const std::filesystem::path& path);

/// Reads a mono WAV and resamples it to 22050 Hz when needed. Samples are
/// scaled to [-1, 1].
Waveform load_audio(const std::filesystem::path& path);

/// Writes 16-bit PCM; samples outside [-1, 1] are clipped.
void write_wav(const std::filesystem::path& path, const Waveform& wave);

/// Band-limited (windowed-sinc) sample-rate conversion. The output holds
/// floor(n * to / from) samples.
std::vector<float> resample(std::span<const float> input, int from_rate, int to_rate);

struct SpectralConfig {
  int n_fft = 1024;
  int win_size = 1024;
  int hop = 256;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  int sample_rate = kSampleRate;
  // Natural-log compression floor applied to mel magnitudes.
  double log_floor = 1e-5;

  void validate() const;
};

/// Number of frames produced for `num_samples` samples: floor(num_samples / hop).
int64_t num_frames(int64_t num_samples, const SpectralConfig& cfg);

struct MelSpectrogram {
  torch::Tensor frames;  // [T, n_mels], float32
  int hop = 256;

  int64_t num_frames() const { return frames.size(0); }
  int64_t n_mels() const { return frames.size(1); }
};

// Slaney mel scale (linear below 1 kHz, logarithmic above).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Slaney-normalized triangular filterbank, [n_mels, n_fft / 2 + 1].
torch::Tensor mel_filterbank(const SpectralConfig& cfg);

/// Holds the analysis window and filterbank for one configuration.
///
/// Audio is reflect-padded by (n_fft - hop) / 2 on both sides and framed
/// without centering, so a signal of k * hop samples yields exactly k frames
/// and frame t covers samples [t * hop, (t + 1) * hop) at its centre.
/// Magnitudes are sqrt(re^2 + im^2 + 1e-9), projected onto the mel basis and
/// compressed with log(max(x, log_floor)). Differentiable w.r.t. the input.
class MelExtractor {
 public:
  explicit MelExtractor(SpectralConfig cfg = {});

  /// audio: [S] or [B, S] -> [T, n_mels] or [B, T, n_mels].
  torch::Tensor operator()(const torch::Tensor& audio) const;

  const SpectralConfig& config() const { return cfg_; }

 private:
  SpectralConfig cfg_;
  torch::Tensor window_;
  torch::Tensor basis_;
};

MelSpectrogram mel_spectrogram(const Waveform& wave, const SpectralConfig& cfg = {});

torch::Tensor to_tensor(const Waveform& wave);
Waveform from_tensor(const torch::Tensor& samples, int sample_rate = kSampleRate);

}  // namespace rtts
