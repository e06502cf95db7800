#include <cmath>

#include "rtts/signal.hpp"

namespace rtts {
namespace {

constexpr double kMinLogHz = 1000.0;
constexpr double kLinearStep = 200.0 / 3.0;
constexpr double kMinLogMel = kMinLogHz / kLinearStep;

double log_step() { return std::log(6.4) / 27.0; }

}  // namespace

void SpectralConfig::validate() const {
  if (n_fft <= 0 || win_size <= 0 || hop <= 0 || n_mels <= 0) {
    throw SignalError("SpectralConfig: sizes must be positive");
  }
  if (win_size > n_fft) throw SignalError("SpectralConfig: win_size must not exceed n_fft");
  if (hop > n_fft) throw SignalError("SpectralConfig: hop must not exceed n_fft");
  if (!(fmin >= 0.0 && fmax > fmin && fmax <= sample_rate / 2.0)) {
    throw SignalError("SpectralConfig: need 0 <= fmin < fmax <= sample_rate / 2");
  }
  if (!(log_floor > 0.0)) throw SignalError("SpectralConfig: log_floor must be positive");
}

int64_t num_frames(int64_t num_samples, const SpectralConfig& cfg) { return num_samples / cfg.hop; }

double hz_to_mel(double hz) {
  if (hz >= kMinLogHz) return kMinLogMel + std::log(hz / kMinLogHz) / log_step();
  return hz / kLinearStep;
}

double mel_to_hz(double mel) {
  if (mel >= kMinLogMel) return kMinLogHz * std::exp(log_step() * (mel - kMinLogMel));
  return mel * kLinearStep;
}

torch::Tensor mel_filterbank(const SpectralConfig& cfg) {
  cfg.validate();
  const int n_bins = cfg.n_fft / 2 + 1;
  std::vector<double> fft_hz(n_bins);
  for (int k = 0; k < n_bins; ++k) fft_hz[k] = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;

  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  }

  auto basis = torch::zeros({cfg.n_mels, n_bins}, torch::kFloat64);
  auto acc = basis.accessor<double, 2>();
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lower_w = edges[m + 1] - edges[m];
    const double upper_w = edges[m + 2] - edges[m + 1];
    const double norm = 2.0 / (edges[m + 2] - edges[m]);
    for (int k = 0; k < n_bins; ++k) {
      const double rise = (fft_hz[k] - edges[m]) / lower_w;
      const double fall = (edges[m + 2] - fft_hz[k]) / upper_w;
      acc[m][k] = std::max(0.0, std::min(rise, fall)) * norm;
    }
  }
  return basis.to(torch::kFloat32);
}

MelExtractor::MelExtractor(SpectralConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  window_ = torch::hann_window(cfg_.win_size, torch::TensorOptions().dtype(torch::kFloat32));
  basis_ = mel_filterbank(cfg_);
}

torch::Tensor MelExtractor::operator()(const torch::Tensor& audio) const {
  TORCH_CHECK(audio.dim() == 1 || audio.dim() == 2, "mel: expected [S] or [B, S] audio");
  const bool batched = audio.dim() == 2;
  auto x = batched ? audio : audio.unsqueeze(0);
  if (x.size(1) < cfg_.win_size) {
    throw SignalError("mel: input of " + std::to_string(x.size(1)) +
                      " samples is shorter than the analysis window (" +
                      std::to_string(cfg_.win_size) + ")");
  }
  x = x.to(torch::kFloat32);
  const int64_t pad_left = (cfg_.n_fft - cfg_.hop) / 2;
  const int64_t pad_right = cfg_.n_fft - cfg_.hop - pad_left;
  x = torch::nn::functional::pad(
          x.unsqueeze(1),
          torch::nn::functional::PadFuncOptions({pad_left, pad_right}).mode(torch::kReflect))
          .squeeze(1);
  auto spec = torch::stft(x, cfg_.n_fft, cfg_.hop, cfg_.win_size, window_.to(x.device()),
                          /*normalized=*/false, /*onesided=*/true, /*return_complex=*/true);
  auto ri = torch::view_as_real(spec);  // [B, F, T, 2]
  auto magnitude = torch::sqrt(ri.pow(2).sum(-1) + 1e-9);
  auto mel = torch::matmul(basis_.to(x.device()), magnitude);  // [B, n_mels, T]
  auto out = torch::log(torch::clamp_min(mel, cfg_.log_floor)).transpose(1, 2).contiguous();
  return batched ? out : out.squeeze(0);
}

MelSpectrogram mel_spectrogram(const Waveform& wave, const SpectralConfig& cfg) {
  if (wave.sample_rate != cfg.sample_rate) {
    throw SignalError("mel: waveform rate " + std::to_string(wave.sample_rate) +
                      " differs from configured rate " + std::to_string(cfg.sample_rate));
  }
  MelExtractor extractor(cfg);
  torch::NoGradGuard no_grad;
  return {extractor(to_tensor(wave)), cfg.hop};
}

torch::Tensor to_tensor(const Waveform& wave) {
  return torch::from_blob(const_cast<float*>(wave.samples.data()),
                          {static_cast<int64_t>(wave.samples.size())}, torch::kFloat32)
      .clone();
}

Waveform from_tensor(const torch::Tensor& samples, int sample_rate) {
  auto flat = samples.detach().to(torch::kFloat32).contiguous().view({-1});
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(flat.data_ptr<float>(), flat.data_ptr<float>() + flat.numel());
  return w;
}

}  // namespace rtts
