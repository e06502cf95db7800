#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "rtts/signal.hpp"
#include "test_util.hpp"

using namespace rtts;

namespace {

std::vector<float> sine(double hz, int rate, int64_t n, double amp = 0.5) {
  std::vector<float> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * hz * i / rate));
  return out;
}

template <class T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_raw_wav(const std::filesystem::path& p, int channels, int rate, const std::vector<int16_t>& data) {
  std::ofstream f(p, std::ios::binary);
  const uint32_t bytes = static_cast<uint32_t>(data.size() * 2);
  f.write("RIFF", 4);
  put<uint32_t>(f, 36 + bytes);
  f.write("WAVEfmt ", 8);
  put<uint32_t>(f, 16);
  put<uint16_t>(f, 1);
  put<uint16_t>(f, static_cast<uint16_t>(channels));
  put<uint32_t>(f, static_cast<uint32_t>(rate));
  put<uint32_t>(f, static_cast<uint32_t>(rate * channels * 2));
  put<uint16_t>(f, static_cast<uint16_t>(channels * 2));
  put<uint16_t>(f, 16);
  f.write("data", 4);
  put<uint32_t>(f, bytes);
  f.write(reinterpret_cast<const char*>(data.data()), bytes);
}

// Frequency of the largest DFT magnitude, by direct evaluation over 1 Hz steps.
double dft_peak_hz(const std::vector<float>& x, int rate, double lo, double hi) {
  double best = 0.0, best_hz = lo;
  for (double hz = lo; hz <= hi; hz += 1.0) {
    double re = 0.0, im = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      re += x[i] * std::cos(2 * std::numbers::pi * hz * i / rate);
      im -= x[i] * std::sin(2 * std::numbers::pi * hz * i / rate);
    }
    const double mag = re * re + im * im;
    if (mag > best) {
      best = mag;
      best_hz = hz;
    }
  }
  return best_hz;
}

}  // namespace

TEST_CASE("one second of 22050 Hz PCM round-trips through WAV") {
  TempDir dir;
  Waveform w{sine(220, kSampleRate, kSampleRate), kSampleRate};
  write_wav(dir.path / "a.wav", w);
  auto back = load_audio(dir.path / "a.wav");
  CHECK(back.sample_rate == kSampleRate);
  REQUIRE(back.size() == 22050);
  for (int64_t i = 0; i < back.size(); i += 97) CHECK(std::abs(back.samples[i] - w.samples[i]) < 1e-4);
}

TEST_CASE("44.1 kHz input is resampled to 22.05 kHz with its fundamental intact") {
  TempDir dir;
  std::vector<int16_t> pcm;
  for (float s : sine(1000.0, 44100, 8820)) pcm.push_back(static_cast<int16_t>(std::lround(s * 32767)));
  write_raw_wav(dir.path / "hi.wav", 1, 44100, pcm);
  auto w = load_audio(dir.path / "hi.wav");
  CHECK(w.sample_rate == 22050);
  CHECK(std::abs(w.size() - 4410) <= 1);
  CHECK(dft_peak_hz(w.samples, 22050, 900, 1100) == doctest::Approx(1000.0).epsilon(0.002));
}

TEST_CASE("stereo files are rejected") {
  TempDir dir;
  write_raw_wav(dir.path / "st.wav", 2, 22050, std::vector<int16_t>(200, 0));
  CHECK_THROWS_AS(load_audio(dir.path / "st.wav"), UnsupportedChannelsError);
}

TEST_CASE("missing and truncated files raise read errors") {
  TempDir dir;
  CHECK_THROWS_AS(load_audio(dir.path / "nope.wav"), AudioReadError);
  std::ofstream(dir.path / "bad.wav") << "RIFF";
  CHECK_THROWS_AS(load_audio(dir.path / "bad.wav"), AudioReadError);
}

TEST_CASE("resample output length is floor(n * to / from)") {
  std::vector<float> x(1001, 0.1f);
  CHECK(resample(x, 44100, 22050).size() == 500);
  CHECK(resample(x, 16000, 22050).size() == 1001 * 22050 / 16000);
  CHECK(resample(x, 22050, 22050).size() == 1001);
}

TEST_CASE("silence maps to the log floor everywhere") {
  Waveform w{std::vector<float>(4096, 0.0f), kSampleRate};
  auto mel = mel_spectrogram(w);
  CHECK(mel.num_frames() == 16);
  CHECK(mel.n_mels() == 80);
  CHECK(torch::allclose(mel.frames, torch::full_like(mel.frames, std::log(1e-5))));
}

TEST_CASE("frame count is samples / hop") {
  for (int64_t frames : {4, 5, 17, 128}) {
    Waveform w{sine(300, kSampleRate, frames * 256), kSampleRate};
    CHECK(mel_spectrogram(w).num_frames() == frames);
  }
  CHECK(num_frames(32768, SpectralConfig{}) == 128);
}

TEST_CASE("inputs shorter than one window are rejected") {
  MelExtractor mel;
  CHECK_THROWS_AS(mel(torch::zeros({1000})), SignalError);
}

TEST_CASE("a 440 Hz sine peaks in the mel band whose centre is nearest 440 Hz") {
  SpectralConfig cfg;
  auto fb = mel_filterbank(cfg);
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  int64_t expected = 0;
  double best = 1e9;
  for (int64_t m = 0; m < cfg.n_mels; ++m) {
    const double centre = mel_to_hz(lo + (hi - lo) * (m + 1) / (cfg.n_mels + 1));
    if (std::abs(centre - 440.0) < best) {
      best = std::abs(centre - 440.0);
      expected = m;
    }
  }
  Waveform w{sine(440, kSampleRate, 256 * 40), kSampleRate};
  auto mean = mel_spectrogram(w).frames.mean(0);
  CHECK(mean.argmax().item<int64_t>() == expected);
}

TEST_CASE("filterbank is non-negative and every band has support") {
  auto fb = mel_filterbank(SpectralConfig{});
  CHECK(fb.sizes() == torch::IntArrayRef({80, 513}));
  CHECK(fb.min().item<float>() >= 0.0f);
  CHECK(fb.sum(1).min().item<float>() > 0.0f);
}

TEST_CASE("slaney mel scale inverts") {
  for (double hz : {0.0, 100.0, 999.0, 1000.0, 4000.0, 8000.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
  CHECK(hz_to_mel(1000.0) == doctest::Approx(15.0));
}

TEST_CASE("mel extraction is bit-deterministic") {
  Waveform w{sine(523, kSampleRate, 256 * 20), kSampleRate};
  CHECK(torch::equal(mel_spectrogram(w).frames, mel_spectrogram(w).frames));
}

TEST_CASE("delaying by one hop shifts frames by one index") {
  torch::manual_seed(3);
  auto x = torch::randn({256 * 30}) * 0.2;
  auto delayed = torch::cat({torch::zeros({256}), x.narrow(0, 0, 256 * 29)});
  MelExtractor mel;
  auto a = mel(x);
  auto b = mel(delayed);
  // Interior frames only: the first frames see reflect padding.
  auto lhs = b.narrow(0, 4, 24);
  auto rhs = a.narrow(0, 3, 24);
  CHECK(torch::allclose(lhs, rhs, 0.0, 1e-5));
}

TEST_CASE("a gamma * 256 sample segment yields gamma frames") {
  MelExtractor mel;
  for (int64_t g : {4, 32, 128}) CHECK(mel(torch::zeros({2, g * 256})).size(1) == g);
}

TEST_CASE("mel extraction is differentiable") {
  auto x = (torch::randn({2048}) * 0.3).requires_grad_();
  MelExtractor mel;
  mel(x).sum().backward();
  CHECK(x.grad().defined());
  CHECK(torch::isfinite(x.grad()).all().item<bool>());
  CHECK(x.grad().abs().sum().item<double>() > 0.0);
}
