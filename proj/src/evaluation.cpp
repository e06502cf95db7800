#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>

#include <png.h>

#include "rtts/evaluation.hpp"

namespace rtts {
namespace {

const double kMcdScale = 10.0 / std::numbers::ln10;

bool is_silent(const Waveform& w) {
  return std::all_of(w.samples.begin(), w.samples.end(), [](float s) { return s == 0.0f; });
}

double frame_distance(const double* a, const double* b, int64_t dims) {
  double acc = 0.0;
  for (int64_t d = 0; d < dims; ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

double duration_error(std::span<const double> pred, const DurationTargets& target) {
  if (pred.size() != target.durations.size()) {
    throw EvaluationError("duration_error: '" + target.utterance_id + "' has " +
                          std::to_string(pred.size()) + " predictions for " +
                          std::to_string(target.durations.size()) + " targets");
  }
  if (pred.empty()) throw EvaluationError("duration_error: empty sequence");
  double acc = 0.0;
  for (size_t j = 0; j < pred.size(); ++j) acc += std::abs(pred[j] - static_cast<double>(target.durations[j]));
  return acc / static_cast<double>(pred.size());
}

double corpus_duration_error(std::span<const double> per_utterance) {
  if (per_utterance.empty()) throw EvaluationError("corpus_duration_error: no utterances");
  return std::accumulate(per_utterance.begin(), per_utterance.end(), 0.0) /
         static_cast<double>(per_utterance.size());
}

torch::Tensor dct_matrix(int64_t n_in, int64_t n_out) {
  auto m = torch::empty({n_out, n_in}, torch::kFloat64);
  auto a = m.accessor<double, 2>();
  for (int64_t k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int64_t n = 0; n < n_in; ++n) {
      a[k][n] = scale * std::cos(std::numbers::pi * k * (2.0 * n + 1.0) / (2.0 * n_in));
    }
  }
  return m;
}

torch::Tensor mel_cepstrum(const Waveform& wave, const SpectralConfig& cfg, int64_t n_coeffs) {
  auto mel = mel_spectrogram(wave, cfg).frames.to(torch::kFloat64);  // [T, M]
  return torch::matmul(mel, dct_matrix(mel.size(1), n_coeffs).t()).contiguous();
}

DtwPath dtw_align(const torch::Tensor& a_in, const torch::Tensor& b_in) {
  auto a = a_in.to(torch::kFloat64).contiguous();
  auto b = b_in.to(torch::kFloat64).contiguous();
  if (a.dim() != 2 || b.dim() != 2 || a.size(1) != b.size(1)) {
    throw EvaluationError("dtw: expected [T, D] inputs with equal D");
  }
  const auto n = a.size(0);
  const auto m = b.size(0);
  const auto dims = a.size(1);
  if (n == 0 || m == 0) throw EvaluationError("dtw: empty input");
  const double inf = std::numeric_limits<double>::infinity();
  const auto w = m + 1;
  std::vector<double> acc(static_cast<size_t>((n + 1) * w), inf);
  acc[0] = 0.0;
  const double* pa = a.data_ptr<double>();
  const double* pb = b.data_ptr<double>();
  for (int64_t i = 1; i <= n; ++i) {
    for (int64_t j = 1; j <= m; ++j) {
      const double best = std::min({acc[static_cast<size_t>((i - 1) * w + j - 1)],
                                    acc[static_cast<size_t>((i - 1) * w + j)],
                                    acc[static_cast<size_t>(i * w + j - 1)]});
      acc[static_cast<size_t>(i * w + j)] = best + frame_distance(pa + (i - 1) * dims, pb + (j - 1) * dims, dims);
    }
  }
  DtwPath path;
  path.cost = acc.back();
  int64_t i = n, j = m;
  while (i > 0 && j > 0) {
    path.pairs.emplace_back(i - 1, j - 1);
    if (i == 1 && j == 1) break;
    const double diag = acc[static_cast<size_t>((i - 1) * w + j - 1)];
    const double up = acc[static_cast<size_t>((i - 1) * w + j)];
    const double left = acc[static_cast<size_t>(i * w + j - 1)];
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

double mcd_from_cepstra(const torch::Tensor& a_in, const torch::Tensor& b_in) {
  auto a = a_in.to(torch::kFloat64).contiguous();
  auto b = b_in.to(torch::kFloat64).contiguous();
  const auto path = dtw_align(a, b);
  const auto dims = a.size(1);
  double total = 0.0;
  for (auto [i, j] : path.pairs) {
    total += kMcdScale * std::sqrt(2.0) *
             frame_distance(a.data_ptr<double>() + i * dims, b.data_ptr<double>() + j * dims, dims);
  }
  return total / static_cast<double>(path.pairs.size());
}

double mcd13(const Waveform& ref, const Waveform& syn) {
  if (ref.samples.empty() || syn.samples.empty()) throw EvaluationError("mcd13: empty waveform");
  if (is_silent(ref) || is_silent(syn)) throw EvaluationError("mcd13: degenerate (all-silence) input");
  auto a = mel_cepstrum(ref).narrow(1, 1, 13);
  auto b = mel_cepstrum(syn).narrow(1, 1, 13);
  return mcd_from_cepstra(a, b);
}

int PitchConfig::hop_samples(int sample_rate) const {
  return static_cast<int>(std::lround(hop_seconds * sample_rate));
}

int PitchConfig::window_samples(int sample_rate) const {
  return static_cast<int>(std::lround(window_seconds * sample_rate));
}

std::vector<double> track_pitch(const Waveform& wave, const PitchConfig& cfg) {
  const int sr = wave.sample_rate;
  const int hop = cfg.hop_samples(sr);
  const int win = cfg.window_samples(sr);
  const int min_lag = static_cast<int>(std::floor(sr / cfg.fmax));
  const int max_lag = static_cast<int>(std::ceil(sr / cfg.fmin));
  const auto n = static_cast<int64_t>(wave.samples.size());
  const auto sample = [&](int64_t k) { return k >= 0 && k < n ? static_cast<double>(wave.samples[k]) : 0.0; };

  const int64_t frames = n / hop;
  std::vector<double> f0(static_cast<size_t>(frames), 0.0);
  std::vector<double> r(static_cast<size_t>(max_lag + 2), 0.0);
  for (int64_t t = 0; t < frames; ++t) {
    const int64_t start = t * hop + hop / 2 - win / 2;
    double e0 = 0.0;
    for (int k = 0; k < win; ++k) e0 += sample(start + k) * sample(start + k);
    if (e0 < 1e-8 * win) continue;

    double best = -1.0;
    for (int lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
      double cross = 0.0, el = 0.0;
      for (int k = 0; k < win; ++k) {
        const double y = sample(start + k + lag);
        cross += sample(start + k) * y;
        el += y * y;
      }
      r[static_cast<size_t>(lag)] = el > 0.0 ? cross / std::sqrt(e0 * el) : 0.0;
      if (lag >= min_lag && lag <= max_lag) best = std::max(best, r[static_cast<size_t>(lag)]);
    }
    if (best < cfg.voicing_threshold) continue;

    // The shortest-lag peak close to the global maximum avoids subharmonic picks.
    int chosen = -1;
    for (int lag = min_lag; lag <= max_lag; ++lag) {
      const double v = r[static_cast<size_t>(lag)];
      if (v >= 0.9 * best && v >= r[static_cast<size_t>(lag - 1)] && v >= r[static_cast<size_t>(lag + 1)]) {
        chosen = lag;
        break;
      }
    }
    if (chosen < 0) continue;
    const double left = r[static_cast<size_t>(chosen - 1)];
    const double mid = r[static_cast<size_t>(chosen)];
    const double right = r[static_cast<size_t>(chosen + 1)];
    const double denom = left - 2.0 * mid + right;
    const double delta = std::abs(denom) > 1e-12 ? 0.5 * (left - right) / denom : 0.0;
    f0[static_cast<size_t>(t)] = sr / (chosen + std::clamp(delta, -0.5, 0.5));
  }
  return f0;
}

double rmse_f0(const Waveform& ref, const Waveform& syn, const PitchConfig& cfg) {
  if (ref.samples.empty() || syn.samples.empty()) throw EvaluationError("rmse_f0: empty waveform");
  if (ref.sample_rate != syn.sample_rate) throw EvaluationError("rmse_f0: sample rates differ");
  SpectralConfig spec;
  spec.sample_rate = ref.sample_rate;
  spec.hop = cfg.hop_samples(ref.sample_rate);
  const auto f0_ref = track_pitch(ref, cfg);
  const auto f0_syn = track_pitch(syn, cfg);
  if (f0_ref.empty() || f0_syn.empty()) throw EvaluationError("rmse_f0: input shorter than one frame");

  auto a = mel_cepstrum(ref, spec).narrow(1, 1, 13);
  auto b = mel_cepstrum(syn, spec).narrow(1, 1, 13);
  const auto path = dtw_align(a, b);
  double acc = 0.0;
  int64_t count = 0;
  for (auto [i, j] : path.pairs) {
    if (i >= static_cast<int64_t>(f0_ref.size()) || j >= static_cast<int64_t>(f0_syn.size())) continue;
    const double x = f0_ref[static_cast<size_t>(i)];
    const double y = f0_syn[static_cast<size_t>(j)];
    if (x > 0.0 && y > 0.0) {
      acc += (x - y) * (x - y);
      ++count;
    }
  }
  if (count == 0) throw EvaluationError("rmse_f0: no co-voiced frames");
  return std::sqrt(acc / static_cast<double>(count));
}

GrayImage alignment_image(const AlignmentGrid& grid) {
  auto w = grid.weights.detach().to(torch::kFloat64).contiguous();
  if (w.dim() != 2) throw EvaluationError("alignment_image: expected a [T, N] grid");
  const auto frames = w.size(0);
  const auto tokens = w.size(1);
  GrayImage img{frames, tokens, std::vector<uint8_t>(static_cast<size_t>(frames * tokens), 0)};
  auto a = w.accessor<double, 2>();
  for (int64_t t = 0; t < frames; ++t) {
    double peak = 0.0;
    for (int64_t i = 0; i < tokens; ++i) peak = std::max(peak, a[t][i]);
    if (peak <= 0.0) continue;
    for (int64_t i = 0; i < tokens; ++i) {
      img.pixels[static_cast<size_t>(i * frames + t)] =
          static_cast<uint8_t>(std::lround(255.0 * a[t][i] / peak));
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  if (image.width < 1 || image.height < 1) throw EvaluationError("write_png: empty image");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw EvaluationError(path.string() + ": cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw EvaluationError("write_png: libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw EvaluationError(path.string() + ": PNG write failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int64_t row = 0; row < image.height; ++row) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + row * image.width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw EvaluationError(path.string() + ": write failed");
}

GrayImage read_png(const std::filesystem::path& path) {
  std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw EvaluationError(path.string() + ": cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw EvaluationError("read_png: libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw EvaluationError(path.string() + ": PNG read failed");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw EvaluationError(path.string() + ": expected 8-bit grayscale");
  }
  GrayImage img;
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.pixels.resize(static_cast<size_t>(img.width * img.height));
  for (int64_t row = 0; row < img.height; ++row) png_read_row(png, img.pixels.data() + row * img.width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void plot_alignment(const AlignmentGrid& grid, const std::filesystem::path& out_path) {
  write_png(out_path, alignment_image(grid));
}

}  // namespace rtts
