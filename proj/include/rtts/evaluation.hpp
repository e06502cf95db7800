#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "rtts/aligner.hpp"
#include "rtts/data.hpp"
#include "rtts/signal.hpp"

namespace rtts {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean |pred_j - target_j| over tokens, in frames.
double duration_error(std::span<const double> pred, const DurationTargets& target);

/// Corpus value: the mean of per-utterance duration errors.
double corpus_duration_error(std::span<const double> per_utterance);

/// Orthonormal DCT-II basis, [n_out, n_in].
torch::Tensor dct_matrix(int64_t n_in, int64_t n_out);

/// Mel cepstrum c0..c(n_coeffs - 1) per frame: DCT of the log-mel spectrogram
/// produced by the training front end. [T, n_coeffs], float64.
torch::Tensor mel_cepstrum(const Waveform& wave, const SpectralConfig& cfg = {}, int64_t n_coeffs = 14);

struct DtwPath {
  std::vector<std::pair<int64_t, int64_t>> pairs;
  double cost = 0.0;
};

/// Hard DTW under Euclidean frame distance with diagonal, down and right
/// moves; ties prefer the diagonal.
DtwPath dtw_align(const torch::Tensor& a, const torch::Tensor& b);

/// (10 / ln 10) * sqrt(2 * sum_d (a_d - b_d)^2), averaged over the DTW path.
/// Inputs are [T, D] cepstra that already exclude c0.
double mcd_from_cepstra(const torch::Tensor& a, const torch::Tensor& b);

/// MCD over c1..c13. Throws EvaluationError if either signal is silent.
double mcd13(const Waveform& ref, const Waveform& syn);

struct PitchConfig {
  double fmin = 50.0;
  double fmax = 500.0;
  double window_seconds = 0.025;
  double hop_seconds = 0.010;
  double voicing_threshold = 0.3;

  int hop_samples(int sample_rate) const;
  int window_samples(int sample_rate) const;
};

/// Normalized cross-correlation pitch tracker. Frame t is centred on sample
/// t * hop + hop / 2 and there are floor(n / hop) frames. Unvoiced frames
/// are 0 Hz.
std::vector<double> track_pitch(const Waveform& wave, const PitchConfig& cfg = {});

/// RMSE of f0 (Hz) over frame pairs that are voiced in both signals after DTW
/// alignment of their mel cepstra (computed at the pitch hop). Throws
/// EvaluationError when no pair is co-voiced.
double rmse_f0(const Waveform& ref, const Waveform& syn, const PitchConfig& cfg = {});

struct GrayImage {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> pixels;  // row-major

  uint8_t at(int64_t row, int64_t col) const { return pixels[static_cast<size_t>(row * width + col)]; }
};

/// Heatmap with one row per token (row 0 = first token) and one column per
/// frame. Each column is scaled so its largest weight is white.
GrayImage alignment_image(const AlignmentGrid& grid);

void write_png(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_png(const std::filesystem::path& path);

/// Renders a [T, N] alignment grid to a grayscale PNG.
void plot_alignment(const AlignmentGrid& grid, const std::filesystem::path& out_path);

}  // namespace rtts
