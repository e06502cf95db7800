#pragma once

// Duration-search aligner.
//
// The duration predictor (the agent) proposes a non-negative duration per
// token. Each training step the environment renders two alignments from it:
// the prediction as-is (KEEP) and a copy perturbed by +alpha, -alpha,
// +alpha, ... (SHIFT). Both are turned into waveforms over the same random
// segment, and whichever mel-spectrogram loss is lower wins, either for the
// whole segment or per token. Tokens where SHIFT won are pulled towards their
// shifted duration by an L1 loss; tokens where KEEP won contribute nothing.

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "rtts/encoder.hpp"

namespace rtts {

inline constexpr double kDefaultSigma2 = 10.0;
inline constexpr int64_t kDefaultSegmentFrames = 128;

class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class RewardMode { segment_wise, phoneme_wise };

std::string to_string(RewardMode mode);
RewardMode reward_mode_from_string(std::string_view name);

struct DurationPredictorConfig {
  int64_t input_dim = kHiddenDim;
  int64_t filter_size = 256;
  int64_t kernel_size = 3;
  double dropout = 0.1;
};

/// Two conv -> ReLU -> LayerNorm -> dropout stages, a linear projection to one
/// scalar per token and a softplus so durations are non-negative. PAD
/// positions are forced to zero.
class DurationPredictorImpl : public torch::nn::Module {
 public:
  explicit DurationPredictorImpl(const DurationPredictorConfig& cfg = {});

  /// Returns [B, N] durations in frames.
  torch::Tensor forward(const EncoderState& state);

 private:
  DurationPredictorConfig cfg_;
  torch::nn::Conv1d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Dropout drop1_{nullptr}, drop2_{nullptr};
  torch::nn::Linear proj_{nullptr};
};
TORCH_MODULE(DurationPredictor);

/// Signed shift applied per token: +alpha, -alpha, +alpha, ... over the first
/// `num_tokens` positions. With an odd count the last token gets 0 so the
/// pattern sums to zero. Positions past `num_tokens` get 0.
std::vector<double> shift_pattern(int64_t num_tokens, double alpha, int64_t width = -1);

struct ShiftResult {
  torch::Tensor durations;  // same shape as the input, no gradient
  int64_t clamped = 0;      // entries that went negative and were clamped to 0
};

/// Builds the SHIFT durations from the KEEP durations. Accepts [N] or [B, N]
/// (with a [B, N] mask). Both reward modes use the same alternating pattern;
/// they differ only in how rewards are granted. Negative results are clamped
/// to 0 and the clipped mass is not redistributed, so the total is preserved
/// only when nothing was clamped.
ShiftResult apply_shift(const torch::Tensor& d_pred, double alpha, RewardMode mode,
                        const torch::Tensor& mask = {});

struct ScaledDurations {
  torch::Tensor lengths;  // l_j, rescaled so they sum to m_length
  torch::Tensor centers;  // c_j = cumsum(l)_j - l_j / 2
};

/// l = d * m_length / sum(d); differentiable w.r.t. d. Throws AlignmentError
/// if sum(d) is not positive.
ScaledDurations scale_durations(const torch::Tensor& d, double m_length);

/// Batched form: d [B, N], m_lengths [B] (one target length per row), mask [B, N].
ScaledDurations scale_durations(const torch::Tensor& d, const torch::Tensor& m_lengths,
                                const torch::Tensor& mask);

/// Centres for already-final lengths (inference path).
torch::Tensor duration_centers(const torch::Tensor& lengths);

struct AlignmentGrid {
  torch::Tensor weights;  // [T, N] or [B, T, N]; each row sums to 1
  double sigma2 = kDefaultSigma2;
};

struct UpsampleResult {
  torch::Tensor frames;  // [T, C] or [B, T, C]
  AlignmentGrid grid;
};

/// Gaussian upsampling. For frames t = 1..T the weight of token i is
///   w_t^i = exp(-(t - c_i)^2 / sigma2) / sum_j exp(-(t - c_j)^2 / sigma2),
/// normalized over every (unmasked) token, and frame t is sum_i w_t^i h_i.
/// hidden: [N, C] with centers [N], or [B, N, C] with centers [B, N] and an
/// optional [B, N] mask.
UpsampleResult gaussian_upsample(const torch::Tensor& hidden, const torch::Tensor& centers,
                                 double sigma2, int64_t num_frames, const torch::Tensor& mask = {});

struct SegmentSpec {
  int64_t gamma = kDefaultSegmentFrames;
  int64_t offset = 0;

  int64_t end() const { return offset + gamma; }
};

/// Uniform offset in [0, T - gamma]. When T < gamma the offset is 0 and the
/// caller zero-pads both the frames and the reference audio up to gamma.
SegmentSpec sample_segment(int64_t num_frames, int64_t gamma, std::mt19937_64& rng);

/// Per-token one-hot KEEP/SHIFT decision.
struct RewardVector {
  std::vector<uint8_t> keep;
  std::vector<uint8_t> shift;

  int64_t size() const { return static_cast<int64_t>(keep.size()); }
  int64_t shift_count() const;
  double shift_fraction() const;

  static RewardVector all_keep(int64_t n);
};

/// PyTorch-style adaptive average pooling of a 1-D sequence to `out_size`
/// bins: bin i averages [floor(i L / n), ceil((i + 1) L / n)).
std::vector<double> adaptive_average_pool(std::span<const double> values, int64_t out_size);

/// KEEP wins at index j iff L_keep_j <= L_shift_j (ties keep).
///
/// segment_wise: the losses are reduced to their mean (a single value passes
/// through unchanged) and the one decision is broadcast to all `num_tokens`.
/// phoneme_wise: per-frame losses are pooled to `num_tokens` bins with
/// adaptive_average_pool and compared bin by bin.
/// Throws AlignmentError on non-finite or empty input.
RewardVector compute_reward(std::span<const double> loss_keep, std::span<const double> loss_shift,
                            RewardMode mode, int64_t num_tokens);
RewardVector compute_reward(double loss_keep, double loss_shift, int64_t num_tokens);

/// Indices [first, last) of tokens whose span (cum_{i-1}, cum_i] overlaps the
/// frame range (offset, offset + frames].
std::pair<int64_t, int64_t> tokens_in_segment(std::span<const double> lengths, int64_t offset,
                                              int64_t frames);

/// sum_j |d_pred_j - (d_pred_j * r_keep_j + d_shift_j * r_shift_j)|.
/// d_shift and the rewards are constants; gradient reaches d_pred only where
/// SHIFT won. For [B, N] inputs the per-utterance sums are averaged.
torch::Tensor reinforced_duration_loss(const torch::Tensor& d_pred, const torch::Tensor& d_shift,
                                       const torch::Tensor& r_keep, const torch::Tensor& r_shift);
torch::Tensor reinforced_duration_loss(const torch::Tensor& d_pred, const torch::Tensor& d_shift,
                                       const RewardVector& reward);

/// (m_length - sum_j d_j)^2 on the unscaled predictions. For [B, N] input,
/// m_length is [B] and the squared errors are averaged.
torch::Tensor total_duration_loss(const torch::Tensor& d_pred, double m_length);
torch::Tensor total_duration_loss(const torch::Tensor& d_pred, const torch::Tensor& m_lengths);

/// Error-diffusing rounding: durations_j = round(S_j) - round(S_{j-1}) where
/// S is the running sum, so the total equals round(sum(d)).
std::vector<int64_t> round_durations(std::span<const double> d);

}  // namespace rtts
