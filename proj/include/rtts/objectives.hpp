#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace rtts {

class ObjectiveError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MelL1 {
  torch::Tensor loss;       // scalar: sum_t ||gt_t - pred_t||_1 / (T * n_mels)
  torch::Tensor per_frame;  // [T] or [B, T]: mean |gt - pred| over mel bins
};

/// gt, pred: [T, M] or [B, T, M] with identical shapes.
MelL1 mel_l1(const torch::Tensor& mel_gt, const torch::Tensor& mel_pred);

struct SoftDTWConfig {
  double omega = 1.0;  // warp penalty for single-sided advances
  double tau = 0.01;   // soft-min temperature
  std::optional<int64_t> band_width;  // Sakoe-Chiba radius, in frames

  void validate() const;
};

void to_json(nlohmann::json& j, const SoftDTWConfig& c);
void from_json(const nlohmann::json& j, SoftDTWConfig& c);

/// Soft-min: -tau * log(sum_k exp(-x_k / tau)), computed stably.
double soft_min(double a, double b, double c, double tau);

/// Pairwise L1 distance between frames: [Tg, M] x [Tp, M] -> [Tg, Tp].
torch::Tensor l1_cost_matrix(const torch::Tensor& mel_gt, const torch::Tensor& mel_pred);

/// Soft-DTW over a precomputed cost matrix. Paths start at (1, 1), end at
/// (Tg, Tp) and move diagonally (no penalty) or advance one side only
/// (penalty omega); every visited cell adds its cost. The hard minimum of the
/// recursion is replaced by soft_min. Differentiable w.r.t. the costs via the
/// expected-alignment backward pass.
torch::Tensor soft_dtw_from_costs(const torch::Tensor& costs, const SoftDTWConfig& cfg = {});

/// Soft-DTW between two mel sequences using per-frame L1 as the step cost.
///
/// The summation in the usual printed total-cost formula puts the whole
/// spectrogram L1 inside every path step; here each step pays only for its
/// aligned frame pair, plus omega for the two single-sided moves.
torch::Tensor soft_dtw(const torch::Tensor& mel_gt, const torch::Tensor& mel_pred,
                       const SoftDTWConfig& cfg = {});

}  // namespace rtts
