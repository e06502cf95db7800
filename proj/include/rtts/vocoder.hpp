#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "rtts/encoder.hpp"
#include "rtts/layers.hpp"

namespace rtts {

inline constexpr int64_t kUpsampleFactor = 256;

struct DecoderConfig {
  int64_t input_dim = kHiddenDim;
  int64_t initial_channels = 512;
  std::vector<int64_t> upsample_rates{8, 8, 2, 2};
  std::vector<int64_t> upsample_kernels{16, 16, 4, 4};
  std::vector<int64_t> resblock_kernels{3, 7, 11};
  std::vector<std::vector<int64_t>> resblock_dilations{{1, 3, 5}};

  /// "v1" (512 channels), "v2" (128) or "small" (32, for desk-scale runs).
  static DecoderConfig preset(const std::string& name);
  int64_t total_upsampling() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const DecoderConfig& c);
void from_json(const nlohmann::json& j, DecoderConfig& c);

/// Frame-to-waveform decoder: conv_pre, then per stage leaky-ReLU,
/// transposed convolution and an MRF block, then conv_post and tanh.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const DecoderConfig& cfg = {});

  /// frames: [B, F, input_dim] -> audio [B, F * 256] in (-1, 1).
  torch::Tensor forward(const torch::Tensor& frames);

  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  WNConv1d pre_{nullptr}, post_{nullptr};
  std::vector<WNConvTranspose1d> ups_;
  std::vector<MRF> mrfs_;
};
TORCH_MODULE(Decoder);

struct DiscriminatorConfig {
  std::vector<int64_t> periods{2, 3, 5, 7, 11};
  int64_t num_scales = 3;
  /// Channel widths are divided by this (1 = full size).
  int64_t width_divisor = 1;

  static DiscriminatorConfig preset(const std::string& name);
  void validate() const;
};

void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

struct DiscriminatorOutput {
  torch::Tensor logits;                // flattened per item: [B, K]
  std::vector<torch::Tensor> features;  // intermediate activations
};

/// Views audio as a [L / p, p] grid (reflect-padded to a multiple of p) and
/// applies (k, 1) convolutions so each column sees one phase of the period.
class PeriodDiscriminatorImpl : public torch::nn::Module {
 public:
  PeriodDiscriminatorImpl(int64_t period, int64_t width_divisor);
  DiscriminatorOutput forward(const torch::Tensor& audio);
  int64_t period() const { return period_; }

 private:
  int64_t period_;
  std::vector<WNConv2d> convs_;
  WNConv2d post_{nullptr};
};
TORCH_MODULE(PeriodDiscriminator);

class ScaleDiscriminatorImpl : public torch::nn::Module {
 public:
  ScaleDiscriminatorImpl(int64_t width_divisor, bool spectral_norm);
  DiscriminatorOutput forward(const torch::Tensor& audio);

 private:
  std::vector<torch::nn::AnyModule> convs_;
  torch::nn::AnyModule post_;
};
TORCH_MODULE(ScaleDiscriminator);

/// Stride-2 mean pooling used between MSD scales: [B, L] -> [B, L / 2].
torch::Tensor halve_rate(const torch::Tensor& audio);

/// Multi-scale sub-discriminators (raw, /2, /4; the first spectrally
/// normalized) followed by the multi-period ones.
class DiscriminatorSetImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorSetImpl(const DiscriminatorConfig& cfg = {});

  /// audio: [B, L] -> one output per sub-discriminator, MSD first.
  std::vector<DiscriminatorOutput> forward(const torch::Tensor& audio);

  /// Input length seen by each MSD branch, for shape checks.
  std::vector<int64_t> scale_lengths(int64_t length) const;
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  std::vector<ScaleDiscriminator> scales_;
  std::vector<PeriodDiscriminator> periods_;
};
TORCH_MODULE(DiscriminatorSet);

std::vector<torch::Tensor> logits_of(const std::vector<DiscriminatorOutput>& outs);

struct AdversarialLosses {
  torch::Tensor d_loss;
  torch::Tensor g_loss;
};

/// Least-squares GAN losses summed over sub-discriminators:
/// d = mean((D(x) - 1)^2) + mean(D(G)^2), g = mean((D(G) - 1)^2).
AdversarialLosses lsgan_losses(const std::vector<torch::Tensor>& real_logits,
                               const std::vector<torch::Tensor>& fake_logits);
torch::Tensor discriminator_loss(const std::vector<torch::Tensor>& real_logits,
                                 const std::vector<torch::Tensor>& fake_logits);
torch::Tensor generator_loss(const std::vector<torch::Tensor>& fake_logits);

/// Sum of mean |f_real - f_fake| over every intermediate feature map.
torch::Tensor feature_matching_loss(const std::vector<DiscriminatorOutput>& real,
                                    const std::vector<DiscriminatorOutput>& fake);

}  // namespace rtts
