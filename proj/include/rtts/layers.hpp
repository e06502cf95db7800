#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace rtts {

inline constexpr double kLeakySlope = 0.1;

int64_t same_padding(int64_t kernel, int64_t dilation = 1);

/// Weight-normalized 1-D convolution: weight = g * v / ||v||, with the norm
/// taken per output channel.
class WNConv1dImpl : public torch::nn::Module {
 public:
  WNConv1dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1, int64_t dilation = 1,
               int64_t padding = -1, int64_t groups = 1);

  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor weight() const;
  /// Re-draws v ~ N(mean, std) and resets g to ||v||.
  void reset_normal(double mean, double std);

 private:
  torch::Tensor v_, g_, bias_;
  int64_t stride_, dilation_, padding_, groups_;
};
TORCH_MODULE(WNConv1d);

/// Weight-normalized transposed convolution; the norm is taken per input
/// channel (dim 0 of the [in, out, k] weight).
class WNConvTranspose1dImpl : public torch::nn::Module {
 public:
  WNConvTranspose1dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding);

  torch::Tensor forward(const torch::Tensor& x);
  void reset_normal(double mean, double std);

 private:
  torch::Tensor v_, g_, bias_;
  int64_t stride_, padding_;
};
TORCH_MODULE(WNConvTranspose1d);

/// Weight-normalized 2-D convolution with a (k, 1) kernel.
class WNConv2dImpl : public torch::nn::Module {
 public:
  WNConv2dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding);

  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::Tensor v_, g_, bias_;
  int64_t stride_, padding_;
};
TORCH_MODULE(WNConv2d);

/// Spectrally normalized 1-D convolution. One power-iteration step refines the
/// singular-vector estimate on each training-mode forward pass.
class SNConv1dImpl : public torch::nn::Module {
 public:
  SNConv1dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1, int64_t padding = -1,
               int64_t groups = 1);

  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::Tensor weight_, bias_, u_;
  int64_t stride_, padding_, groups_;
};
TORCH_MODULE(SNConv1d);

/// Residual stack for one kernel size: for each dilation d,
/// x += conv_1(lrelu(conv_d(lrelu(x)))). An optional [B, 1, L] mask is applied
/// before every convolution so padded positions never leak into valid ones.
class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int64_t channels, int64_t kernel, const std::vector<int64_t>& dilations);

  torch::Tensor forward(torch::Tensor x, const torch::Tensor& mask = {});
  void reset_normal(double mean, double std);

 private:
  std::vector<WNConv1d> dilated_;
  std::vector<WNConv1d> plain_;
};
TORCH_MODULE(ResBlock);

/// Multi-receptive-field fusion: parallel ResBlocks with different kernel
/// sizes, outputs averaged.
class MRFImpl : public torch::nn::Module {
 public:
  MRFImpl(int64_t channels, const std::vector<int64_t>& kernels,
          const std::vector<std::vector<int64_t>>& dilations);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask = {});
  void reset_normal(double mean, double std);

 private:
  std::vector<ResBlock> blocks_;
};
TORCH_MODULE(MRF);

}  // namespace rtts
