#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "rtts/layers.hpp"

namespace rtts {

inline constexpr int64_t kHiddenDim = 256;

struct EncoderConfig {
  int64_t vocab_size = 0;
  int64_t hidden_dim = kHiddenDim;
  std::vector<int64_t> kernel_sizes{3, 7, 11};
  std::vector<std::vector<int64_t>> dilations{{1, 3, 5}};
  int64_t num_blocks = 3;

  void validate() const;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

/// Per-token hidden states handed to the duration predictor and the
/// upsampler. Rows where `mask` is false are zero.
struct EncoderState {
  torch::Tensor hidden;  // [B, N, hidden_dim]
  torch::Tensor mask;    // [B, N] bool

  int64_t batch() const { return hidden.size(0); }
  int64_t tokens() const { return hidden.size(1); }
};

/// Token embedding followed by a stack of MRF blocks. The sequence length is
/// never changed.
class PhonemeEncoderImpl : public torch::nn::Module {
 public:
  explicit PhonemeEncoderImpl(const EncoderConfig& cfg);

  /// ids: [B, N] int64; mask: [B, N] bool. Throws std::out_of_range for ids
  /// outside [0, vocab_size).
  EncoderState forward(const torch::Tensor& ids, const torch::Tensor& mask);

  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  torch::nn::Embedding embedding_{nullptr};
  std::vector<MRF> blocks_;
  WNConv1d post_{nullptr};
};
TORCH_MODULE(PhonemeEncoder);

}  // namespace rtts
