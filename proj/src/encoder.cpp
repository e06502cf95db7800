#include <stdexcept>

#include "rtts/encoder.hpp"

namespace rtts {

void EncoderConfig::validate() const {
  if (vocab_size < 2) throw std::invalid_argument("encoder: vocab_size must be at least 2");
  if (hidden_dim != kHiddenDim) throw std::invalid_argument("encoder: hidden_dim must be 256");
  if (kernel_sizes.empty() || num_blocks < 1) {
    throw std::invalid_argument("encoder: need kernel sizes and at least one block");
  }
  if (dilations.size() != 1 && dilations.size() != kernel_sizes.size()) {
    throw std::invalid_argument("encoder: dilations must be one shared list or one per kernel");
  }
  for (auto k : kernel_sizes) {
    if (k % 2 == 0) throw std::invalid_argument("encoder: kernel sizes must be odd");
  }
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"vocab_size", c.vocab_size},     {"hidden_dim", c.hidden_dim},
       {"kernel_sizes", c.kernel_sizes}, {"dilations", c.dilations},
       {"num_blocks", c.num_blocks}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("hidden_dim").get_to(c.hidden_dim);
  j.at("kernel_sizes").get_to(c.kernel_sizes);
  j.at("dilations").get_to(c.dilations);
  j.at("num_blocks").get_to(c.num_blocks);
}

PhonemeEncoderImpl::PhonemeEncoderImpl(const EncoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  embedding_ = register_module(
      "embedding", torch::nn::Embedding(
                       torch::nn::EmbeddingOptions(cfg_.vocab_size, cfg_.hidden_dim).padding_idx(0)));
  for (int64_t i = 0; i < cfg_.num_blocks; ++i) {
    blocks_.push_back(register_module("mrf" + std::to_string(i),
                                      MRF(cfg_.hidden_dim, cfg_.kernel_sizes, cfg_.dilations)));
  }
  post_ = register_module("post", WNConv1d(cfg_.hidden_dim, cfg_.hidden_dim, 1));
}

EncoderState PhonemeEncoderImpl::forward(const torch::Tensor& ids, const torch::Tensor& mask) {
  TORCH_CHECK(ids.dim() == 2 && mask.sizes() == ids.sizes(), "encoder: expected [B, N] ids and mask");
  if (ids.numel() > 0) {
    const auto lo = ids.min().item<int64_t>();
    const auto hi = ids.max().item<int64_t>();
    if (lo < 0 || hi >= cfg_.vocab_size) {
      throw std::out_of_range("encoder: token id " + std::to_string(lo < 0 ? lo : hi) +
                              " outside vocabulary of size " + std::to_string(cfg_.vocab_size));
    }
  }
  auto m = mask.to(torch::kFloat32).unsqueeze(1);  // [B, 1, N]
  auto x = embedding_->forward(ids).transpose(1, 2) * m;
  for (auto& block : blocks_) x = block->forward(x, m);
  x = torch::nn::functional::leaky_relu(
      x, torch::nn::functional::LeakyReLUFuncOptions().negative_slope(kLeakySlope));
  x = post_->forward(x) * m;
  return {x.transpose(1, 2).contiguous(), mask};
}

}  // namespace rtts
