#include <numeric>
#include <stdexcept>

#include "rtts/vocoder.hpp"

namespace rtts {
namespace {

namespace F = torch::nn::functional;

torch::Tensor lrelu(const torch::Tensor& x, double slope = kLeakySlope) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(slope));
}

int64_t scaled(int64_t channels, int64_t divisor) { return std::max<int64_t>(1, channels / divisor); }

}  // namespace

DecoderConfig DecoderConfig::preset(const std::string& name) {
  DecoderConfig c;
  if (name == "v1") return c;
  if (name == "v2") {
    c.initial_channels = 128;
    return c;
  }
  if (name == "small") {
    c.initial_channels = 32;
    return c;
  }
  throw std::invalid_argument("unknown decoder preset '" + name + "' (expected v1, v2 or small)");
}

int64_t DecoderConfig::total_upsampling() const {
  return std::accumulate(upsample_rates.begin(), upsample_rates.end(), int64_t{1}, std::multiplies<>());
}

void DecoderConfig::validate() const {
  if (input_dim != kHiddenDim) throw std::invalid_argument("decoder: input_dim must be 256");
  if (upsample_rates.size() != upsample_kernels.size()) {
    throw std::invalid_argument("decoder: one kernel size per upsampling stage");
  }
  if (total_upsampling() != kUpsampleFactor) {
    throw std::invalid_argument("decoder: upsample rates must multiply to 256");
  }
  for (size_t i = 0; i < upsample_rates.size(); ++i) {
    if (upsample_kernels[i] < upsample_rates[i] || (upsample_kernels[i] - upsample_rates[i]) % 2 != 0) {
      throw std::invalid_argument("decoder: kernel - rate must be even and non-negative per stage");
    }
  }
  if (initial_channels >> upsample_rates.size() < 1) {
    throw std::invalid_argument("decoder: initial_channels too small for the number of stages");
  }
}

void to_json(nlohmann::json& j, const DecoderConfig& c) {
  j = {{"input_dim", c.input_dim},
       {"initial_channels", c.initial_channels},
       {"upsample_rates", c.upsample_rates},
       {"upsample_kernels", c.upsample_kernels},
       {"resblock_kernels", c.resblock_kernels},
       {"resblock_dilations", c.resblock_dilations}};
}

void from_json(const nlohmann::json& j, DecoderConfig& c) {
  j.at("input_dim").get_to(c.input_dim);
  j.at("initial_channels").get_to(c.initial_channels);
  j.at("upsample_rates").get_to(c.upsample_rates);
  j.at("upsample_kernels").get_to(c.upsample_kernels);
  j.at("resblock_kernels").get_to(c.resblock_kernels);
  j.at("resblock_dilations").get_to(c.resblock_dilations);
}

DecoderImpl::DecoderImpl(const DecoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  pre_ = register_module("pre", WNConv1d(cfg_.input_dim, cfg_.initial_channels, 7));
  int64_t ch = cfg_.initial_channels;
  for (size_t i = 0; i < cfg_.upsample_rates.size(); ++i) {
    const auto rate = cfg_.upsample_rates[i];
    const auto kernel = cfg_.upsample_kernels[i];
    auto up = register_module("up" + std::to_string(i),
                              WNConvTranspose1d(ch, ch / 2, kernel, rate, (kernel - rate) / 2));
    up->reset_normal(0.0, 0.01);
    ups_.push_back(up);
    ch /= 2;
    auto mrf = register_module("mrf" + std::to_string(i),
                               MRF(ch, cfg_.resblock_kernels, cfg_.resblock_dilations));
    mrf->reset_normal(0.0, 0.01);
    mrfs_.push_back(mrf);
  }
  post_ = register_module("post", WNConv1d(ch, 1, 7));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& frames) {
  TORCH_CHECK(frames.dim() == 3 && frames.size(2) == cfg_.input_dim,
              "decoder: expected [B, F, ", cfg_.input_dim, "] frames");
  auto x = pre_->forward(frames.transpose(1, 2));
  for (size_t i = 0; i < ups_.size(); ++i) {
    x = ups_[i]->forward(lrelu(x));
    x = mrfs_[i]->forward(x);
  }
  x = post_->forward(lrelu(x, 0.01));
  return torch::tanh(x).squeeze(1);
}

DiscriminatorConfig DiscriminatorConfig::preset(const std::string& name) {
  DiscriminatorConfig c;
  if (name == "v1" || name == "v2") return c;
  if (name == "small") {
    c.width_divisor = 16;
    return c;
  }
  throw std::invalid_argument("unknown discriminator preset '" + name + "'");
}

void DiscriminatorConfig::validate() const {
  if (periods.empty() || num_scales < 1) throw std::invalid_argument("discriminators: empty set");
  if (width_divisor < 1) throw std::invalid_argument("discriminators: width_divisor must be >= 1");
  for (auto p : periods) {
    if (p < 2) throw std::invalid_argument("discriminators: periods must be >= 2");
  }
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = {{"periods", c.periods}, {"num_scales", c.num_scales}, {"width_divisor", c.width_divisor}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  j.at("periods").get_to(c.periods);
  j.at("num_scales").get_to(c.num_scales);
  j.at("width_divisor").get_to(c.width_divisor);
}

PeriodDiscriminatorImpl::PeriodDiscriminatorImpl(int64_t period, int64_t width_divisor)
    : period_(period) {
  const std::vector<int64_t> widths{32, 128, 512, 1024, 1024};
  int64_t in = 1;
  for (size_t i = 0; i < widths.size(); ++i) {
    const auto out = scaled(widths[i], width_divisor);
    const int64_t stride = i + 1 < widths.size() ? 3 : 1;
    convs_.push_back(register_module("conv" + std::to_string(i), WNConv2d(in, out, 5, stride, 2)));
    in = out;
  }
  post_ = register_module("post", WNConv2d(in, 1, 3, 1, 1));
}

DiscriminatorOutput PeriodDiscriminatorImpl::forward(const torch::Tensor& audio) {
  auto x = audio.unsqueeze(1);  // [B, 1, L]
  const auto length = x.size(2);
  if (length % period_ != 0) {
    const auto pad = period_ - length % period_;
    auto options = F::PadFuncOptions({0, pad});
    if (length > pad) {
      options.mode(torch::kReflect);
    }
    x = F::pad(x, options);
  }
  x = x.view({x.size(0), 1, x.size(2) / period_, period_});
  DiscriminatorOutput out;
  for (auto& conv : convs_) {
    x = lrelu(conv->forward(x));
    out.features.push_back(x);
  }
  x = post_->forward(x);
  out.features.push_back(x);
  out.logits = x.flatten(1);
  return out;
}

ScaleDiscriminatorImpl::ScaleDiscriminatorImpl(int64_t width_divisor, bool spectral_norm) {
  struct Spec {
    int64_t in, out, kernel, stride, groups;
  };
  const std::vector<Spec> specs{{1, 128, 15, 1, 1},      {128, 128, 41, 2, 4},
                                {128, 256, 41, 2, 16},   {256, 512, 41, 4, 16},
                                {512, 1024, 41, 4, 16},  {1024, 1024, 41, 1, 16},
                                {1024, 1024, 5, 1, 1}};
  auto make = [&](int64_t in, int64_t out, int64_t k, int64_t s, int64_t g) {
    const auto groups = std::gcd(g, std::gcd(in, out));
    if (spectral_norm) return torch::nn::AnyModule(SNConv1d(in, out, k, s, same_padding(k), groups));
    return torch::nn::AnyModule(WNConv1d(in, out, k, s, 1, same_padding(k), groups));
  };
  for (size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const auto in = i == 0 ? int64_t{1} : scaled(s.in, width_divisor);
    auto m = make(in, scaled(s.out, width_divisor), s.kernel, s.stride, s.groups);
    register_module("conv" + std::to_string(i), m.ptr());
    convs_.push_back(std::move(m));
  }
  post_ = make(scaled(1024, width_divisor), 1, 3, 1, 1);
  register_module("post", post_.ptr());
}

DiscriminatorOutput ScaleDiscriminatorImpl::forward(const torch::Tensor& audio) {
  auto x = audio.unsqueeze(1);
  DiscriminatorOutput out;
  for (auto& conv : convs_) {
    x = lrelu(conv.forward(x));
    out.features.push_back(x);
  }
  x = post_.forward(x);
  out.features.push_back(x);
  out.logits = x.flatten(1);
  return out;
}

torch::Tensor halve_rate(const torch::Tensor& audio) {
  return F::avg_pool1d(audio.unsqueeze(1), F::AvgPool1dFuncOptions(2).stride(2)).squeeze(1);
}

DiscriminatorSetImpl::DiscriminatorSetImpl(const DiscriminatorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  for (int64_t i = 0; i < cfg_.num_scales; ++i) {
    scales_.push_back(register_module("msd" + std::to_string(i),
                                      ScaleDiscriminator(cfg_.width_divisor, /*spectral_norm=*/i == 0)));
  }
  for (auto p : cfg_.periods) {
    periods_.push_back(register_module("mpd" + std::to_string(p), PeriodDiscriminator(p, cfg_.width_divisor)));
  }
}

std::vector<DiscriminatorOutput> DiscriminatorSetImpl::forward(const torch::Tensor& audio) {
  TORCH_CHECK(audio.dim() == 2, "discriminators: expected [B, L] audio");
  std::vector<DiscriminatorOutput> outs;
  auto x = audio;
  for (size_t i = 0; i < scales_.size(); ++i) {
    if (i > 0) x = halve_rate(x);
    outs.push_back(scales_[i]->forward(x));
  }
  for (auto& d : periods_) outs.push_back(d->forward(audio));
  return outs;
}

std::vector<int64_t> DiscriminatorSetImpl::scale_lengths(int64_t length) const {
  std::vector<int64_t> out;
  for (int64_t i = 0; i < cfg_.num_scales; ++i, length /= 2) out.push_back(length);
  return out;
}

std::vector<torch::Tensor> logits_of(const std::vector<DiscriminatorOutput>& outs) {
  std::vector<torch::Tensor> v;
  v.reserve(outs.size());
  for (const auto& o : outs) v.push_back(o.logits);
  return v;
}

torch::Tensor discriminator_loss(const std::vector<torch::Tensor>& real_logits,
                                 const std::vector<torch::Tensor>& fake_logits) {
  TORCH_CHECK(real_logits.size() == fake_logits.size() && !real_logits.empty(),
              "lsgan: real and fake logit lists must match");
  auto loss = torch::zeros({}, real_logits.front().options());
  for (size_t i = 0; i < real_logits.size(); ++i) {
    loss = loss + (real_logits[i] - 1.0).pow(2).mean() + fake_logits[i].pow(2).mean();
  }
  return loss;
}

torch::Tensor generator_loss(const std::vector<torch::Tensor>& fake_logits) {
  TORCH_CHECK(!fake_logits.empty(), "lsgan: empty logit list");
  auto loss = torch::zeros({}, fake_logits.front().options());
  for (const auto& f : fake_logits) loss = loss + (f - 1.0).pow(2).mean();
  return loss;
}

AdversarialLosses lsgan_losses(const std::vector<torch::Tensor>& real_logits,
                               const std::vector<torch::Tensor>& fake_logits) {
  return {discriminator_loss(real_logits, fake_logits), generator_loss(fake_logits)};
}

torch::Tensor feature_matching_loss(const std::vector<DiscriminatorOutput>& real,
                                    const std::vector<DiscriminatorOutput>& fake) {
  TORCH_CHECK(real.size() == fake.size(), "feature matching: output lists must match");
  torch::Tensor loss;
  for (size_t i = 0; i < real.size(); ++i) {
    for (size_t k = 0; k < real[i].features.size(); ++k) {
      auto term = (real[i].features[k].detach() - fake[i].features[k]).abs().mean();
      loss = loss.defined() ? loss + term : term;
    }
  }
  return loss;
}

}  // namespace rtts
