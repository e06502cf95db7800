#include "rtts/layers.hpp"

namespace rtts {
namespace {

namespace F = torch::nn::functional;

torch::Tensor norm_except_dim0(const torch::Tensor& v) {
  std::vector<int64_t> dims;
  for (int64_t d = 1; d < v.dim(); ++d) dims.push_back(d);
  return v.norm(2, dims, /*keepdim=*/true);
}

torch::Tensor weight_norm(const torch::Tensor& v, const torch::Tensor& g) {
  return v * (g / norm_except_dim0(v));
}

}  // namespace

int64_t same_padding(int64_t kernel, int64_t dilation) { return (kernel * dilation - dilation) / 2; }

WNConv1dImpl::WNConv1dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride,
                           int64_t dilation, int64_t padding, int64_t groups)
    : stride_(stride),
      dilation_(dilation),
      padding_(padding < 0 ? same_padding(kernel, dilation) : padding),
      groups_(groups) {
  torch::nn::Conv1d init(torch::nn::Conv1dOptions(in, out, kernel).groups(groups));
  v_ = register_parameter("weight_v", init->weight.detach().clone());
  g_ = register_parameter("weight_g", norm_except_dim0(v_).detach().clone());
  bias_ = register_parameter("bias", init->bias.detach().clone());
}

torch::Tensor WNConv1dImpl::weight() const { return weight_norm(v_, g_); }

torch::Tensor WNConv1dImpl::forward(const torch::Tensor& x) {
  return F::conv1d(x, weight(), F::Conv1dFuncOptions()
                                    .bias(bias_)
                                    .stride(stride_)
                                    .padding(padding_)
                                    .dilation(dilation_)
                                    .groups(groups_));
}

void WNConv1dImpl::reset_normal(double mean, double std) {
  torch::NoGradGuard no_grad;
  v_.normal_(mean, std);
  g_.copy_(norm_except_dim0(v_));
}

WNConvTranspose1dImpl::WNConvTranspose1dImpl(int64_t in, int64_t out, int64_t kernel,
                                             int64_t stride, int64_t padding)
    : stride_(stride), padding_(padding) {
  torch::nn::ConvTranspose1d init(torch::nn::ConvTranspose1dOptions(in, out, kernel));
  v_ = register_parameter("weight_v", init->weight.detach().clone());
  g_ = register_parameter("weight_g", norm_except_dim0(v_).detach().clone());
  bias_ = register_parameter("bias", init->bias.detach().clone());
}

torch::Tensor WNConvTranspose1dImpl::forward(const torch::Tensor& x) {
  return F::conv_transpose1d(
      x, weight_norm(v_, g_),
      F::ConvTranspose1dFuncOptions().bias(bias_).stride(stride_).padding(padding_));
}

void WNConvTranspose1dImpl::reset_normal(double mean, double std) {
  torch::NoGradGuard no_grad;
  v_.normal_(mean, std);
  g_.copy_(norm_except_dim0(v_));
}

WNConv2dImpl::WNConv2dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride,
                           int64_t padding)
    : stride_(stride), padding_(padding) {
  torch::nn::Conv2d init(torch::nn::Conv2dOptions(in, out, {kernel, 1}));
  v_ = register_parameter("weight_v", init->weight.detach().clone());
  g_ = register_parameter("weight_g", norm_except_dim0(v_).detach().clone());
  bias_ = register_parameter("bias", init->bias.detach().clone());
}

torch::Tensor WNConv2dImpl::forward(const torch::Tensor& x) {
  return F::conv2d(x, weight_norm(v_, g_),
                   F::Conv2dFuncOptions()
                       .bias(bias_)
                       .stride({stride_, 1})
                       .padding({padding_, 0}));
}

SNConv1dImpl::SNConv1dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride,
                           int64_t padding, int64_t groups)
    : stride_(stride), padding_(padding < 0 ? same_padding(kernel) : padding), groups_(groups) {
  torch::nn::Conv1d init(torch::nn::Conv1dOptions(in, out, kernel).groups(groups));
  weight_ = register_parameter("weight_orig", init->weight.detach().clone());
  bias_ = register_parameter("bias", init->bias.detach().clone());
  u_ = register_buffer("weight_u", F::normalize(torch::randn({out}), F::NormalizeFuncOptions().dim(0)));
}

torch::Tensor SNConv1dImpl::forward(const torch::Tensor& x) {
  auto mat = weight_.reshape({weight_.size(0), -1});
  torch::Tensor u, v;
  {
    torch::NoGradGuard no_grad;
    const auto opts = F::NormalizeFuncOptions().dim(0).eps(1e-12);
    v = F::normalize(torch::mv(mat.t(), u_), opts);
    if (is_training()) {
      u_.copy_(F::normalize(torch::mv(mat, v), opts));
    }
    // Later calls update the buffer in place; autograd needs the value used here.
    u = u_.clone();
  }
  auto sigma = torch::dot(u, torch::mv(mat, v));
  return F::conv1d(x, weight_ / sigma,
                   F::Conv1dFuncOptions().bias(bias_).stride(stride_).padding(padding_).groups(groups_));
}

ResBlockImpl::ResBlockImpl(int64_t channels, int64_t kernel, const std::vector<int64_t>& dilations) {
  for (size_t i = 0; i < dilations.size(); ++i) {
    dilated_.push_back(register_module("dilated" + std::to_string(i),
                                       WNConv1d(channels, channels, kernel, 1, dilations[i])));
    plain_.push_back(register_module("plain" + std::to_string(i), WNConv1d(channels, channels, kernel)));
  }
}

torch::Tensor ResBlockImpl::forward(torch::Tensor x, const torch::Tensor& mask) {
  const auto masked = [&](torch::Tensor t) { return mask.defined() ? t * mask : t; };
  for (size_t i = 0; i < dilated_.size(); ++i) {
    auto h = F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(kLeakySlope));
    h = dilated_[i]->forward(masked(h));
    h = F::leaky_relu(h, F::LeakyReLUFuncOptions().negative_slope(kLeakySlope));
    h = plain_[i]->forward(masked(h));
    x = x + h;
  }
  return masked(x);
}

void ResBlockImpl::reset_normal(double mean, double std) {
  for (auto& c : dilated_) c->reset_normal(mean, std);
  for (auto& c : plain_) c->reset_normal(mean, std);
}

MRFImpl::MRFImpl(int64_t channels, const std::vector<int64_t>& kernels,
                 const std::vector<std::vector<int64_t>>& dilations) {
  TORCH_CHECK(!kernels.empty(), "MRF: need at least one kernel size");
  TORCH_CHECK(dilations.size() == kernels.size() || dilations.size() == 1,
              "MRF: need one dilation list per kernel (or one shared list)");
  for (size_t i = 0; i < kernels.size(); ++i) {
    const auto& d = dilations.size() == 1 ? dilations[0] : dilations[i];
    blocks_.push_back(register_module("block" + std::to_string(i), ResBlock(channels, kernels[i], d)));
  }
}

torch::Tensor MRFImpl::forward(const torch::Tensor& x, const torch::Tensor& mask) {
  torch::Tensor sum;
  for (auto& b : blocks_) {
    auto y = b->forward(x, mask);
    sum = sum.defined() ? sum + y : y;
  }
  return sum / static_cast<double>(blocks_.size());
}

void MRFImpl::reset_normal(double mean, double std) {
  for (auto& b : blocks_) b->reset_normal(mean, std);
}

}  // namespace rtts
