#include <cmath>
#include <numeric>

#include "rtts/aligner.hpp"
#include "rtts/random.hpp"

namespace rtts {
namespace {

namespace F = torch::nn::functional;

torch::Tensor reward_tensor(const std::vector<uint8_t>& r, const torch::Tensor& like) {
  std::vector<double> v(r.begin(), r.end());
  return torch::tensor(v, torch::TensorOptions().dtype(torch::kFloat64)).to(like.dtype());
}

}  // namespace

std::string to_string(RewardMode mode) {
  return mode == RewardMode::segment_wise ? "segment_wise" : "phoneme_wise";
}

RewardMode reward_mode_from_string(std::string_view name) {
  if (name == "segment_wise") return RewardMode::segment_wise;
  if (name == "phoneme_wise") return RewardMode::phoneme_wise;
  throw AlignmentError("unknown reward mode '" + std::string(name) +
                       "' (expected 'segment_wise' or 'phoneme_wise')");
}

DurationPredictorImpl::DurationPredictorImpl(const DurationPredictorConfig& cfg) : cfg_(cfg) {
  const auto pad = cfg_.kernel_size / 2;
  conv1_ = register_module("conv1", torch::nn::Conv1d(torch::nn::Conv1dOptions(
                                         cfg_.input_dim, cfg_.filter_size, cfg_.kernel_size)
                                         .padding(pad)));
  conv2_ = register_module("conv2", torch::nn::Conv1d(torch::nn::Conv1dOptions(
                                         cfg_.filter_size, cfg_.filter_size, cfg_.kernel_size)
                                         .padding(pad)));
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg_.filter_size})));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg_.filter_size})));
  drop1_ = register_module("drop1", torch::nn::Dropout(cfg_.dropout));
  drop2_ = register_module("drop2", torch::nn::Dropout(cfg_.dropout));
  proj_ = register_module("proj", torch::nn::Linear(cfg_.filter_size, 1));
}

torch::Tensor DurationPredictorImpl::forward(const EncoderState& state) {
  auto m = state.mask.to(state.hidden.dtype()).unsqueeze(-1);  // [B, N, 1]
  auto x = state.hidden * m;
  x = conv1_->forward(x.transpose(1, 2)).transpose(1, 2);
  x = drop1_->forward(norm1_->forward(torch::relu(x))) * m;
  x = conv2_->forward(x.transpose(1, 2)).transpose(1, 2);
  x = drop2_->forward(norm2_->forward(torch::relu(x))) * m;
  auto d = F::softplus(proj_->forward(x).squeeze(-1));
  return d * m.squeeze(-1);
}

std::vector<double> shift_pattern(int64_t num_tokens, double alpha, int64_t width) {
  if (width < 0) width = num_tokens;
  std::vector<double> p(static_cast<size_t>(width), 0.0);
  const int64_t shifted = num_tokens % 2 == 0 ? num_tokens : num_tokens - 1;
  for (int64_t j = 0; j < shifted && j < width; ++j) p[static_cast<size_t>(j)] = j % 2 == 0 ? alpha : -alpha;
  return p;
}

ShiftResult apply_shift(const torch::Tensor& d_pred, double alpha, RewardMode /*mode*/,
                        const torch::Tensor& mask) {
  if (!(alpha >= 0.0)) throw AlignmentError("apply_shift: alpha must be non-negative");
  TORCH_CHECK(d_pred.dim() == 1 || d_pred.dim() == 2, "apply_shift: expected [N] or [B, N]");
  torch::NoGradGuard no_grad;
  auto d = d_pred.detach().dim() == 1 ? d_pred.detach().unsqueeze(0) : d_pred.detach();
  const auto rows = d.size(0);
  const auto width = d.size(1);
  std::vector<double> pattern;
  pattern.reserve(static_cast<size_t>(rows * width));
  for (int64_t b = 0; b < rows; ++b) {
    const int64_t n = mask.defined() ? (mask.dim() == 1 ? mask : mask[b]).sum().item<int64_t>() : width;
    auto row = shift_pattern(n, alpha, width);
    pattern.insert(pattern.end(), row.begin(), row.end());
  }
  auto shift = torch::tensor(pattern, torch::kFloat64).view({rows, width}).to(d.dtype());
  auto raw = d + shift;
  ShiftResult out;
  out.clamped = (raw < 0).sum().item<int64_t>();
  out.durations = torch::clamp_min(raw, 0.0);
  if (d_pred.dim() == 1) out.durations = out.durations.squeeze(0);
  return out;
}

ScaledDurations scale_durations(const torch::Tensor& d, double m_length) {
  TORCH_CHECK(d.dim() == 1, "scale_durations: expected [N] durations");
  auto total = d.sum();
  if (!(total.item<double>() > 0.0)) {
    throw AlignmentError("scale_durations: durations sum to zero (degenerate alignment)");
  }
  auto lengths = d * (m_length / total);
  return {lengths, duration_centers(lengths)};
}

ScaledDurations scale_durations(const torch::Tensor& d, const torch::Tensor& m_lengths,
                                const torch::Tensor& mask) {
  TORCH_CHECK(d.dim() == 2, "scale_durations: expected [B, N] durations");
  auto dm = mask.defined() ? d * mask.to(d.dtype()) : d;
  auto totals = dm.sum(1);
  if (!(totals.min().item<double>() > 0.0)) {
    throw AlignmentError("scale_durations: an utterance's durations sum to zero (degenerate alignment)");
  }
  auto lengths = dm * (m_lengths.to(d.dtype()) / totals).unsqueeze(1);
  return {lengths, duration_centers(lengths)};
}

torch::Tensor duration_centers(const torch::Tensor& lengths) {
  return torch::cumsum(lengths, -1) - lengths / 2.0;
}

UpsampleResult gaussian_upsample(const torch::Tensor& hidden, const torch::Tensor& centers,
                                 double sigma2, int64_t num_frames, const torch::Tensor& mask) {
  if (num_frames < 1) throw AlignmentError("gaussian_upsample: need at least one frame");
  if (!(sigma2 > 0.0)) throw AlignmentError("gaussian_upsample: sigma2 must be positive");
  const bool batched = hidden.dim() == 3;
  TORCH_CHECK(batched ? centers.dim() == 2 : (hidden.dim() == 2 && centers.dim() == 1),
              "gaussian_upsample: expected hidden [N, C] / centers [N] or [B, N, C] / [B, N]");
  auto h = batched ? hidden : hidden.unsqueeze(0);
  auto c = batched ? centers : centers.unsqueeze(0);
  if (h.size(1) < 1) throw AlignmentError("gaussian_upsample: need at least one token");
  auto t = torch::arange(1, num_frames + 1, c.options().requires_grad(false));
  // Gaussian kernel: the exponent is negative, otherwise distant frames blow up.
  auto logits = -(t.view({1, -1, 1}) - c.unsqueeze(1)).pow(2) / sigma2;  // [B, T, N]
  if (mask.defined()) {
    auto mk = (mask.dim() == 1 ? mask.unsqueeze(0) : mask).to(torch::kBool).unsqueeze(1);
    logits = logits.masked_fill(~mk, -std::numeric_limits<double>::infinity());
  }
  // Normalized over all tokens, so every frame is a convex combination.
  auto w = torch::softmax(logits, -1);
  auto frames = torch::bmm(w, h.to(w.dtype()));
  if (!batched) {
    frames = frames.squeeze(0);
    w = w.squeeze(0);
  }
  return {frames, {w, sigma2}};
}

SegmentSpec sample_segment(int64_t num_frames, int64_t gamma, std::mt19937_64& rng) {
  if (gamma < 1) throw AlignmentError("sample_segment: gamma must be positive");
  if (num_frames <= gamma) return {gamma, 0};
  return {gamma, static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(num_frames - gamma + 1)))};
}

int64_t RewardVector::shift_count() const {
  return std::accumulate(shift.begin(), shift.end(), int64_t{0});
}

double RewardVector::shift_fraction() const {
  return shift.empty() ? 0.0 : static_cast<double>(shift_count()) / static_cast<double>(shift.size());
}

RewardVector RewardVector::all_keep(int64_t n) {
  return {std::vector<uint8_t>(static_cast<size_t>(n), 1), std::vector<uint8_t>(static_cast<size_t>(n), 0)};
}

std::vector<double> adaptive_average_pool(std::span<const double> values, int64_t out_size) {
  const auto len = static_cast<int64_t>(values.size());
  if (len < 1 || out_size < 1) throw AlignmentError("adaptive_average_pool: empty input or output");
  std::vector<double> out(static_cast<size_t>(out_size));
  for (int64_t i = 0; i < out_size; ++i) {
    const int64_t start = (i * len) / out_size;
    const int64_t end = ((i + 1) * len + out_size - 1) / out_size;
    double acc = 0.0;
    for (int64_t k = start; k < end; ++k) acc += values[static_cast<size_t>(k)];
    out[static_cast<size_t>(i)] = acc / static_cast<double>(end - start);
  }
  return out;
}

RewardVector compute_reward(std::span<const double> loss_keep, std::span<const double> loss_shift,
                            RewardMode mode, int64_t num_tokens) {
  if (num_tokens < 1) throw AlignmentError("compute_reward: need at least one token");
  if (loss_keep.empty() || loss_shift.empty()) throw AlignmentError("compute_reward: empty loss");
  if (loss_keep.size() != loss_shift.size()) {
    throw AlignmentError("compute_reward: keep and shift losses differ in length");
  }
  for (size_t i = 0; i < loss_keep.size(); ++i) {
    if (!std::isfinite(loss_keep[i]) || !std::isfinite(loss_shift[i])) {
      throw AlignmentError("compute_reward: non-finite mel loss (training diverged?)");
    }
  }
  RewardVector r;
  r.keep.resize(static_cast<size_t>(num_tokens));
  r.shift.resize(static_cast<size_t>(num_tokens));
  if (mode == RewardMode::segment_wise) {
    const auto mean = [](std::span<const double> v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    const bool keep = mean(loss_keep) <= mean(loss_shift);
    std::fill(r.keep.begin(), r.keep.end(), keep ? 1 : 0);
    std::fill(r.shift.begin(), r.shift.end(), keep ? 0 : 1);
    return r;
  }
  const auto k = adaptive_average_pool(loss_keep, num_tokens);
  const auto s = adaptive_average_pool(loss_shift, num_tokens);
  for (size_t j = 0; j < k.size(); ++j) {
    const bool keep = k[j] <= s[j];
    r.keep[j] = keep ? 1 : 0;
    r.shift[j] = keep ? 0 : 1;
  }
  return r;
}

RewardVector compute_reward(double loss_keep, double loss_shift, int64_t num_tokens) {
  return compute_reward(std::span<const double>(&loss_keep, 1), std::span<const double>(&loss_shift, 1),
                        RewardMode::segment_wise, num_tokens);
}

std::pair<int64_t, int64_t> tokens_in_segment(std::span<const double> lengths, int64_t offset,
                                              int64_t frames) {
  constexpr double kEps = 1e-6;
  const auto lo_frame = static_cast<double>(offset);
  const auto hi_frame = static_cast<double>(offset + frames);
  int64_t first = -1;
  int64_t last = -1;
  double cum = 0.0;
  for (size_t i = 0; i < lengths.size(); ++i) {
    const double lo = cum;
    cum += lengths[i];
    if (std::min(cum, hi_frame) - std::max(lo, lo_frame) > kEps) {
      if (first < 0) first = static_cast<int64_t>(i);
      last = static_cast<int64_t>(i);
    }
  }
  if (first < 0) return {0, 0};
  return {first, last + 1};
}

torch::Tensor reinforced_duration_loss(const torch::Tensor& d_pred, const torch::Tensor& d_shift,
                                       const torch::Tensor& r_keep, const torch::Tensor& r_shift) {
  TORCH_CHECK(d_pred.sizes() == d_shift.sizes() && d_pred.sizes() == r_keep.sizes() &&
                  d_pred.sizes() == r_shift.sizes(),
              "reinforced_duration_loss: shape mismatch");
  auto rk = r_keep.detach().to(d_pred.dtype());
  auto rs = r_shift.detach().to(d_pred.dtype());
  auto chosen = d_pred * rk + d_shift.detach().to(d_pred.dtype()) * rs;
  auto per_utt = (d_pred - chosen).abs().sum(-1);
  return d_pred.dim() == 1 ? per_utt : per_utt.mean();
}

torch::Tensor reinforced_duration_loss(const torch::Tensor& d_pred, const torch::Tensor& d_shift,
                                       const RewardVector& reward) {
  TORCH_CHECK(d_pred.dim() == 1 && d_pred.size(0) == reward.size(),
              "reinforced_duration_loss: reward length must match [N] durations");
  return reinforced_duration_loss(d_pred, d_shift, reward_tensor(reward.keep, d_pred),
                                  reward_tensor(reward.shift, d_pred));
}

torch::Tensor total_duration_loss(const torch::Tensor& d_pred, double m_length) {
  TORCH_CHECK(d_pred.dim() == 1, "total_duration_loss: expected [N] durations");
  return (m_length - d_pred.sum()).pow(2);
}

torch::Tensor total_duration_loss(const torch::Tensor& d_pred, const torch::Tensor& m_lengths) {
  TORCH_CHECK(d_pred.dim() == 2 && m_lengths.dim() == 1 && m_lengths.size(0) == d_pred.size(0),
              "total_duration_loss: expected [B, N] durations and [B] lengths");
  return (m_lengths.to(d_pred.dtype()) - d_pred.sum(1)).pow(2).mean();
}

std::vector<int64_t> round_durations(std::span<const double> d) {
  std::vector<int64_t> out(d.size());
  double running = 0.0;
  int64_t previous = 0;
  for (size_t j = 0; j < d.size(); ++j) {
    running += d[j];
    const auto rounded = static_cast<int64_t>(std::llround(running));
    out[j] = rounded - previous;
    previous = rounded;
  }
  return out;
}

}  // namespace rtts
