#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rtts/objectives.hpp"

namespace rtts {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool outside_band(int64_t i, int64_t j, int64_t n, int64_t m, const std::optional<int64_t>& band) {
  if (!band) return false;
  const double diag = static_cast<double>(j) * static_cast<double>(n) / static_cast<double>(m);
  return std::abs(static_cast<double>(i) - diag) > static_cast<double>(*band);
}

/// DP table with a one-cell border: R[(i) * (m + 1) + j], i in [0, n], j in [0, m].
std::vector<double> forward_table(const double* cost, int64_t n, int64_t m, const SoftDTWConfig& cfg) {
  const auto w = m + 1;
  std::vector<double> r(static_cast<size_t>((n + 1) * w), kInf);
  r[0] = 0.0;
  for (int64_t i = 1; i <= n; ++i) {
    for (int64_t j = 1; j <= m; ++j) {
      if (outside_band(i, j, n, m, cfg.band_width)) continue;
      const double diag = r[static_cast<size_t>((i - 1) * w + j - 1)];
      const double down = r[static_cast<size_t>((i - 1) * w + j)] + cfg.omega;
      const double right = r[static_cast<size_t>(i * w + j - 1)] + cfg.omega;
      const double best = soft_min(diag, down, right, cfg.tau);
      r[static_cast<size_t>(i * w + j)] = cost[(i - 1) * m + (j - 1)] + best;
    }
  }
  return r;
}

class SoftDTWFunction : public torch::autograd::Function<SoftDTWFunction> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& costs,
                               double omega, double tau, int64_t band) {
    SoftDTWConfig cfg{omega, tau, band >= 0 ? std::optional<int64_t>(band) : std::nullopt};
    auto c = costs.detach().to(torch::kFloat64).contiguous();
    const auto n = c.size(0);
    const auto m = c.size(1);
    auto table = forward_table(c.data_ptr<double>(), n, m, cfg);
    const double total = table.back();
    if (!std::isfinite(total)) throw ObjectiveError("soft_dtw: no admissible path (band too narrow?)");
    auto r = torch::from_blob(table.data(), {n + 1, m + 1}, torch::kFloat64).clone();
    ctx->save_for_backward({c, r});
    ctx->saved_data["omega"] = omega;
    ctx->saved_data["tau"] = tau;
    ctx->saved_data["dtype"] = static_cast<int64_t>(costs.scalar_type());
    return torch::tensor(total, costs.options());
  }

  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grad_out) {
    auto saved = ctx->get_saved_variables();
    auto c = saved[0];
    auto r = saved[1];
    const double omega = ctx->saved_data["omega"].toDouble();
    const double tau = ctx->saved_data["tau"].toDouble();
    const auto dtype = static_cast<c10::ScalarType>(ctx->saved_data["dtype"].toInt());
    const auto n = c.size(0);
    const auto m = c.size(1);
    auto ca = c.accessor<double, 2>();
    auto ra = r.accessor<double, 2>();

    // e[i][j] = dR(n, m) / dR(i, j). A successor s of (i, j) took the value
    // x = R(i, j) (+ omega) in its soft-min; its sensitivity to x is
    // exp(-(x - softmin_s) / tau) with softmin_s = R(s) - C(s).
    std::vector<double> e(static_cast<size_t>((n + 2) * (m + 2)), 0.0);
    const auto w = m + 2;
    const auto at = [&](int64_t i, int64_t j) -> double& { return e[static_cast<size_t>(i * w + j)]; };
    at(n, m) = 1.0;
    const auto weight = [&](int64_t si, int64_t sj, double x) {
      if (si > n || sj > m) return 0.0;
      const double rs = ra[si][sj];
      if (!std::isfinite(rs) || !std::isfinite(x)) return 0.0;
      const double sm = rs - ca[si - 1][sj - 1];
      return std::exp(-(x - sm) / tau);
    };
    for (int64_t i = n; i >= 1; --i) {
      for (int64_t j = m; j >= 1; --j) {
        if (i == n && j == m) continue;
        const double rij = ra[i][j];
        if (!std::isfinite(rij)) continue;
        at(i, j) = at(i + 1, j + 1) * weight(i + 1, j + 1, rij) +
                   at(i + 1, j) * weight(i + 1, j, rij + omega) +
                   at(i, j + 1) * weight(i, j + 1, rij + omega);
      }
    }
    auto grad = torch::empty({n, m}, torch::kFloat64);
    auto ga = grad.accessor<double, 2>();
    for (int64_t i = 1; i <= n; ++i) {
      for (int64_t j = 1; j <= m; ++j) ga[i - 1][j - 1] = at(i, j);
    }
    grad = (grad * grad_out[0].to(torch::kFloat64)).to(dtype);
    return {grad, torch::Tensor(), torch::Tensor(), torch::Tensor()};
  }
};

}  // namespace

MelL1 mel_l1(const torch::Tensor& mel_gt, const torch::Tensor& mel_pred) {
  if (mel_gt.sizes() != mel_pred.sizes()) {
    throw ObjectiveError("mel_l1: frame count or shape mismatch (" +
                         std::to_string(mel_gt.size(-2)) + " vs " + std::to_string(mel_pred.size(-2)) +
                         " frames)");
  }
  if (mel_gt.dim() != 2 && mel_gt.dim() != 3) throw ObjectiveError("mel_l1: expected [T, M] or [B, T, M]");
  auto diff = (mel_gt - mel_pred).abs();
  return {diff.mean(), diff.mean(-1)};
}

void SoftDTWConfig::validate() const {
  if (!(tau > 0.0)) throw ObjectiveError("soft_dtw: tau must be positive");
  if (!(omega >= 0.0)) throw ObjectiveError("soft_dtw: omega must be non-negative");
  if (band_width && *band_width < 0) throw ObjectiveError("soft_dtw: band_width must be non-negative");
}

void to_json(nlohmann::json& j, const SoftDTWConfig& c) {
  j = {{"omega", c.omega}, {"tau", c.tau}};
  j["band_width"] = c.band_width ? nlohmann::json(*c.band_width) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, SoftDTWConfig& c) {
  j.at("omega").get_to(c.omega);
  j.at("tau").get_to(c.tau);
  if (j.contains("band_width") && !j.at("band_width").is_null()) {
    c.band_width = j.at("band_width").get<int64_t>();
  } else {
    c.band_width.reset();
  }
}

double soft_min(double a, double b, double c, double tau) {
  const double lo = std::min({a, b, c});
  if (!std::isfinite(lo)) return kInf;
  const double sum = std::exp(-(a - lo) / tau) + std::exp(-(b - lo) / tau) + std::exp(-(c - lo) / tau);
  return lo - tau * std::log(sum);
}

torch::Tensor l1_cost_matrix(const torch::Tensor& mel_gt, const torch::Tensor& mel_pred) {
  if (mel_gt.dim() != 2 || mel_pred.dim() != 2 || mel_gt.size(1) != mel_pred.size(1)) {
    throw ObjectiveError("soft_dtw: expected [T, M] inputs with equal M");
  }
  return (mel_gt.unsqueeze(1) - mel_pred.unsqueeze(0)).abs().sum(-1);
}

torch::Tensor soft_dtw_from_costs(const torch::Tensor& costs, const SoftDTWConfig& cfg) {
  cfg.validate();
  if (costs.dim() != 2 || costs.size(0) < 1 || costs.size(1) < 1) {
    throw ObjectiveError("soft_dtw: empty input");
  }
  return SoftDTWFunction::apply(costs, cfg.omega, cfg.tau, cfg.band_width.value_or(-1));
}

torch::Tensor soft_dtw(const torch::Tensor& mel_gt, const torch::Tensor& mel_pred, const SoftDTWConfig& cfg) {
  if (mel_gt.dim() != 2 || mel_pred.dim() != 2 || mel_gt.size(0) < 1 || mel_pred.size(0) < 1) {
    throw ObjectiveError("soft_dtw: empty input");
  }
  return soft_dtw_from_costs(l1_cost_matrix(mel_gt, mel_pred), cfg);
}

}  // namespace rtts
