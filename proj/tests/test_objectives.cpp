#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dtw_oracle.hpp"
#include "rtts/objectives.hpp"

using namespace rtts;

TEST_CASE("mel L1 examples") {
  auto a = torch::randn({5, 80});
  CHECK(mel_l1(a, a).loss.item<double>() == 0.0);
  CHECK(mel_l1(a, a + 1).loss.item<double>() == doctest::Approx(1.0));
  auto x = torch::tensor({{1.0, -2.0}, {0.5, 4.0}, {3.0, 3.0}}, torch::kFloat64);
  auto y = torch::tensor({{0.0, 1.0}, {2.5, 4.0}, {-1.0, 2.0}}, torch::kFloat64);
  double brute = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) brute += std::abs(x[i][j].item<double>() - y[i][j].item<double>());
  CHECK(mel_l1(x, y).loss.item<double>() == doctest::Approx(brute / 6.0));
  CHECK(mel_l1(x, y).per_frame.size(0) == 3);
  CHECK_THROWS_AS(mel_l1(x, y.narrow(0, 0, 2)), ObjectiveError);
}

TEST_CASE("soft-min approaches min as tau shrinks and never exceeds it") {
  CHECK(soft_min(1.0, 2.0, 3.0, 1e-6) == doctest::Approx(1.0));
  for (double tau : {1.0, 0.1, 0.01}) CHECK(soft_min(1.0, 2.0, 3.0, tau) <= 1.0);
}

TEST_CASE("one-by-one input is the single frame distance") {
  auto a = torch::tensor({{1.0, 2.0, 3.0}}, torch::kFloat64);
  auto b = torch::tensor({{2.0, 0.0, 3.5}}, torch::kFloat64);
  CHECK(soft_dtw(a, b, {1.0, 0.01, std::nullopt}).item<double>() == doctest::Approx(3.5));
}

TEST_CASE("identical sequences align on the diagonal at zero cost") {
  torch::manual_seed(1);
  auto a = torch::randn({6, 4}, torch::kFloat64);
  CHECK(std::abs(soft_dtw(a, a, {1.0, 1e-6, std::nullopt}).item<double>()) < 1e-4);
}

TEST_CASE("small tau matches exhaustive path enumeration") {
  torch::manual_seed(2);
  for (double omega : {0.0, 1.0}) {
    for (int n = 1; n <= 4; ++n) {
      for (int m = 1; m <= 4; ++m) {
        auto c = torch::rand({n, m}, torch::kFloat64) * 3;
        const double oracle = brute_force_dtw(c, omega);
        CHECK(soft_dtw_from_costs(c, {omega, 1e-6, std::nullopt}).item<double>() ==
              doctest::Approx(oracle).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("soft value lower-bounds hard value and converges as tau shrinks") {
  torch::manual_seed(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto c = torch::rand({4, 5}, torch::kFloat64);
    const double hard = brute_force_dtw(c, 1.0);
    double previous = -std::numeric_limits<double>::infinity();
    for (double tau : {1.0, 0.1, 1e-3, 1e-6}) {
      const double soft = soft_dtw_from_costs(c, {1.0, tau, std::nullopt}).item<double>();
      CHECK(soft <= hard + 1e-12);
      CHECK(soft >= previous - 1e-12);
      previous = soft;
    }
    CHECK(previous == doctest::Approx(hard).epsilon(1e-5));
  }
}

TEST_CASE("gradient w.r.t. predictions matches central differences") {
  torch::manual_seed(4);
  SoftDTWConfig cfg{1.0, 0.1, std::nullopt};
  auto gt = torch::randn({4, 3}, torch::kFloat64);
  auto pred = torch::randn({4, 3}, torch::kFloat64).requires_grad_();
  soft_dtw(gt, pred, cfg).backward();
  auto grad = pred.grad();
  const double h = 1e-6;
  for (int64_t i = 0; i < 4; ++i) {
    for (int64_t k = 0; k < 3; ++k) {
      auto up = pred.detach().clone(), down = pred.detach().clone();
      up[i][k] += h;
      down[i][k] -= h;
      const double fd =
          (soft_dtw(gt, up, cfg).item<double>() - soft_dtw(gt, down, cfg).item<double>()) / (2 * h);
      CHECK(grad[i][k].item<double>() == doctest::Approx(fd).epsilon(1e-3).scale(1.0));
    }
  }
}

TEST_CASE("without warp penalty the diagonal equals the unnormalized L1") {
  // Predictions close to the reference make the diagonal path optimal.
  torch::manual_seed(5);
  auto gt = torch::randn({5, 4}, torch::kFloat64) * 3;
  auto pred = gt + 0.01 * torch::randn({5, 4}, torch::kFloat64);
  const double l1_sum = (gt - pred).abs().sum().item<double>();
  CHECK(soft_dtw(gt, pred, {0.0, 1e-6, std::nullopt}).item<double>() == doctest::Approx(l1_sum).epsilon(1e-4));
}

TEST_CASE("a band restricts the admissible paths") {
  torch::manual_seed(6);
  auto c = torch::rand({5, 5}, torch::kFloat64);
  const double free_path = soft_dtw_from_costs(c, {1.0, 1e-6, std::nullopt}).item<double>();
  const double banded = soft_dtw_from_costs(c, {1.0, 1e-6, 0}).item<double>();
  CHECK(banded >= free_path - 1e-9);
  double diagonal = 0.0;
  for (int i = 0; i < 5; ++i) diagonal += c[i][i].item<double>();
  CHECK(banded == doctest::Approx(diagonal));
  CHECK_THROWS_AS(soft_dtw_from_costs(c, {1.0, 0.0, std::nullopt}), ObjectiveError);
}
