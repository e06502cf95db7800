#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include "rtts/data.hpp"
#include "rtts/encoder.hpp"
#include "rtts/vocoder.hpp"

using namespace rtts;

namespace {

PhonemeEncoder make_encoder(int64_t vocab = 12) {
  EncoderConfig cfg;
  cfg.vocab_size = vocab;
  return PhonemeEncoder(cfg);
}

}  // namespace

TEST_CASE("encoder keeps the sequence length") {
  torch::manual_seed(1);
  auto enc = make_encoder();
  enc->eval();
  for (int64_t n : {1, 2, 7, 31}) {
    auto ids = torch::randint(1, 12, {2, n}, torch::kInt64);
    auto state = enc(ids, torch::ones({2, n}, torch::kBool));
    CHECK(state.hidden.sizes() == torch::IntArrayRef({2, n, kHiddenDim}));
  }
}

TEST_CASE("encoder is deterministic in eval mode") {
  torch::manual_seed(2);
  auto enc = make_encoder();
  enc->eval();
  auto ids = torch::tensor({{3, 4, 5}}, torch::kInt64);
  auto mask = torch::ones({1, 3}, torch::kBool);
  CHECK(torch::equal(enc(ids, mask).hidden, enc(ids, mask).hidden));
}

TEST_CASE("padded batch matches unbatched encoding") {
  torch::manual_seed(3);
  auto enc = make_encoder();
  enc->eval();
  auto ids = torch::tensor({{3, 4, 5, 6, 7}, {8, 9, 0, 0, 0}}, torch::kInt64);
  auto mask = ids != kPadId;
  auto batched = enc(ids, mask).hidden;
  auto alone = enc(ids[1].narrow(0, 0, 2).unsqueeze(0), torch::ones({1, 2}, torch::kBool)).hidden;
  CHECK(torch::allclose(batched[1].narrow(0, 0, 2), alone[0], 1e-5, 1e-5));
  CHECK((batched[1].narrow(0, 2, 3) == 0).all().item<bool>());
}

TEST_CASE("out-of-range ids are rejected") {
  auto enc = make_encoder(5);
  CHECK_THROWS_AS(enc(torch::tensor({{1, 5}}, torch::kInt64), torch::ones({1, 2}, torch::kBool)), std::out_of_range);
}

TEST_CASE("every real token's embedding receives gradient") {
  torch::manual_seed(4);
  auto enc = make_encoder();
  auto ids = torch::tensor({{1, 2, 3, 4}, {5, 6, 0, 0}}, torch::kInt64);
  auto state = enc(ids, ids != kPadId);
  state.hidden.pow(2).sum().backward();
  auto grad = enc->named_parameters()["embedding.weight"].grad();
  REQUIRE(grad.defined());
  for (int64_t id : {1, 2, 3, 4, 5, 6}) {
    const double norm = grad[id].norm().item<double>();
    CHECK(std::isfinite(norm));
    CHECK(norm > 0.0);
  }
  CHECK(grad[0].norm().item<double>() == 0.0);
}

TEST_CASE("decoder output is frames * 256 samples inside (-1, 1)") {
  torch::manual_seed(5);
  Decoder dec(DecoderConfig::preset("small"));
  dec->eval();
  torch::NoGradGuard no_grad;
  for (int64_t frames : {1, 3, 16}) {
    auto out = dec(torch::randn({2, frames, kHiddenDim}));
    CHECK(out.sizes() == torch::IntArrayRef({2, frames * kUpsampleFactor}));
    CHECK(torch::isfinite(out).all().item<bool>());
    CHECK((out.abs() < 1).all().item<bool>());
  }
  CHECK(DecoderConfig::preset("v1").total_upsampling() == 256);
  CHECK(DecoderConfig::preset("v2").initial_channels == 128);
  CHECK_THROWS(DecoderConfig::preset("huge"));
}

TEST_CASE("full-width decoder maps 128 frames to 32768 samples") {
  torch::manual_seed(6);
  Decoder dec(DecoderConfig::preset("v2"));
  torch::NoGradGuard no_grad;
  CHECK(dec(torch::randn({1, 128, kHiddenDim})).size(1) == 32768);
}

TEST_CASE("discriminator set has three scale and five period branches") {
  torch::manual_seed(7);
  DiscriminatorSet disc(DiscriminatorConfig::preset("small"));
  torch::NoGradGuard no_grad;
  auto outs = disc(torch::randn({2, 32768}) * 0.1);
  CHECK(outs.size() == 8);
  for (const auto& o : outs) {
    CHECK(o.logits.size(0) == 2);
    CHECK(!o.features.empty());
  }
  CHECK(disc->scale_lengths(32768) == std::vector<int64_t>{32768, 16384, 8192});
}

TEST_CASE("period branches pad lengths that are not multiples of the period") {
  torch::manual_seed(8);
  PeriodDiscriminator p(7, 16);
  torch::NoGradGuard no_grad;
  auto out = p(torch::randn({1, 1000}));
  CHECK(out.features.front().size(3) == 7);
}

TEST_CASE("scale branch input is a stride-2 mean pool") {
  auto x = torch::randn({2, 64});
  auto pooled = halve_rate(x);
  auto explicit_mean = (x.view({2, 32, 2}).sum(-1)) / 2.0;
  CHECK(torch::allclose(pooled, explicit_mean, 1e-6, 1e-6));
}

TEST_CASE("least-squares GAN losses") {
  std::vector<torch::Tensor> ones{torch::ones({2, 5})}, zeros{torch::zeros({2, 5})};
  CHECK(discriminator_loss(ones, zeros).item<double>() == 0.0);
  CHECK(generator_loss(ones).item<double>() == 0.0);
  std::vector<torch::Tensor> half{torch::full({1, 1}, 0.5)};
  CHECK(discriminator_loss(half, half).item<double>() == doctest::Approx(0.5));
  auto fake = torch::full({1, 3}, 0.2, torch::requires_grad());
  generator_loss({fake}).backward();
  CHECK(fake.grad().abs().sum().item<double>() > 0.0);
}

TEST_CASE("feature matching is zero for identical features") {
  torch::manual_seed(9);
  DiscriminatorSet disc(DiscriminatorConfig::preset("small"));
  torch::NoGradGuard no_grad;
  auto x = torch::randn({1, 4096}) * 0.1;
  auto a = disc(x);
  CHECK(feature_matching_loss(a, a).item<double>() == 0.0);
}
