// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--workdir DIR] [--cli PATH] [--only 1,5,...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "dtw_oracle.hpp"
#include "rtts/evaluation.hpp"
#include "rtts/random.hpp"
#include "rtts/toy_corpus.hpp"
#include "rtts/trainer.hpp"

using namespace rtts;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

torch::Tensor f64(std::vector<double> v) { return torch::tensor(v, torch::kFloat64); }

double relative_error(const torch::Tensor& got, const torch::Tensor& want) {
  return (got - want).norm().item<double>() / std::max(want.norm().item<double>(), 1e-12);
}

// ---------------------------------------------------------------- 1
Outcome alignment_kernel() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst_row = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(uniform_below(rng, 30));
    const int64_t t = 1 + static_cast<int64_t>(uniform_below(rng, 200));
    const double sigma2 = 0.1 + 50.0 * u01(rng);
    std::vector<double> d(static_cast<size_t>(n));
    for (auto& x : d) x = 0.05 + 5.0 * u01(rng);
    auto scaled = scale_durations(f64(d), static_cast<double>(t));
    auto grid = gaussian_upsample(torch::randn({n, 4}, torch::kFloat64), scaled.centers, sigma2, t).grid;
    worst_row = std::max(worst_row, (grid.weights.sum(1) - 1.0).abs().max().item<double>());
  }

  auto h = torch::randn({1, 16}, torch::kFloat64);
  auto single = gaussian_upsample(h, f64({3.7}), 10.0, 9);
  const bool identity = torch::allclose(single.grid.weights, torch::ones({9, 1}, torch::kFloat64), 0, 1e-12) &&
                        torch::allclose(single.frames, h.expand({9, 16}), 0, 1e-12);

  // Central differences w.r.t. hidden states and centres on 5-token, 8-frame instances.
  double worst_grad = 0.0;
  torch::manual_seed(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto hidden = torch::randn({5, 3}, torch::kFloat64);
    auto centers = (torch::rand({5}, torch::kFloat64) * 1.5 + 0.25).cumsum(0) * 1.3;
    auto probe = torch::randn({8, 3}, torch::kFloat64);
    auto objective = [&](const torch::Tensor& hh, const torch::Tensor& cc) {
      return (gaussian_upsample(hh, cc, 10.0, 8).frames * probe).sum();
    };
    auto hv = hidden.clone().requires_grad_();
    auto cv = centers.clone().requires_grad_();
    objective(hv, cv).backward();
    const double eps = 1e-6;
    auto fd_h = torch::zeros_like(hidden);
    for (int64_t i = 0; i < hidden.numel(); ++i) {
      auto up = hidden.clone(), down = hidden.clone();
      up.view(-1)[i] += eps;
      down.view(-1)[i] -= eps;
      fd_h.view(-1)[i] = (objective(up, centers) - objective(down, centers)).item<double>() / (2 * eps);
    }
    auto fd_c = torch::zeros_like(centers);
    for (int64_t i = 0; i < centers.numel(); ++i) {
      auto up = centers.clone(), down = centers.clone();
      up[i] += eps;
      down[i] -= eps;
      fd_c[i] = (objective(hidden, up) - objective(hidden, down)).item<double>() / (2 * eps);
    }
    worst_grad = std::max({worst_grad, relative_error(hv.grad(), fd_h), relative_error(cv.grad(), fd_c)});
  }
  Outcome o;
  o.pass = worst_row <= 1e-6 && identity && worst_grad <= 1e-4;
  o.detail = "max |row sum - 1| " + fmt("%.2e", worst_row) + "; N=1 identity " + (identity ? "ok" : "broken") +
             "; max relative gradient error " + fmt("%.2e", worst_grad);
  return o;
}

// ---------------------------------------------------------------- 2
// Independent oracle: explicit bins, then "keep unless shift is strictly lower".
std::vector<int> oracle_keep(const std::vector<double>& lk, const std::vector<double>& ls, RewardMode mode,
                             int64_t n) {
  const auto len = static_cast<int64_t>(lk.size());
  std::vector<int> keep(static_cast<size_t>(n));
  if (mode == RewardMode::segment_wise) {
    const double a = std::accumulate(lk.begin(), lk.end(), 0.0) / len;
    const double b = std::accumulate(ls.begin(), ls.end(), 0.0) / len;
    std::fill(keep.begin(), keep.end(), a <= b ? 1 : 0);
    return keep;
  }
  for (int64_t j = 0; j < n; ++j) {
    const auto lo = static_cast<int64_t>(std::floor(static_cast<double>(j * len) / n));
    const auto hi = static_cast<int64_t>(std::ceil(static_cast<double>((j + 1) * len) / n));
    double a = 0.0, b = 0.0;
    for (int64_t k = lo; k < hi; ++k) {
      a += lk[static_cast<size_t>(k)];
      b += ls[static_cast<size_t>(k)];
    }
    keep[static_cast<size_t>(j)] = a / (hi - lo) <= b / (hi - lo) ? 1 : 0;
  }
  return keep;
}

Outcome reward_shift() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int mismatches = 0, one_hot_violations = 0, tie_violations = 0, sum_violations = 0, lre_violations = 0;

  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + static_cast<int64_t>(uniform_below(rng, 4));
    const auto len = n + static_cast<int64_t>(uniform_below(rng, 9));
    std::vector<double> lk(static_cast<size_t>(len)), ls(static_cast<size_t>(len));
    for (int64_t k = 0; k < len; ++k) {
      // Quarter-steps make exact ties common.
      lk[static_cast<size_t>(k)] = std::floor(u01(rng) * 8) / 4;
      ls[static_cast<size_t>(k)] = trial % 10 == 0 ? lk[static_cast<size_t>(k)] : std::floor(u01(rng) * 8) / 4;
    }
    for (auto mode : {RewardMode::segment_wise, RewardMode::phoneme_wise}) {
      auto r = compute_reward(lk, ls, mode, n);
      auto expected = oracle_keep(lk, ls, mode, n);
      for (int64_t j = 0; j < n; ++j) {
        if (r.keep[static_cast<size_t>(j)] != expected[static_cast<size_t>(j)]) ++mismatches;
        if (r.keep[static_cast<size_t>(j)] + r.shift[static_cast<size_t>(j)] != 1) ++one_hot_violations;
      }
      if (trial % 10 == 0 && r.shift_count() != 0) ++tie_violations;
    }
  }

  // Every keep/shift pattern for N <= 4 with one frame per token.
  for (int64_t n = 1; n <= 4; ++n) {
    for (int pattern = 0; pattern < (1 << n); ++pattern) {
      std::vector<double> lk(static_cast<size_t>(n)), ls(static_cast<size_t>(n));
      for (int64_t j = 0; j < n; ++j) {
        const bool shift_wins = (pattern >> j) & 1;
        lk[static_cast<size_t>(j)] = 1.0 + j;
        ls[static_cast<size_t>(j)] = shift_wins ? 0.5 + j : 1.0 + j;
      }
      auto r = compute_reward(lk, ls, RewardMode::phoneme_wise, n);
      for (int64_t j = 0; j < n; ++j) {
        if (r.shift[static_cast<size_t>(j)] != ((pattern >> j) & 1)) ++mismatches;
      }
    }
  }

  // Sum preservation and the reinforced loss identity.
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = 1 + static_cast<int64_t>(uniform_below(rng, 12));
    const double alpha = 0.25 * (1 + uniform_below(rng, 12));
    std::vector<double> d(static_cast<size_t>(n));
    for (auto& x : d) x = alpha + 0.25 * static_cast<double>(uniform_below(rng, 40));
    auto shifted = apply_shift(f64(d), alpha, trial % 2 ? RewardMode::phoneme_wise : RewardMode::segment_wise);
    const double before = std::accumulate(d.begin(), d.end(), 0.0);
    if (shifted.clamped != 0 || shifted.durations.sum().item<double>() != before) ++sum_violations;
    if (n % 2 == 1 && shifted.durations[n - 1].item<double>() != d.back()) ++sum_violations;

    RewardVector r = RewardVector::all_keep(n);
    int64_t selected = 0;
    for (int64_t j = 0; j < n; ++j) {
      if (uniform_below(rng, 2) && !(n % 2 == 1 && j == n - 1)) {
        r.keep[static_cast<size_t>(j)] = 0;
        r.shift[static_cast<size_t>(j)] = 1;
        ++selected;
      }
    }
    const double lre = reinforced_duration_loss(f64(d), shifted.durations, r).item<double>();
    if (lre != alpha * static_cast<double>(selected)) ++lre_violations;
  }
  auto odd = apply_shift(f64({1, 1, 1}), 2.0, RewardMode::phoneme_wise).durations;
  const bool odd_rule = torch::equal(odd, f64({3, 0, 1}));

  Outcome o;
  o.pass = mismatches == 0 && one_hot_violations == 0 && tie_violations == 0 && sum_violations == 0 &&
           lre_violations == 0 && odd_rule;
  o.detail = "oracle mismatches " + std::to_string(mismatches) + "; one-hot violations " +
             std::to_string(one_hot_violations) + "; tie violations " + std::to_string(tie_violations) +
             "; sum violations " + std::to_string(sum_violations) + "; L_re violations " +
             std::to_string(lre_violations) + "; odd-N clamp example " + (odd_rule ? "ok" : "broken");
  return o;
}

// ---------------------------------------------------------------- 3
Outcome soft_dtw_suite() {
  torch::manual_seed(303);
  double worst_gap = 0.0;
  int bound_violations = 0;
  for (double omega : {0.0, 1.0}) {
    for (int64_t n = 1; n <= 5; ++n) {
      for (int64_t m = 1; m <= 5; ++m) {
        for (int rep = 0; rep < 3; ++rep) {
          auto c = torch::rand({n, m}, torch::kFloat64) * 4;
          const double hard = brute_force_dtw(c, omega);
          const double sharp = soft_dtw_from_costs(c, {omega, 1e-6, std::nullopt}).item<double>();
          worst_gap = std::max(worst_gap, std::abs(sharp - hard));
          for (double tau : {1.0, 0.1, 0.01}) {
            if (soft_dtw_from_costs(c, {omega, tau, std::nullopt}).item<double>() > hard + 1e-12) ++bound_violations;
          }
        }
      }
    }
  }
  double worst_grad = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    SoftDTWConfig cfg{1.0, 0.1, std::nullopt};
    auto gt = torch::randn({4, 6}, torch::kFloat64);
    auto pred = torch::randn({4, 6}, torch::kFloat64);
    auto pv = pred.clone().requires_grad_();
    soft_dtw(gt, pv, cfg).backward();
    auto fd = torch::zeros_like(pred);
    const double eps = 1e-6;
    for (int64_t i = 0; i < pred.numel(); ++i) {
      auto up = pred.clone(), down = pred.clone();
      up.view(-1)[i] += eps;
      down.view(-1)[i] -= eps;
      fd.view(-1)[i] = (soft_dtw(gt, up, cfg) - soft_dtw(gt, down, cfg)).item<double>() / (2 * eps);
    }
    worst_grad = std::max(worst_grad, relative_error(pv.grad(), fd));
  }
  Outcome o;
  o.pass = worst_gap <= 1e-4 && bound_violations == 0 && worst_grad <= 1e-3;
  o.detail = "max |soft(tau=1e-6) - enumerated| " + fmt("%.2e", worst_gap) + " over shapes up to 5x5; soft > hard " +
             std::to_string(bound_violations) + " times; 4x4 relative gradient error " + fmt("%.2e", worst_grad);
  return o;
}

// ---------------------------------------------------------------- 4
Outcome shape_contracts() {
  torch::manual_seed(404);
  std::mt19937_64 rng(404);
  int decode_fail = 0, encode_fail = 0, synth_fail = 0;
  Decoder dec(DecoderConfig::preset("small"));
  dec->eval();
  EncoderConfig ec;
  ec.vocab_size = Vocabulary::characters().size();
  PhonemeEncoder enc(ec);
  enc->eval();
  torch::NoGradGuard no_grad;
  for (int trial = 0; trial < 50; ++trial) {
    const auto gamma = 1 + static_cast<int64_t>(uniform_below(rng, 64));
    const auto b = 1 + static_cast<int64_t>(uniform_below(rng, 2));
    if (dec(torch::randn({b, gamma, kHiddenDim})).sizes() != torch::IntArrayRef({b, gamma * 256})) ++decode_fail;
    const auto n = 1 + static_cast<int64_t>(uniform_below(rng, 60));
    auto ids = torch::randint(1, ec.vocab_size, {b, n}, torch::kInt64);
    if (enc(ids, torch::ones({b, n}, torch::kBool)).hidden.sizes() != torch::IntArrayRef({b, n, kHiddenDim})) {
      ++encode_fail;
    }
  }

  TrainConfig cfg;
  cfg.preset = "small";
  Synthesizer synth(make_generator(cfg, Vocabulary::characters().size()), Vocabulary::characters(), cfg);
  const std::string letters = "abcdefghijklmnopqrstuvwxyz";
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    const auto len = 2 + uniform_below(rng, 20);
    for (size_t k = 0; k < len; ++k) text += k % 6 == 5 ? ' ' : letters[uniform_below(rng, letters.size())];
    try {
      auto r = synth.run(text);
      const auto frames = std::accumulate(r.frames_per_token.begin(), r.frames_per_token.end(), int64_t{0});
      const auto tokens = static_cast<size_t>(Vocabulary::characters().tokenize(text).size());
      if (r.audio.size() != frames * 256 || r.alignment.weights.size(0) != frames || r.durations.size() != tokens) {
        ++synth_fail;
      }
    } catch (const std::exception&) {
      ++synth_fail;
    }
  }
  Outcome o;
  o.pass = decode_fail == 0 && encode_fail == 0 && synth_fail == 0;
  o.detail = "decode " + std::to_string(50 - decode_fail) + "/50, encoder " + std::to_string(50 - encode_fail) +
             "/50, synthesize " + std::to_string(50 - synth_fail) + "/50 length contracts hold";
  return o;
}

// ---------------------------------------------------------------- 5
TrainConfig overfit_config(const fs::path& corpus) {
  TrainConfig cfg;
  cfg.metadata = (corpus / "metadata.csv").string();
  cfg.wav_dir = (corpus / "wavs").string();
  cfg.val_size = 1;
  cfg.test_size = 1;
  cfg.preset = "small";
  cfg.batch_size = 2;
  cfg.max_steps = 2000;
  cfg.segment_frames = 32;
  cfg.checkpoint_interval = 500;
  cfg.validation_interval = 500;
  cfg.validation_utterances = 1;
  // With two utterances the encoder can memorize token parity, and at the
  // default weight the reinforced loss drives durations into the shift pattern.
  cfg.loss_weights.reinforced = 0.1;
  return cfg;
}

double mean_over(const std::vector<StepReport>& reports, size_t first, size_t last,
                 const std::function<double(const StepReport&)>& f) {
  double acc = 0.0;
  for (size_t i = first; i < last; ++i) acc += f(reports[i]);
  return acc / static_cast<double>(last - first);
}

Outcome overfit(const fs::path& workdir) {
  const auto start = std::chrono::steady_clock::now();
  ToyCorpusConfig toy;
  toy.num_utterances = 4;
  const auto corpus = write_toy_corpus(workdir / "overfit_corpus", toy);
  const auto cfg = overfit_config(workdir / "overfit_corpus");
  const auto result = fit(cfg, workdir / "overfit_run");
  const auto& reports = result.reports;
  const auto steps = reports.size();

  auto mel = [](const StepReport& r) { return r.losses.at("mel_l1"); };
  const double at_step10 = mel(reports.at(9));
  const double final_mel = mean_over(reports, steps - 10, steps, mel);
  const double ratio = final_mel / at_step10;

  const auto tenth = std::max<size_t>(1, steps / 10);
  auto frac = [](const StepReport& r) { return r.reward_shift_fraction; };
  const double early = mean_over(reports, 0, tenth, frac);
  const double late = mean_over(reports, steps - tenth, steps, frac);

  const auto synth = Synthesizer::load(result.final_checkpoint);
  const auto splits = metadata_splits(cfg, ".");
  int64_t transitions = 0, monotone = 0;
  for (const auto& record : splits.train) {
    auto w = synth.run(record.text).alignment.weights;
    auto arg = w.argmax(1);
    for (int64_t t = 1; t < arg.size(0); ++t) {
      ++transitions;
      if (arg[t].item<int64_t>() >= arg[t - 1].item<int64_t>()) ++monotone;
    }
  }
  const double monotone_share = transitions ? static_cast<double>(monotone) / transitions : 0.0;
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;

  Outcome o;
  o.pass = steps <= 2000 && ratio < 0.35 && monotone_share >= 0.95 && late < early && minutes <= 180.0;
  o.detail = std::to_string(steps) + " steps in " + fmt("%.1f", minutes) + " min; mel L1 step10 " +
             fmt("%.3f", at_step10) + " -> final " + fmt("%.3f", final_mel) + " (ratio " + fmt("%.3f", ratio) +
             ", need < 0.35); monotone argmax transitions " + fmt("%.1f%%", 100 * monotone_share) +
             " (need >= 95%); shift fraction first 10% " + fmt("%.3f", early) + " vs last 10% " + fmt("%.3f", late);
  return o;
}

// ---------------------------------------------------------------- 6
Outcome duration_losses() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = 1 + static_cast<int64_t>(uniform_below(rng, 16));
    const double alpha = u(rng) / 3;
    const double m = u(rng) * n;
    std::vector<double> d(static_cast<size_t>(n)), ds(static_cast<size_t>(n));
    std::vector<uint8_t> keep(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) {
      d[static_cast<size_t>(j)] = u(rng);
      ds[static_cast<size_t>(j)] = d[static_cast<size_t>(j)] + (j % 2 ? -alpha : alpha);
      keep[static_cast<size_t>(j)] = static_cast<uint8_t>(uniform_below(rng, 2));
    }
    double total = m, re = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      const auto i = static_cast<size_t>(j);
      total -= d[i];
      const double target = keep[i] ? d[i] : ds[i];
      re += std::abs(d[i] - target);
    }
    total *= total;
    RewardVector r;
    for (auto k : keep) {
      r.keep.push_back(k);
      r.shift.push_back(static_cast<uint8_t>(1 - k));
    }
    const double got_total = total_duration_loss(f64(d), m).item<double>();
    const double got_re = reinforced_duration_loss(f64(d), f64(ds), r).item<double>();
    worst = std::max({worst, std::abs(got_total - total) / std::max(1.0, total),
                      std::abs(got_re - re) / std::max(1.0, re)});
  }
  Outcome o;
  o.pass = worst <= 1e-6;
  o.detail = "20 random instances; max relative deviation from hand computation " + fmt("%.2e", worst);
  return o;
}

// ---------------------------------------------------------------- 7
Waveform tone(double hz, double seconds) {
  Waveform w;
  const auto n = static_cast<int64_t>(seconds * kSampleRate);
  for (int64_t i = 0; i < n; ++i) {
    w.samples.push_back(static_cast<float>(0.4 * std::sin(2 * M_PI * hz * i / kSampleRate) +
                                           0.1 * std::sin(4 * M_PI * hz * i / kSampleRate)));
  }
  return w;
}

Outcome metric_zero_cases() {
  auto x = tone(170.0, 0.6);
  const double mcd = mcd13(x, x);
  const double f0 = rmse_f0(x, x);
  DurationTargets t{"u", {3, 1, 4, 1, 5}};
  const double dur = duration_error(std::vector<double>{3, 1, 4, 1, 5}, t);
  const double offset = rmse_f0(tone(200.0, 0.6), tone(210.0, 0.6));
  Outcome o;
  o.pass = mcd == 0.0 && f0 == 0.0 && dur == 0.0 && std::abs(offset - 10.0) <= 2.0;
  o.detail = "mcd13(x,x) " + fmt("%g", mcd) + ", rmse_f0(x,x) " + fmt("%g", f0) + ", duration_error(x,x) " +
             fmt("%g", dur) + "; 200 vs 210 Hz RMSE_f0 " + fmt("%.3f", offset) + " Hz (need 10 +/- 2)";
  return o;
}

// ---------------------------------------------------------------- 8
std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const fs::path& workdir, const std::string& cli) {
  ToyCorpusConfig toy;
  toy.num_utterances = 8;
  write_toy_corpus(workdir / "determinism_corpus", toy);
  TrainConfig cfg;
  cfg.metadata = "determinism_corpus/metadata.csv";
  cfg.wav_dir = "determinism_corpus/wavs";
  cfg.val_size = 1;
  cfg.test_size = 1;
  cfg.preset = "small";
  cfg.batch_size = 2;
  cfg.max_steps = 10;
  cfg.segment_frames = 16;
  cfg.checkpoint_interval = 10;
  cfg.validation_interval = 10;
  cfg.validation_utterances = 1;
  std::ofstream(workdir / "determinism.json") << cfg.to_json().dump(2);

  std::string how;
  for (const char* run : {"det_a", "det_b"}) {
    fs::remove_all(workdir / run);
    if (!cli.empty()) {
      const auto cmd = "\"" + cli + "\" --workdir \"" + workdir.string() + "\" --seed 42 train --config determinism.json --out " +
                       run + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, "train command failed"};
      how = "two CLI train runs";
    } else {
      auto c = cfg;
      c.seed = 42;
      fit(c, workdir / run, workdir);
      how = "two library fit runs";
    }
  }
  const auto a = read_all(workdir / "det_a" / "metrics.jsonl");
  const auto b = read_all(workdir / "det_b" / "metrics.jsonl");
  const auto lines = std::count(a.begin(), a.end(), '\n');
  Outcome o;
  o.pass = !a.empty() && a == b && lines == 10;
  o.detail = how + ", " + std::to_string(lines) + " logged steps, loss logs " +
             (a == b ? "bitwise identical" : "differ");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string workdir = "acceptance_run", cli, only;
  app.add_option("--workdir", workdir, "Scratch directory");
  app.add_option("--cli", cli, "Path to the rtts executable for the determinism check");
  app.add_option("--only", only, "Comma-separated criterion numbers to run");
  CLI11_PARSE(app, argc, argv);
  torch::set_num_threads(1);

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (!tok.empty()) selected.insert(std::stoi(tok));
  }
  const fs::path dir = fs::absolute(workdir);
  fs::create_directories(dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"alignment kernel", alignment_kernel},
      {"reward and shift", reward_shift},
      {"soft-DTW", soft_dtw_suite},
      {"shape and length contracts", shape_contracts},
      {"overfit smoke", [&] { return overfit(dir); }},
      {"duration loss exactness", duration_losses},
      {"metric zero cases", metric_zero_cases},
      {"determinism", [&] { return determinism(dir, cli); }},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::cout << "criterion " << number << " [" << criteria[i].first << "]: " << (o.pass ? "PASS" : "FAIL") << " ("
              << o.detail << "; " << fmt("%.1f", secs) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
