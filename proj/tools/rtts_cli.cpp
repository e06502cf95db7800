#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rtts/evaluation.hpp"
#include "rtts/toy_corpus.hpp"
#include "rtts/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string workdir = ".";
  std::optional<uint64_t> seed;

  fs::path path(const std::string& p) const { return rtts::resolve_path(workdir, p); }
  void seed_torch() const {
    if (seed) torch::manual_seed(*seed);
  }
};

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw std::runtime_error(what + " not found: " + p.string());
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  int64_t n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      acc += x;
      ++n;
    }
  }
  return n ? acc / static_cast<double>(n) : std::nan("");
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_cell(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int run_train(const Options& o, const std::string& config, const std::string& resume, const std::string& out) {
  std::optional<fs::path> resume_from;
  rtts::TrainConfig cfg;
  if (!resume.empty()) {
    resume_from = o.path(resume);
    require_file(*resume_from / "manifest.json", "checkpoint");
  }
  if (!config.empty()) {
    require_file(o.path(config), "config");
    cfg = rtts::TrainConfig::load(o.path(config));
  } else if (!resume_from) {
    throw std::runtime_error("train: --config is required unless --resume is given");
  }
  if (o.seed) cfg.seed = *o.seed;
  const auto result = rtts::fit(cfg, o.path(out), o.workdir, resume_from);
  std::cout << "trained to step " << (result.reports.empty() ? 0 : result.reports.back().step)
            << "; checkpoint " << result.final_checkpoint.string() << "\n";
  return 0;
}

int run_synth(const Options& o, const std::string& ckpt, const std::string& text, const std::string& out) {
  o.seed_torch();
  const auto synth = rtts::Synthesizer::load(o.path(ckpt));
  const auto result = synth.run(text);
  rtts::write_wav(o.path(out), result.audio);
  std::cout << "wrote " << result.audio.size() << " samples (" << result.audio.duration_seconds() << " s) to "
            << o.path(out).string() << "\n";
  return 0;
}

int run_plot(const Options& o, const std::string& ckpt, const std::string& text, const std::string& out) {
  o.seed_torch();
  const auto synth = rtts::Synthesizer::load(o.path(ckpt));
  rtts::plot_alignment(synth.run(text).alignment, o.path(out));
  std::cout << "wrote " << o.path(out).string() << "\n";
  return 0;
}

int run_eval(const Options& o, const std::string& ckpt, const std::string& split, const std::string& durations,
             const std::string& out_dir) {
  o.seed_torch();
  const auto synth = rtts::Synthesizer::load(o.path(ckpt));
  const auto& cfg = synth.config();
  const auto splits = rtts::metadata_splits(cfg, o.workdir);
  const auto& records = split == "test" ? splits.test : split == "val" ? splits.val : splits.train;
  const auto entries = rtts::make_entries(records, o.path(cfg.wav_dir), synth.vocabulary());

  std::map<std::string, rtts::DurationTargets> targets;
  if (!durations.empty()) {
    require_file(o.path(durations), "durations file");
    targets = rtts::load_duration_targets(o.path(durations));
    rtts::check_duration_targets(targets, entries);
  }

  const auto dir = o.path(out_dir);
  fs::create_directories(dir);
  std::ofstream csv(dir / "metrics.csv");
  if (!csv) throw std::runtime_error((dir / "metrics.csv").string() + ": cannot open for writing");
  csv << "utterance_id,num_tokens,duration_error,mcd13,rmse_f0\n";
  std::vector<double> dur_errors, mcds, f0s;
  for (const auto& e : entries) {
    const auto reference = rtts::load_audio(e.audio_path);
    const auto result = synth.run(e.phonemes);
    double dur = std::nan(""), mcd = std::nan(""), f0 = std::nan("");
    if (auto it = targets.find(e.utterance_id); it != targets.end()) {
      dur = rtts::duration_error(result.durations, it->second);
    }
    try {
      mcd = rtts::mcd13(reference, result.audio);
    } catch (const rtts::EvaluationError&) {
    }
    try {
      f0 = rtts::rmse_f0(reference, result.audio);
    } catch (const rtts::EvaluationError&) {
    }
    dur_errors.push_back(dur);
    mcds.push_back(mcd);
    f0s.push_back(f0);
    csv << e.utterance_id << ',' << e.phonemes.size() << ',' << csv_cell(dur) << ',' << csv_cell(mcd) << ','
        << csv_cell(f0) << '\n';
  }
  const auto count_finite = [](const std::vector<double>& v) {
    return std::count_if(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  json summary{{"checkpoint", o.path(ckpt).string()},
               {"split", split},
               {"utterances", entries.size()},
               {"duration_error", finite_or_null(mean_of(dur_errors))},
               {"mcd13", finite_or_null(mean_of(mcds))},
               {"rmse_f0", finite_or_null(mean_of(f0s))},
               {"scored",
                {{"duration_error", count_finite(dur_errors)},
                 {"mcd13", count_finite(mcds)},
                 {"rmse_f0", count_finite(f0s)}}}};
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_toy(const Options& o, const std::string& out, int64_t utterances) {
  rtts::ToyCorpusConfig cfg;
  cfg.num_utterances = utterances;
  if (o.seed) cfg.seed = *o.seed;
  const auto corpus = rtts::write_toy_corpus(o.path(out), cfg);
  std::cout << "wrote " << corpus.utterance_ids.size() << " utterances to " << o.path(out).string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforced-aligner text-to-speech toolkit"};
  app.require_subcommand(1);
  Options o;
  uint64_t seed = 0;
  app.add_option("--workdir", o.workdir, "Directory every relative path is resolved against")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides the config seed for train)");

  std::string config, resume, out = "run", ckpt, text, split = "test", durations, out_dir = "eval";
  int64_t utterances = 40;

  auto* train = app.add_subcommand("train", "Train a model from a JSON config");
  train->add_option("--config", config, "Training config (JSON)");
  train->add_option("--resume", resume, "Checkpoint directory to resume from");
  train->add_option("--out", out, "Output directory for logs and checkpoints")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Synthesize a WAV from text");
  synth->add_option("--ckpt", ckpt, "Checkpoint directory")->required();
  synth->add_option("--text", text, "Input text")->required();
  synth->add_option("--out", out, "Output WAV path")->required();

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a corpus split");
  eval->add_option("--ckpt", ckpt, "Checkpoint directory")->required();
  eval->add_option("--split", split, "Corpus split")->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval->add_option("--durations", durations, "Reference durations (TSV: id<TAB>d1 d2 ...)");
  eval->add_option("--out-dir", out_dir, "Directory for metrics.csv and summary.json")->capture_default_str();

  auto* plot = app.add_subcommand("plot-align", "Render the predicted alignment as a PNG heatmap");
  plot->add_option("--ckpt", ckpt, "Checkpoint directory")->required();
  plot->add_option("--text", text, "Input text")->required();
  plot->add_option("--out", out, "Output PNG path")->required();

  auto* toy = app.add_subcommand("make-toy-corpus", "Write a synthetic corpus with known durations");
  toy->add_option("--out", out, "Output directory")->required();
  toy->add_option("--utterances", utterances, "Number of utterances")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (*seed_opt) o.seed = seed;

  try {
    if (*train) return run_train(o, config, resume, out);
    if (*synth) return run_synth(o, ckpt, text, out);
    if (*eval) return run_eval(o, ckpt, split, durations, out_dir);
    if (*plot) return run_plot(o, ckpt, text, out);
    if (*toy) return run_toy(o, out, utterances);
  } catch (const c10::Error& e) {
    std::cerr << "error: " << e.what_without_backtrace() << "\nRun with --help for more information.\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for more information.\n";
    return 1;
  }
  return 1;
}
