#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "rtts/aligner.hpp"
#include "rtts/data.hpp"
#include "rtts/encoder.hpp"
#include "rtts/objectives.hpp"
#include "rtts/signal.hpp"
#include "rtts/vocoder.hpp"

namespace rtts {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A step produced a non-finite loss. Carries the offending batch.
class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(const std::string& what, std::vector<std::string> utterance_ids,
                        std::map<std::string, double> losses);
  const std::vector<std::string>& utterance_ids() const { return ids_; }
  const std::map<std::string, double>& losses() const { return losses_; }

 private:
  std::vector<std::string> ids_;
  std::map<std::string, double> losses_;
};

/// Where rewards are measured: the sampled training segment, or the whole
/// utterance rendered a second time without gradients.
enum class RewardScope { segment, utterance };

struct LossWeights {
  double adversarial = 1.0;
  double mel = 45.0;
  double duration_total = 0.1;
  double reinforced = 1.0;
  double feature_matching = 2.0;
};

/// Every hyperparameter of a run. JSON keys match the field names; unknown
/// keys and wrongly typed values are rejected with the key named.
struct TrainConfig {
  // data
  std::string metadata = "metadata.csv";
  std::string wav_dir = "wavs";
  TokenizerMode tokenizer = TokenizerMode::characters;
  int64_t val_size = 300;
  int64_t test_size = 300;
  int data_workers = 1;

  // model
  std::string preset = "v1";
  int64_t encoder_blocks = 3;
  double predictor_dropout = 0.1;

  // optimisation
  int64_t batch_size = 8;
  double learning_rate = 2e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double weight_decay = 0.01;
  double lr_decay = 0.999;
  int64_t max_steps = 5000;

  // aligner
  double alpha = 2.0;
  RewardMode reward_mode = RewardMode::phoneme_wise;
  RewardScope reward_scope = RewardScope::segment;
  bool shift_pass = true;
  double sigma2 = kDefaultSigma2;
  int64_t segment_frames = kDefaultSegmentFrames;

  // losses
  LossWeights loss_weights;
  bool use_soft_dtw = false;
  SoftDTWConfig soft_dtw;
  bool feature_matching = false;

  // bookkeeping
  uint64_t seed = 1234;
  int64_t checkpoint_interval = 1000;
  int64_t validation_interval = 1000;
  int64_t validation_utterances = 16;
  int num_threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path);
  /// FNV-1a over the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

std::string to_string(RewardScope scope);

/// Resolves `path` against `workdir` unless it is absolute.
std::filesystem::path resolve_path(const std::filesystem::path& workdir, const std::filesystem::path& path);

/// Reads the configured metadata and splits it with the configured seed and
/// split sizes. Training, evaluation and the CLI all go through this.
Splits<MetadataRecord> metadata_splits(const TrainConfig& cfg, const std::filesystem::path& workdir);

/// Fixed character table, or the phoneme table built from the training split.
Vocabulary vocabulary_for(const TrainConfig& cfg, std::span<const MetadataRecord> train);

/// Encoder, duration predictor and decoder: everything that runs at
/// synthesis time.
class GeneratorImpl : public torch::nn::Module {
 public:
  GeneratorImpl(const EncoderConfig& encoder, const DurationPredictorConfig& predictor,
                const DecoderConfig& decoder);

  PhonemeEncoder encoder{nullptr};
  DurationPredictor predictor{nullptr};
  Decoder decoder{nullptr};
};
TORCH_MODULE(Generator);

Generator make_generator(const TrainConfig& cfg, int64_t vocab_size);

/// Models, optimizers and the mel front end for one run.
struct TrainingModels {
  Generator generator{nullptr};
  DiscriminatorSet discriminators{nullptr};
  std::unique_ptr<torch::optim::AdamW> opt_generator;
  std::unique_ptr<torch::optim::AdamW> opt_discriminator;
  MelExtractor mel;

  /// Seeds torch's generator with cfg.seed before creating parameters.
  TrainingModels(const TrainConfig& cfg, int64_t vocab_size);
  void set_learning_rate(double lr);
};

struct StepReport {
  int64_t step = 0;
  std::map<std::string, double> losses;
  double reward_shift_fraction = 0.0;
  int64_t rewarded_tokens = 0;
  int64_t clamped = 0;
  double lr = 0.0;
};

nlohmann::json to_json(const StepReport& r);

/// Forward half of a step: every generator loss term, ready for backward.
struct GeneratorPass {
  torch::Tensor total;       // weighted generator objective
  torch::Tensor audio_keep;  // decoded KEEP segments [B, gamma * 256]
  torch::Tensor gt_audio;    // matching reference segments
  StepReport report;         // losses and reward statistics (step and lr unset)
};

GeneratorPass generator_pass(const Batch& batch, TrainingModels& models, const TrainConfig& cfg,
                             std::mt19937_64& rng);

/// One generator + discriminator update.
///
/// encode -> predict durations -> shift -> scale both to the reference length
/// -> Gaussian-upsample both -> cut one shared segment -> decode both -> mel
/// losses -> rewards -> generator update on
///   adv * g_loss + mel * recon + duration_total * L_total + reinforced * L_re
/// -> discriminator update on the KEEP audio. The SHIFT path runs without
/// gradient tracking and only feeds the rewards.
StepReport train_step(const Batch& batch, TrainingModels& models, const TrainConfig& cfg,
                      std::mt19937_64& rng);

struct CheckpointManifest {
  int64_t step = 0;
  int64_t epoch = 0;
  int64_t cursor = 0;  // batches already consumed in the current epoch
  double lr = 0.0;
  TrainConfig config;
  std::string config_hash;
  std::string vocabulary = "vocab.json";
  std::string rng_state;
  nlohmann::json metrics = nlohmann::json::object();

  nlohmann::json to_json() const;
  static CheckpointManifest from_json(const nlohmann::json& j);
  static CheckpointManifest load(const std::filesystem::path& checkpoint_dir);
};

/// Owns a run: models, optimizers, RNG and progress counters.
class Trainer {
 public:
  Trainer(TrainConfig cfg, Vocabulary vocab);

  /// Rebuilds a trainer from a checkpoint directory; training continues at
  /// manifest.step + 1 with the saved learning rate and RNG states.
  static Trainer resume(const std::filesystem::path& checkpoint_dir);

  StepReport train_step(const Batch& batch);

  /// Mean mel L1 over `utterances`, decoding whole utterances with durations
  /// scaled to the reference length.
  double validate(std::span<const Utterance> utterances);

  /// Writes `<dir>/{model.pt, manifest.json, vocab.json}` via a temporary
  /// directory and a rename.
  void save_checkpoint(const std::filesystem::path& dir, const nlohmann::json& metrics = {}) const;

  const TrainConfig& config() const { return cfg_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  TrainingModels& models() { return models_; }
  int64_t step() const { return step_; }
  int64_t epoch() const { return epoch_; }
  int64_t cursor() const { return cursor_; }
  double learning_rate() const { return lr_; }
  std::mt19937_64& rng() { return rng_; }

  void set_progress(int64_t epoch, int64_t cursor) {
    epoch_ = epoch;
    cursor_ = cursor;
  }
  /// Applies lr_decay and moves to the next epoch.
  void end_epoch();

 private:
  TrainConfig cfg_;
  Vocabulary vocab_;
  TrainingModels models_;
  std::mt19937_64 rng_;
  int64_t step_ = 0;
  int64_t epoch_ = 0;
  int64_t cursor_ = 0;
  double lr_ = 0.0;
};

struct FitResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics_log;
  std::vector<StepReport> reports;
};

/// Full training run: loads the corpus named by the config (relative paths
/// resolve against `workdir`), splits it, trains for max_steps and writes
/// `<output_dir>/metrics.jsonl`, `validation.jsonl` and
/// `checkpoints/step_XXXXXXXX/`.
FitResult fit(const TrainConfig& cfg, const std::filesystem::path& output_dir,
              const std::filesystem::path& workdir = ".",
              const std::optional<std::filesystem::path>& resume_from = std::nullopt);

/// Training on utterances already in memory (used by fit and the smoke tests).
FitResult fit(Trainer& trainer, std::span<const Utterance> train, std::span<const Utterance> val,
              const std::filesystem::path& output_dir);

std::filesystem::path checkpoint_name(const std::filesystem::path& output_dir, int64_t step);

/// Inference from a checkpoint: predicted durations are rounded with error
/// diffusion, upsampled and decoded in one pass (no shift, no segment).
class Synthesizer {
 public:
  Synthesizer(Generator generator, Vocabulary vocab, TrainConfig cfg);
  static Synthesizer load(const std::filesystem::path& checkpoint_dir);

  struct Result {
    Waveform audio;
    std::vector<double> durations;         // raw predictions, frames
    std::vector<int64_t> frames_per_token;  // after rounding
    AlignmentGrid alignment;               // [T, N]
  };

  Result run(std::string_view text) const;
  Result run(const PhonemeSequence& tokens) const;
  Waveform synthesize(std::string_view text) const { return run(text).audio; }

  const Vocabulary& vocabulary() const { return vocab_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  mutable Generator generator_;
  Vocabulary vocab_;
  TrainConfig cfg_;
};

Waveform synthesize(std::string_view text, const std::filesystem::path& checkpoint_dir);

}  // namespace rtts
