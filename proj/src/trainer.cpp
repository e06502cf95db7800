#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rtts/trainer.hpp"

namespace rtts {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kHop = 256;

std::vector<double> to_vector(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

/// Per-frame mel L1 of `audio` against `reference`, both [S] with S a hop multiple.
std::vector<double> frame_losses(const MelExtractor& mel, const torch::Tensor& reference,
                                 const torch::Tensor& audio) {
  return to_vector(mel_l1(mel(reference), mel(audio)).per_frame);
}

void fill_rewards(const RewardVector& r, int64_t first, torch::Tensor& keep, torch::Tensor& shift, int64_t row) {
  for (int64_t j = 0; j < r.size(); ++j) {
    keep[row][first + j] = static_cast<float>(r.keep[static_cast<size_t>(j)]);
    shift[row][first + j] = static_cast<float>(r.shift[static_cast<size_t>(j)]);
  }
}

void write_json_line(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw CheckpointError(path.string() + ": cannot open for appending");
  out << j.dump() << '\n';
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw CheckpointError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw CheckpointError(path.string() + ": write failed");
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

TrainingDivergedError::TrainingDivergedError(const std::string& what, std::vector<std::string> utterance_ids,
                                             std::map<std::string, double> losses)
    : std::runtime_error(what), ids_(std::move(utterance_ids)), losses_(std::move(losses)) {}

fs::path resolve_path(const fs::path& workdir, const fs::path& path) {
  return path.is_absolute() ? path : workdir / path;
}

Splits<MetadataRecord> metadata_splits(const TrainConfig& cfg, const fs::path& workdir) {
  const auto records = read_metadata(resolve_path(workdir, cfg.metadata));
  return make_splits(records, cfg.seed, static_cast<size_t>(cfg.val_size), static_cast<size_t>(cfg.test_size));
}

Vocabulary vocabulary_for(const TrainConfig& cfg, std::span<const MetadataRecord> train) {
  if (cfg.tokenizer == TokenizerMode::characters) return Vocabulary::characters();
  std::vector<std::string> texts;
  texts.reserve(train.size());
  for (const auto& r : train) texts.push_back(r.text);
  return Vocabulary::from_phoneme_texts(texts);
}

GeneratorImpl::GeneratorImpl(const EncoderConfig& enc, const DurationPredictorConfig& pred,
                             const DecoderConfig& dec) {
  encoder = register_module("encoder", PhonemeEncoder(enc));
  predictor = register_module("predictor", DurationPredictor(pred));
  decoder = register_module("decoder", Decoder(dec));
}

Generator make_generator(const TrainConfig& cfg, int64_t vocab_size) {
  EncoderConfig enc;
  enc.vocab_size = vocab_size;
  enc.num_blocks = cfg.encoder_blocks;
  DurationPredictorConfig pred;
  pred.dropout = cfg.predictor_dropout;
  return Generator(enc, pred, DecoderConfig::preset(cfg.preset));
}

TrainingModels::TrainingModels(const TrainConfig& cfg, int64_t vocab_size) {
  torch::manual_seed(cfg.seed);
  generator = make_generator(cfg, vocab_size);
  discriminators = DiscriminatorSet(DiscriminatorConfig::preset(cfg.preset));
  const auto options = [&cfg] {
    return torch::optim::AdamWOptions(cfg.learning_rate)
        .betas({cfg.beta1, cfg.beta2})
        .weight_decay(cfg.weight_decay);
  };
  opt_generator = std::make_unique<torch::optim::AdamW>(generator->parameters(), options());
  opt_discriminator = std::make_unique<torch::optim::AdamW>(discriminators->parameters(), options());
}

void TrainingModels::set_learning_rate(double lr) {
  for (auto* opt : {opt_generator.get(), opt_discriminator.get()}) {
    for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
  }
}

json to_json(const StepReport& r) {
  return {{"step", r.step},
          {"losses", r.losses},
          {"reward_shift_fraction", r.reward_shift_fraction},
          {"rewarded_tokens", r.rewarded_tokens},
          {"clamped", r.clamped},
          {"lr", r.lr}};
}

GeneratorPass generator_pass(const Batch& batch, TrainingModels& models, const TrainConfig& cfg,
                             std::mt19937_64& rng) {
  auto& gen = models.generator;
  auto& disc = models.discriminators;
  gen->train();
  disc->train();

  const auto batch_size = batch.size();
  const int64_t gamma = cfg.segment_frames;
  const int64_t max_frames = *std::max_element(batch.num_frames.begin(), batch.num_frames.end());
  if (max_frames < 1) throw DataError("train_step: batch has no audio frames");
  const int64_t frames = std::max(max_frames, gamma);

  auto audio = batch.audio;
  if (audio.size(1) < frames * kHop) {
    audio = torch::constant_pad_nd(audio, {0, frames * kHop - audio.size(1)});
  }
  auto frame_lengths = torch::tensor(batch.num_frames, torch::kInt64);
  auto frame_valid = (torch::arange(frames).unsqueeze(0) < frame_lengths.unsqueeze(1))
                         .to(torch::kFloat32)
                         .unsqueeze(-1);  // [B, T, 1]
  auto m_lengths = frame_lengths.to(torch::kFloat32);

  auto enc = gen->encoder(batch.ids, batch.mask);
  auto d_pred = gen->predictor(enc);
  auto keep = scale_durations(d_pred, m_lengths, batch.mask);
  auto up_keep = gaussian_upsample(enc.hidden, keep.centers, cfg.sigma2, frames, batch.mask);
  auto frames_keep = up_keep.frames * frame_valid;

  std::vector<SegmentSpec> segments;
  std::vector<torch::Tensor> cut_keep, cut_gt;
  for (int64_t b = 0; b < batch_size; ++b) {
    segments.push_back(sample_segment(batch.num_frames[static_cast<size_t>(b)], gamma, rng));
    const auto& seg = segments.back();
    cut_keep.push_back(frames_keep[b].narrow(0, seg.offset, gamma));
    cut_gt.push_back(audio[b].narrow(0, seg.offset * kHop, gamma * kHop));
  }
  auto gt_audio = torch::stack(cut_gt);
  auto audio_keep = gen->decoder(torch::stack(cut_keep));

  auto mel_gt = models.mel(gt_audio);
  auto mel_keep = models.mel(audio_keep);
  auto l1 = mel_l1(mel_gt, mel_keep);
  torch::Tensor reconstruction = l1.loss;
  if (cfg.use_soft_dtw) {
    std::vector<torch::Tensor> per_item;
    for (int64_t b = 0; b < batch_size; ++b) {
      per_item.push_back(soft_dtw(mel_gt[b], mel_keep[b], cfg.soft_dtw) /
                         static_cast<double>(mel_gt.size(1) * mel_gt.size(2)));
    }
    reconstruction = torch::stack(per_item).mean();
  }

  // SHIFT render: same segments, no gradient, only used to grant rewards.
  auto shift = apply_shift(d_pred.detach(), cfg.alpha, cfg.reward_mode, batch.mask);
  auto r_keep = batch.mask.to(torch::kFloat32);
  auto r_shift = torch::zeros_like(r_keep);
  StepReport report;
  report.clamped = shift.clamped;
  if (cfg.shift_pass) {
    torch::NoGradGuard no_grad;
    auto shifted = scale_durations(shift.durations, m_lengths, batch.mask);
    auto frames_shift = gaussian_upsample(enc.hidden.detach(), shifted.centers, cfg.sigma2, frames, batch.mask)
                            .frames *
                        frame_valid;
    auto keep_lengths = keep.lengths.detach();
    int64_t shifted_tokens = 0;

    if (cfg.reward_scope == RewardScope::segment) {
      std::vector<torch::Tensor> cut_shift;
      for (int64_t b = 0; b < batch_size; ++b) {
        cut_shift.push_back(frames_shift[b].narrow(0, segments[static_cast<size_t>(b)].offset, gamma));
      }
      auto mel_shift = models.mel(gen->decoder(torch::stack(cut_shift)));
      auto pf_keep = l1.per_frame.detach();
      auto pf_shift = mel_l1(mel_gt, mel_shift).per_frame;
      for (int64_t b = 0; b < batch_size; ++b) {
        const auto& seg = segments[static_cast<size_t>(b)];
        const auto n = batch.num_tokens[static_cast<size_t>(b)];
        const auto valid = std::min(gamma, batch.num_frames[static_cast<size_t>(b)] - seg.offset);
        const auto lengths = to_vector(keep_lengths[b].narrow(0, 0, n));
        const auto [first, last] = tokens_in_segment(lengths, seg.offset, valid);
        if (last <= first || valid < 1) continue;
        const auto lk = to_vector(pf_keep[b].narrow(0, 0, valid));
        const auto ls = to_vector(pf_shift[b].narrow(0, 0, valid));
        const auto reward = compute_reward(lk, ls, cfg.reward_mode, last - first);
        fill_rewards(reward, first, r_keep, r_shift, b);
        report.rewarded_tokens += last - first;
        shifted_tokens += reward.shift_count();
      }
    } else {
      for (int64_t b = 0; b < batch_size; ++b) {
        const auto n = batch.num_tokens[static_cast<size_t>(b)];
        const auto t_b = batch.num_frames[static_cast<size_t>(b)];
        auto reference = audio[b].narrow(0, 0, t_b * kHop);
        auto full_keep = gen->decoder(frames_keep[b].narrow(0, 0, t_b).detach().unsqueeze(0))[0];
        auto full_shift = gen->decoder(frames_shift[b].narrow(0, 0, t_b).unsqueeze(0))[0];
        const auto lk = frame_losses(models.mel, reference, full_keep);
        const auto ls = frame_losses(models.mel, reference, full_shift);
        const auto reward = compute_reward(lk, ls, cfg.reward_mode, n);
        fill_rewards(reward, 0, r_keep, r_shift, b);
        report.rewarded_tokens += n;
        shifted_tokens += reward.shift_count();
      }
    }
    report.reward_shift_fraction =
        report.rewarded_tokens > 0 ? static_cast<double>(shifted_tokens) / report.rewarded_tokens : 0.0;
  }

  auto loss_re = reinforced_duration_loss(d_pred, shift.durations, r_keep, r_shift);
  auto loss_total = total_duration_loss(d_pred, m_lengths);

  auto fake_outs = disc->forward(audio_keep);
  auto g_adv = generator_loss(logits_of(fake_outs));
  auto loss_fm = torch::zeros({}, g_adv.options());
  if (cfg.feature_matching) {
    std::vector<DiscriminatorOutput> real_outs;
    {
      torch::NoGradGuard no_grad;
      real_outs = disc->forward(gt_audio);
    }
    loss_fm = feature_matching_loss(real_outs, fake_outs);
  }

  const auto& w = cfg.loss_weights;
  auto g_total = w.adversarial * g_adv + w.mel * reconstruction + w.duration_total * loss_total +
                 w.reinforced * loss_re;
  if (cfg.feature_matching) g_total = g_total + w.feature_matching * loss_fm;

  GeneratorPass pass{g_total, audio_keep, gt_audio, std::move(report)};
  pass.report.losses = {{"generator", g_total.item<double>()},
                        {"adversarial", g_adv.item<double>()},
                        {"reconstruction", reconstruction.item<double>()},
                        {"mel_l1", l1.loss.item<double>()},
                        {"duration_total", loss_total.item<double>()},
                        {"reinforced", loss_re.item<double>()},
                        {"feature_matching", loss_fm.item<double>()}};
  return pass;
}

StepReport train_step(const Batch& batch, TrainingModels& models, const TrainConfig& cfg, std::mt19937_64& rng) {
  auto pass = generator_pass(batch, models, cfg, rng);
  auto& report = pass.report;
  const auto check = [&](const std::string& stage) {
    for (const auto& [name, value] : report.losses) {
      if (!std::isfinite(value)) {
        throw TrainingDivergedError(stage + ": non-finite " + name + " loss", batch.utterance_ids, report.losses);
      }
    }
  };
  check("generator step");

  models.opt_generator->zero_grad();
  pass.total.backward();
  models.opt_generator->step();

  auto& disc = models.discriminators;
  models.opt_discriminator->zero_grad();
  auto d_loss = discriminator_loss(logits_of(disc->forward(pass.gt_audio)),
                                   logits_of(disc->forward(pass.audio_keep.detach())));
  report.losses["discriminator"] = d_loss.item<double>();
  check("discriminator step");
  d_loss.backward();
  models.opt_discriminator->step();
  return report;
}

json CheckpointManifest::to_json() const {
  return {{"step", step},     {"epoch", epoch},           {"cursor", cursor},
          {"lr", lr},         {"config", config.to_json()}, {"config_hash", config_hash},
          {"vocabulary", vocabulary}, {"rng_state", rng_state}, {"metrics", metrics}};
}

CheckpointManifest CheckpointManifest::from_json(const json& j) {
  CheckpointManifest m;
  try {
    m.step = j.at("step").get<int64_t>();
    m.epoch = j.at("epoch").get<int64_t>();
    m.cursor = j.at("cursor").get<int64_t>();
    m.lr = j.at("lr").get<double>();
    m.config = TrainConfig::from_json(j.at("config"));
    m.config_hash = j.at("config_hash").get<std::string>();
    m.vocabulary = j.at("vocabulary").get<std::string>();
    m.rng_state = j.at("rng_state").get<std::string>();
    m.metrics = j.value("metrics", json::object());
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("manifest: ") + e.what());
  }
  if (m.config_hash != m.config.hash()) {
    throw CheckpointError("manifest: config hash " + m.config_hash + " does not match its config (" +
                          m.config.hash() + ")");
  }
  return m;
}

CheckpointManifest CheckpointManifest::load(const fs::path& checkpoint_dir) {
  const auto path = checkpoint_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw CheckpointError(path.string() + ": missing checkpoint manifest");
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

Trainer::Trainer(TrainConfig cfg, Vocabulary vocab)
    : cfg_((cfg.validate(), std::move(cfg))),
      vocab_(std::move(vocab)),
      models_((torch::set_num_threads(cfg_.num_threads), cfg_), vocab_.size()),
      rng_(cfg_.seed),
      lr_(cfg_.learning_rate) {}

Trainer Trainer::resume(const fs::path& dir) {
  const auto manifest = CheckpointManifest::load(dir);
  Trainer t(manifest.config, Vocabulary::load(dir / manifest.vocabulary));
  torch::serialize::InputArchive archive;
  try {
    archive.load_from((dir / "model.pt").string());
    torch::serialize::InputArchive gen, disc, opt_g, opt_d;
    archive.read("generator", gen);
    archive.read("discriminators", disc);
    archive.read("opt_generator", opt_g);
    archive.read("opt_discriminator", opt_d);
    t.models_.generator->load(gen);
    t.models_.discriminators->load(disc);
    t.models_.opt_generator->load(opt_g);
    t.models_.opt_discriminator->load(opt_d);
    torch::Tensor torch_rng;
    archive.read("torch_rng", torch_rng);
    auto cpu_generator = torch::globalContext().defaultGenerator(torch::kCPU);
    cpu_generator.set_state(torch_rng);
  } catch (const c10::Error& e) {
    throw CheckpointError((dir / "model.pt").string() + ": " + e.what_without_backtrace());
  }
  std::istringstream is(manifest.rng_state);
  is >> t.rng_;
  if (!is) throw CheckpointError("manifest: unreadable rng_state");
  t.step_ = manifest.step;
  t.epoch_ = manifest.epoch;
  t.cursor_ = manifest.cursor;
  t.lr_ = manifest.lr;
  t.models_.set_learning_rate(t.lr_);
  return t;
}

StepReport Trainer::train_step(const Batch& batch) {
  auto report = rtts::train_step(batch, models_, cfg_, rng_);
  report.step = ++step_;
  report.lr = lr_;
  return report;
}

double Trainer::validate(std::span<const Utterance> utterances) {
  if (utterances.empty()) throw DataError("validate: no utterances");
  auto& gen = models_.generator;
  gen->eval();
  torch::NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& u : utterances) {
    const auto t = u.num_frames(kHop);
    if (t < 4) throw DataError("validate: '" + u.entry.utterance_id + "' is shorter than one analysis window");
    auto ids = torch::tensor(u.entry.phonemes.ids, torch::kInt64).unsqueeze(0);
    auto mask = torch::ones_like(ids, torch::kBool);
    auto enc = gen->encoder(ids, mask);
    auto d = gen->predictor(enc);
    auto scaled = scale_durations(d, torch::full({1}, static_cast<float>(t)), mask);
    auto up = gaussian_upsample(enc.hidden, scaled.centers, cfg_.sigma2, t, mask);
    auto audio = gen->decoder(up.frames)[0];
    auto reference = to_tensor(u.audio).narrow(0, 0, t * kHop);
    total += mel_l1(models_.mel(reference), models_.mel(audio)).loss.item<double>();
  }
  gen->train();
  return total / static_cast<double>(utterances.size());
}

void Trainer::save_checkpoint(const fs::path& dir, const json& metrics) const {
  fs::path tmp = dir;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  torch::serialize::OutputArchive archive, gen, disc, opt_g, opt_d;
  models_.generator->save(gen);
  models_.discriminators->save(disc);
  models_.opt_generator->save(opt_g);
  models_.opt_discriminator->save(opt_d);
  archive.write("generator", gen);
  archive.write("discriminators", disc);
  archive.write("opt_generator", opt_g);
  archive.write("opt_discriminator", opt_d);
  archive.write("torch_rng", torch::globalContext().defaultGenerator(torch::kCPU).get_state());
  archive.save_to((tmp / "model.pt").string());

  CheckpointManifest m;
  m.step = step_;
  m.epoch = epoch_;
  m.cursor = cursor_;
  m.lr = lr_;
  m.config = cfg_;
  m.config_hash = cfg_.hash();
  m.rng_state = rng_to_string(rng_);
  m.metrics = metrics.is_null() ? json::object() : metrics;
  vocab_.save(tmp / m.vocabulary);
  write_json(tmp / "manifest.json", m.to_json());

  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

void Trainer::end_epoch() {
  ++epoch_;
  cursor_ = 0;
  lr_ = cfg_.learning_rate * std::pow(cfg_.lr_decay, static_cast<double>(epoch_));
  models_.set_learning_rate(lr_);
}

fs::path checkpoint_name(const fs::path& output_dir, int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%08lld", static_cast<long long>(step));
  return output_dir / "checkpoints" / buf;
}

FitResult fit(Trainer& trainer, std::span<const Utterance> train, std::span<const Utterance> val,
              const fs::path& output_dir) {
  if (train.empty()) throw DataError("fit: the training split is empty");
  const auto& cfg = trainer.config();
  fs::create_directories(output_dir);
  FitResult result;
  result.metrics_log = output_dir / "metrics.jsonl";
  const auto validation_log = output_dir / "validation.jsonl";
  if (trainer.step() == 0) {
    fs::remove(result.metrics_log);
    fs::remove(validation_log);
  }
  const auto val_count = std::min<size_t>(val.size(), static_cast<size_t>(cfg.validation_utterances));
  const auto val_subset = val.first(val_count);

  const auto n = train.size();
  const auto batch_size = static_cast<size_t>(cfg.batch_size);
  const auto num_batches = static_cast<int64_t>((n + batch_size - 1) / batch_size);
  json last_metrics = json::object();

  while (trainer.step() < cfg.max_steps) {
    const auto order = seeded_permutation(n, cfg.seed + static_cast<uint64_t>(trainer.epoch()));
    for (int64_t c = trainer.cursor(); c < num_batches && trainer.step() < cfg.max_steps; ++c) {
      std::vector<const Utterance*> members;
      for (size_t k = static_cast<size_t>(c) * batch_size; k < std::min(n, (static_cast<size_t>(c) + 1) * batch_size);
           ++k) {
        members.push_back(&train[order[k]]);
      }
      const auto batch = collate(members, kHop, cfg.segment_frames);
      StepReport report;
      try {
        report = trainer.train_step(batch);
      } catch (const TrainingDivergedError& e) {
        write_json(output_dir / ("diverged_step_" + std::to_string(trainer.step() + 1) + ".json"),
                   {{"step", trainer.step() + 1},
                    {"error", e.what()},
                    {"utterance_ids", e.utterance_ids()},
                    {"losses", e.losses()}});
        throw;
      }
      trainer.set_progress(trainer.epoch(), c + 1);
      write_json_line(result.metrics_log, {{"step", report.step},
                                           {"losses", report.losses},
                                           {"reward_shift_fraction", report.reward_shift_fraction},
                                           {"lr", report.lr}});
      last_metrics = {{"losses", report.losses}, {"reward_shift_fraction", report.reward_shift_fraction}};
      if (!val_subset.empty() && report.step % cfg.validation_interval == 0) {
        const double v = trainer.validate(val_subset);
        last_metrics["val_mel_l1"] = v;
        write_json_line(validation_log, {{"step", report.step}, {"mel_l1", v}});
      }
      result.reports.push_back(std::move(report));
      if (trainer.step() % cfg.checkpoint_interval == 0 || trainer.step() == cfg.max_steps) {
        result.final_checkpoint = checkpoint_name(output_dir, trainer.step());
        trainer.save_checkpoint(result.final_checkpoint, last_metrics);
      }
    }
    if (trainer.cursor() >= num_batches) trainer.end_epoch();
  }
  if (result.final_checkpoint.empty()) result.final_checkpoint = checkpoint_name(output_dir, trainer.step());
  return result;
}

FitResult fit(const TrainConfig& cfg, const fs::path& output_dir, const fs::path& workdir,
              const std::optional<fs::path>& resume_from) {
  std::optional<Trainer> trainer;
  if (resume_from) {
    trainer.emplace(Trainer::resume(*resume_from));
  } else {
    cfg.validate();
  }
  const auto& run_cfg = trainer ? trainer->config() : cfg;
  const auto splits = metadata_splits(run_cfg, workdir);
  if (!trainer) trainer.emplace(run_cfg, vocabulary_for(run_cfg, splits.train));
  const auto wav_dir = resolve_path(workdir, run_cfg.wav_dir);
  const auto train_entries = make_entries(splits.train, wav_dir, trainer->vocabulary());
  const auto val_entries = make_entries(splits.val, wav_dir, trainer->vocabulary());
  const auto train = load_utterances(train_entries, kHop, run_cfg.data_workers);
  const auto val_limit = std::min<size_t>(val_entries.size(), static_cast<size_t>(run_cfg.validation_utterances));
  const auto val = load_utterances(std::span(val_entries).first(val_limit), kHop, run_cfg.data_workers);
  return fit(*trainer, train, val, output_dir);
}

Synthesizer::Synthesizer(Generator generator, Vocabulary vocab, TrainConfig cfg)
    : generator_(std::move(generator)), vocab_(std::move(vocab)), cfg_(std::move(cfg)) {
  generator_->eval();
}

Synthesizer Synthesizer::load(const fs::path& dir) {
  const auto manifest = CheckpointManifest::load(dir);
  auto vocab = Vocabulary::load(dir / manifest.vocabulary);
  auto generator = make_generator(manifest.config, vocab.size());
  try {
    torch::serialize::InputArchive archive, gen;
    archive.load_from((dir / "model.pt").string());
    archive.read("generator", gen);
    generator->load(gen);
  } catch (const c10::Error& e) {
    throw CheckpointError((dir / "model.pt").string() + ": " + e.what_without_backtrace());
  }
  return Synthesizer(generator, std::move(vocab), manifest.config);
}

Synthesizer::Result Synthesizer::run(std::string_view text) const { return run(vocab_.tokenize(text)); }

Synthesizer::Result Synthesizer::run(const PhonemeSequence& tokens) const {
  if (tokens.ids.empty()) throw DataError("synthesize: empty token sequence");
  torch::NoGradGuard no_grad;
  auto ids = torch::tensor(tokens.ids, torch::kInt64).unsqueeze(0);
  auto mask = torch::ones_like(ids, torch::kBool);
  auto enc = generator_->encoder(ids, mask);
  Result r;
  r.durations = to_vector(generator_->predictor(enc)[0]);
  r.frames_per_token = round_durations(r.durations);
  int64_t frames = 0;
  for (auto f : r.frames_per_token) frames += f;
  if (frames < 1) throw AlignmentError("synthesize: predicted durations round to zero frames");
  auto lengths = torch::tensor(r.frames_per_token, torch::kInt64).to(torch::kFloat32);
  auto up = gaussian_upsample(enc.hidden[0], duration_centers(lengths), cfg_.sigma2, frames);
  r.alignment = up.grid;
  r.audio = from_tensor(generator_->decoder(up.frames.unsqueeze(0))[0]);
  return r;
}

Waveform synthesize(std::string_view text, const fs::path& checkpoint_dir) {
  return Synthesizer::load(checkpoint_dir).synthesize(text);
}

}  // namespace rtts
