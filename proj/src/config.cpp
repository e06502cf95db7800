#include <cstdio>
#include <fstream>
#include <functional>

#include "rtts/trainer.hpp"

namespace rtts {
namespace {

using nlohmann::json;
using Handler = std::function<void(const json&, const std::string&)>;

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw ConfigError("config key '" + key + "': " + why);
}

Handler int_field(int64_t& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_number_integer()) bad(key, "expected an integer");
    out = v.get<int64_t>();
  };
}

Handler int_field(int& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_number_integer()) bad(key, "expected an integer");
    out = v.get<int>();
  };
}

Handler uint_field(uint64_t& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<int64_t>() < 0) bad(key, "expected a non-negative integer");
    out = v.get<uint64_t>();
  };
}

Handler real_field(double& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_number()) bad(key, "expected a number");
    out = v.get<double>();
  };
}

Handler bool_field(bool& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_boolean()) bad(key, "expected true or false");
    out = v.get<bool>();
  };
}

Handler string_field(std::string& out) {
  return [&out](const json& v, const std::string& key) {
    if (!v.is_string()) bad(key, "expected a string");
    out = v.get<std::string>();
  };
}

template <class Parse, class T>
Handler enum_field(T& out, Parse parse) {
  return [&out, parse](const json& v, const std::string& key) {
    if (!v.is_string()) bad(key, "expected a string");
    try {
      out = parse(v.get<std::string>());
    } catch (const std::exception& e) {
      bad(key, e.what());
    }
  };
}

void apply(const json& j, const std::map<std::string, Handler>& handlers, const std::string& prefix) {
  if (!j.is_object()) {
    throw ConfigError(prefix.empty() ? "config: expected a JSON object"
                                     : "config key '" + prefix.substr(0, prefix.size() - 1) + "': expected an object");
  }
  for (const auto& [key, value] : j.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError("unknown config key '" + prefix + key + "'");
    it->second(value, prefix + key);
  }
}

RewardScope reward_scope_from_string(const std::string& s) {
  if (s == "segment") return RewardScope::segment;
  if (s == "utterance") return RewardScope::utterance;
  throw ConfigError("unknown reward scope '" + s + "' (expected 'segment' or 'utterance')");
}

}  // namespace

std::string to_string(RewardScope scope) { return scope == RewardScope::segment ? "segment" : "utterance"; }

void TrainConfig::validate() const {
  const auto require = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) bad(key, why);
  };
  require(val_size >= 0, "val_size", "must be >= 0");
  require(test_size >= 0, "test_size", "must be >= 0");
  require(data_workers >= 1, "data_workers", "must be >= 1");
  require(preset == "v1" || preset == "v2" || preset == "small", "preset", "expected v1, v2 or small");
  require(encoder_blocks >= 1, "encoder_blocks", "must be >= 1");
  require(predictor_dropout >= 0.0 && predictor_dropout < 1.0, "predictor_dropout", "must be in [0, 1)");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(learning_rate > 0.0, "learning_rate", "must be positive");
  require(beta1 > 0.0 && beta1 < 1.0, "beta1", "must be in (0, 1)");
  require(beta2 > 0.0 && beta2 < 1.0, "beta2", "must be in (0, 1)");
  require(weight_decay >= 0.0, "weight_decay", "must be >= 0");
  require(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay", "must be in (0, 1]");
  require(max_steps >= 1, "max_steps", "must be >= 1");
  require(alpha >= 0.0, "alpha", "must be >= 0");
  require(sigma2 > 0.0, "sigma2", "must be positive");
  // The mel front end needs at least one analysis window of audio.
  require(segment_frames >= 4, "segment_frames", "must be >= 4 (one 1024-sample window)");
  require(loss_weights.adversarial >= 0.0 && loss_weights.mel >= 0.0 && loss_weights.duration_total >= 0.0 &&
              loss_weights.reinforced >= 0.0 && loss_weights.feature_matching >= 0.0,
          "loss_weights", "weights must be >= 0");
  try {
    soft_dtw.validate();
  } catch (const std::exception& e) {
    bad("soft_dtw", e.what());
  }
  require(checkpoint_interval >= 1, "checkpoint_interval", "must be >= 1");
  require(validation_interval >= 1, "validation_interval", "must be >= 1");
  require(validation_utterances >= 0, "validation_utterances", "must be >= 0");
  require(num_threads >= 1, "num_threads", "must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  json sd;
  rtts::to_json(sd, soft_dtw);
  return {{"metadata", metadata},
          {"wav_dir", wav_dir},
          {"tokenizer", rtts::to_string(tokenizer)},
          {"val_size", val_size},
          {"test_size", test_size},
          {"data_workers", data_workers},
          {"preset", preset},
          {"encoder_blocks", encoder_blocks},
          {"predictor_dropout", predictor_dropout},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"beta1", beta1},
          {"beta2", beta2},
          {"weight_decay", weight_decay},
          {"lr_decay", lr_decay},
          {"max_steps", max_steps},
          {"alpha", alpha},
          {"reward_mode", rtts::to_string(reward_mode)},
          {"reward_scope", rtts::to_string(reward_scope)},
          {"shift_pass", shift_pass},
          {"sigma2", sigma2},
          {"segment_frames", segment_frames},
          {"loss_weights",
           {{"adversarial", loss_weights.adversarial},
            {"mel", loss_weights.mel},
            {"duration_total", loss_weights.duration_total},
            {"reinforced", loss_weights.reinforced},
            {"feature_matching", loss_weights.feature_matching}}},
          {"use_soft_dtw", use_soft_dtw},
          {"soft_dtw", sd},
          {"feature_matching", feature_matching},
          {"seed", seed},
          {"checkpoint_interval", checkpoint_interval},
          {"validation_interval", validation_interval},
          {"validation_utterances", validation_utterances},
          {"num_threads", num_threads}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  const std::map<std::string, Handler> weights{
      {"adversarial", real_field(c.loss_weights.adversarial)},
      {"mel", real_field(c.loss_weights.mel)},
      {"duration_total", real_field(c.loss_weights.duration_total)},
      {"reinforced", real_field(c.loss_weights.reinforced)},
      {"feature_matching", real_field(c.loss_weights.feature_matching)}};
  const std::map<std::string, Handler> soft{
      {"omega", real_field(c.soft_dtw.omega)},
      {"tau", real_field(c.soft_dtw.tau)},
      {"band_width", [&c](const json& v, const std::string& key) {
         if (v.is_null()) {
           c.soft_dtw.band_width.reset();
         } else if (v.is_number_integer()) {
           c.soft_dtw.band_width = v.get<int64_t>();
         } else {
           bad(key, "expected an integer or null");
         }
       }}};
  const std::map<std::string, Handler> top{
      {"metadata", string_field(c.metadata)},
      {"wav_dir", string_field(c.wav_dir)},
      {"tokenizer", enum_field(c.tokenizer, [](const std::string& s) { return tokenizer_mode_from_string(s); })},
      {"val_size", int_field(c.val_size)},
      {"test_size", int_field(c.test_size)},
      {"data_workers", int_field(c.data_workers)},
      {"preset", string_field(c.preset)},
      {"encoder_blocks", int_field(c.encoder_blocks)},
      {"predictor_dropout", real_field(c.predictor_dropout)},
      {"batch_size", int_field(c.batch_size)},
      {"learning_rate", real_field(c.learning_rate)},
      {"beta1", real_field(c.beta1)},
      {"beta2", real_field(c.beta2)},
      {"weight_decay", real_field(c.weight_decay)},
      {"lr_decay", real_field(c.lr_decay)},
      {"max_steps", int_field(c.max_steps)},
      {"alpha", real_field(c.alpha)},
      {"reward_mode", enum_field(c.reward_mode, [](const std::string& s) { return reward_mode_from_string(s); })},
      {"reward_scope", enum_field(c.reward_scope, reward_scope_from_string)},
      {"shift_pass", bool_field(c.shift_pass)},
      {"sigma2", real_field(c.sigma2)},
      {"segment_frames", int_field(c.segment_frames)},
      {"loss_weights", [&weights](const json& v, const std::string& key) { apply(v, weights, key + "."); }},
      {"use_soft_dtw", bool_field(c.use_soft_dtw)},
      {"soft_dtw", [&soft](const json& v, const std::string& key) { apply(v, soft, key + "."); }},
      {"feature_matching", bool_field(c.feature_matching)},
      {"seed", uint_field(c.seed)},
      {"checkpoint_interval", int_field(c.checkpoint_interval)},
      {"validation_interval", int_field(c.validation_interval)},
      {"validation_utterances", int_field(c.validation_utterances)},
      {"num_threads", int_field(c.num_threads)}};
  apply(j, top, "");
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string TrainConfig::hash() const {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_json().dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rtts
