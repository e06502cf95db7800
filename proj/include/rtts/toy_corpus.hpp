#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rtts {

/// A synthetic corpus with known per-token durations. Every letter is a
/// steady harmonic tone with its own pitch and timbre, spaces are silence,
/// and each token lasts a whole number of 256-sample frames.
struct ToyCorpusConfig {
  int64_t num_utterances = 40;
  std::string alphabet = "aeiou";
  int64_t min_words = 1;
  int64_t max_words = 2;
  int64_t min_word_length = 2;
  int64_t max_word_length = 4;
  int64_t min_frames = 3;
  int64_t max_frames = 8;
  double amplitude = 0.3;
  uint64_t seed = 7;

  void validate() const;
};

struct ToyCorpus {
  std::filesystem::path metadata;   // id|text|text
  std::filesystem::path wav_dir;
  std::filesystem::path durations;  // id<TAB>d1 ... dN
  std::vector<std::string> utterance_ids;
};

/// Writes metadata.csv, wavs/ and durations.tsv under `dir`.
ToyCorpus write_toy_corpus(const std::filesystem::path& dir, const ToyCorpusConfig& cfg = {});

/// Audio for one token sequence at 22050 Hz; `text` is already normalized.
std::vector<float> render_toy_tokens(const std::string& text, const std::vector<int64_t>& frames,
                                     double amplitude = 0.3);

}  // namespace rtts
