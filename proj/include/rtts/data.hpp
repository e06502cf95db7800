#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "rtts/random.hpp"
#include "rtts/signal.hpp"

namespace rtts {

inline constexpr int64_t kPadId = 0;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhonemeSequence {
  std::vector<int64_t> ids;
  std::string utterance_id;

  int64_t size() const { return static_cast<int64_t>(ids.size()); }
};

enum class TokenizerMode { characters, phonemes };

std::string to_string(TokenizerMode mode);
TokenizerMode tokenizer_mode_from_string(std::string_view name);

/// Lowercases, replaces punctuation and symbols by spaces, collapses runs of
/// whitespace and trims. Apostrophes inside words are kept.
std::string normalize_text(std::string_view text);

/// Symbol table shared by training and inference.
///
/// Character mode uses a fixed table: PAD (0), space, a-z, 0-9 and the
/// apostrophe, in that order. Phoneme mode treats the input as
/// whitespace-separated, already phonemized symbols (e.g. ARPAbet); its table
/// is PAD (0), UNK (1) and then every symbol seen in the training split in
/// order of first appearance.
class Vocabulary {
 public:
  static Vocabulary characters();
  static Vocabulary from_phoneme_texts(std::span<const std::string> texts);

  TokenizerMode mode() const { return mode_; }
  int64_t size() const { return static_cast<int64_t>(symbols_.size()); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  /// Throws DataError for an unknown symbol in character mode; phoneme mode
  /// maps unknown symbols to UNK.
  int64_t id(std::string_view symbol) const;
  const std::string& symbol(int64_t id) const;

  /// Throws DataError when nothing remains after normalization.
  PhonemeSequence tokenize(std::string_view text, std::string utterance_id = {}) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const {
    return mode_ == other.mode_ && symbols_ == other.symbols_;
  }

 private:
  Vocabulary(TokenizerMode mode, std::vector<std::string> symbols);

  TokenizerMode mode_;
  std::vector<std::string> symbols_;
  std::map<std::string, int64_t, std::less<>> index_;
};

/// Character-level tokenization with the fixed character table.
PhonemeSequence tokenize(std::string_view text);

struct MetadataRecord {
  std::string utterance_id;
  std::string text;  // normalized_text column
};

/// Parses LJSpeech metadata (`id|raw_text|normalized_text`). Blank lines are
/// skipped; any other line without exactly three fields is an error that
/// names its 1-based line number.
std::vector<MetadataRecord> read_metadata(const std::filesystem::path& metadata_path);

struct CorpusEntry {
  std::string utterance_id;
  std::string text;
  PhonemeSequence phonemes;
  std::filesystem::path audio_path;
};

/// Resolves `<wav_dir>/<id>.wav` for every record and tokenizes its text.
std::vector<CorpusEntry> make_entries(std::span<const MetadataRecord> records,
                                      const std::filesystem::path& wav_dir,
                                      const Vocabulary& vocab);

std::vector<CorpusEntry> load_corpus(const std::filesystem::path& metadata_path,
                                     const std::filesystem::path& wav_dir,
                                     const Vocabulary& vocab = Vocabulary::characters());

template <class T>
struct Splits {
  std::vector<T> train;
  std::vector<T> val;
  std::vector<T> test;
};

/// Draws `val_size` then `test_size` items from a seeded permutation; the
/// remainder is the training split. Each split keeps corpus order.
template <class T>
Splits<T> make_splits(const std::vector<T>& items, uint64_t seed, size_t val_size = 300,
                      size_t test_size = 300) {
  if (items.size() < val_size + test_size) {
    throw DataError("make_splits: corpus of " + std::to_string(items.size()) +
                    " entries is smaller than val + test = " +
                    std::to_string(val_size + test_size));
  }
  const auto perm = seeded_permutation(items.size(), seed);
  std::vector<int> bucket(items.size(), 0);
  for (size_t i = 0; i < val_size; ++i) bucket[perm[i]] = 1;
  for (size_t i = val_size; i < val_size + test_size; ++i) bucket[perm[i]] = 2;
  Splits<T> out;
  for (size_t i = 0; i < items.size(); ++i) {
    (bucket[i] == 0 ? out.train : bucket[i] == 1 ? out.val : out.test).push_back(items[i]);
  }
  return out;
}

struct DurationTargets {
  std::string utterance_id;
  std::vector<int64_t> durations;  // frames per token
};

/// Reads `id<TAB>d1 d2 ... dN` lines. Negative or non-integer durations are
/// errors naming the line.
std::map<std::string, DurationTargets> load_duration_targets(const std::filesystem::path& path);

/// Checks every target against the token count of the matching corpus entry;
/// the error lists each mismatching id with both lengths.
void check_duration_targets(const std::map<std::string, DurationTargets>& targets,
                            std::span<const CorpusEntry> entries);

/// A corpus entry with its audio trimmed to a whole number of hops.
struct Utterance {
  CorpusEntry entry;
  Waveform audio;

  int64_t num_frames(int hop) const { return audio.size() / hop; }
};

/// Loads and trims audio for every entry. `workers` > 1 reads files
/// concurrently; the result is in entry order either way.
std::vector<Utterance> load_utterances(std::span<const CorpusEntry> entries, int hop,
                                       int workers = 1);

struct Batch {
  torch::Tensor ids;    // [B, N] int64, PAD-filled
  torch::Tensor mask;   // [B, N] bool
  torch::Tensor audio;  // [B, S] float32, zero-filled
  std::vector<int64_t> num_tokens;
  std::vector<int64_t> num_frames;
  std::vector<std::string> utterance_ids;

  int64_t size() const { return ids.size(0); }
};

/// Pads tokens with PAD and audio with zeros. The audio width is at least
/// `min_frames * hop` samples so a fixed-size segment can always be cut.
Batch collate(std::span<const Utterance* const> utterances, int hop, int64_t min_frames = 0);

/// Token-only batch for inference.
Batch collate_tokens(std::span<const PhonemeSequence> sequences);

}  // namespace rtts
