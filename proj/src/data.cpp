#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <future>
#include <sstream>

#include "rtts/data.hpp"

namespace rtts {
namespace {

constexpr std::string_view kCharacterTable = " abcdefghijklmnopqrstuvwxyz0123456789'";
constexpr std::string_view kPadSymbol = "<pad>";
constexpr std::string_view kUnkSymbol = "<unk>";

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string to_string(TokenizerMode mode) {
  return mode == TokenizerMode::characters ? "characters" : "phonemes";
}

TokenizerMode tokenizer_mode_from_string(std::string_view name) {
  if (name == "characters") return TokenizerMode::characters;
  if (name == "phonemes") return TokenizerMode::phonemes;
  throw DataError("unknown tokenizer mode '" + std::string(name) +
                  "' (expected 'characters' or 'phonemes')");
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    const bool keep_apostrophe = c == '\'' && i > 0 && i + 1 < text.size() &&
                                 std::isalnum(static_cast<unsigned char>(text[i - 1])) &&
                                 std::isalnum(static_cast<unsigned char>(text[i + 1]));
    if (std::isalnum(c) || keep_apostrophe) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

Vocabulary::Vocabulary(TokenizerMode mode, std::vector<std::string> symbols)
    : mode_(mode), symbols_(std::move(symbols)) {
  for (size_t i = 0; i < symbols_.size(); ++i) {
    if (!index_.emplace(symbols_[i], static_cast<int64_t>(i)).second) {
      throw DataError("vocabulary: duplicate symbol '" + symbols_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::characters() {
  std::vector<std::string> symbols{std::string(kPadSymbol)};
  for (char c : kCharacterTable) symbols.emplace_back(1, c);
  return Vocabulary(TokenizerMode::characters, std::move(symbols));
}

Vocabulary Vocabulary::from_phoneme_texts(std::span<const std::string> texts) {
  std::vector<std::string> symbols{std::string(kPadSymbol), std::string(kUnkSymbol)};
  std::map<std::string, int, std::less<>> seen;
  for (const auto& text : texts) {
    for (auto& sym : split_whitespace(text)) {
      if (seen.emplace(sym, 0).second) symbols.push_back(sym);
    }
  }
  return Vocabulary(TokenizerMode::phonemes, std::move(symbols));
}

int64_t Vocabulary::id(std::string_view symbol) const {
  if (auto it = index_.find(symbol); it != index_.end() && it->second != kPadId) return it->second;
  if (mode_ == TokenizerMode::phonemes) return 1;
  throw DataError("symbol '" + std::string(symbol) + "' is not in the vocabulary");
}

const std::string& Vocabulary::symbol(int64_t id) const {
  if (id < 0 || id >= size()) throw DataError("token id " + std::to_string(id) + " out of range");
  return symbols_[static_cast<size_t>(id)];
}

PhonemeSequence Vocabulary::tokenize(std::string_view text, std::string utterance_id) const {
  PhonemeSequence seq;
  seq.utterance_id = std::move(utterance_id);
  if (mode_ == TokenizerMode::characters) {
    for (char c : normalize_text(text)) seq.ids.push_back(id(std::string_view(&c, 1)));
  } else {
    for (const auto& sym : split_whitespace(text)) seq.ids.push_back(id(sym));
  }
  if (seq.ids.empty()) {
    throw DataError("tokenize: text '" + std::string(text) + "' is empty after normalization");
  }
  return seq;
}

nlohmann::json Vocabulary::to_json() const {
  return {{"mode", to_string(mode_)}, {"symbols", symbols_}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  try {
    auto mode = tokenizer_mode_from_string(j.at("mode").get<std::string>());
    auto symbols = j.at("symbols").get<std::vector<std::string>>();
    if (symbols.empty() || symbols.front() != kPadSymbol) {
      throw DataError("vocabulary: first symbol must be " + std::string(kPadSymbol));
    }
    return Vocabulary(mode, std::move(symbols));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("vocabulary: ") + e.what());
  }
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot write vocabulary");
  out << to_json().dump(2) << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot read vocabulary");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

PhonemeSequence tokenize(std::string_view text) {
  static const Vocabulary vocab = Vocabulary::characters();
  return vocab.tokenize(text);
}

std::vector<MetadataRecord> read_metadata(const std::filesystem::path& metadata_path) {
  std::ifstream in(metadata_path);
  if (!in) throw DataError(metadata_path.string() + ": cannot open metadata");
  std::vector<MetadataRecord> records;
  std::string line;
  for (size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (trim(line).empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    size_t start = 0;
    for (size_t bar; (bar = line.find('|', start)) != std::string::npos; start = bar + 1) {
      fields.push_back(line.substr(start, bar - start));
    }
    fields.push_back(line.substr(start));
    if (fields.size() != 3) {
      throw DataError(metadata_path.string() + ":" + std::to_string(line_no) +
                      ": expected 'id|raw_text|normalized_text', found " +
                      std::to_string(fields.size()) + " field(s)");
    }
    auto id = trim(fields[0]);
    if (id.empty()) {
      throw DataError(metadata_path.string() + ":" + std::to_string(line_no) + ": empty id");
    }
    records.push_back({std::move(id), fields[2]});
  }
  return records;
}

std::vector<CorpusEntry> make_entries(std::span<const MetadataRecord> records,
                                      const std::filesystem::path& wav_dir,
                                      const Vocabulary& vocab) {
  std::vector<CorpusEntry> entries;
  entries.reserve(records.size());
  for (const auto& rec : records) {
    auto wav = wav_dir / (rec.utterance_id + ".wav");
    if (!std::filesystem::is_regular_file(wav)) {
      throw DataError("utterance '" + rec.utterance_id + "': missing audio " + wav.string());
    }
    PhonemeSequence seq;
    try {
      seq = vocab.tokenize(rec.text, rec.utterance_id);
    } catch (const DataError& e) {
      throw DataError("utterance '" + rec.utterance_id + "': " + e.what());
    }
    entries.push_back({rec.utterance_id, rec.text, std::move(seq), std::move(wav)});
  }
  return entries;
}

std::vector<CorpusEntry> load_corpus(const std::filesystem::path& metadata_path,
                                     const std::filesystem::path& wav_dir,
                                     const Vocabulary& vocab) {
  return make_entries(read_metadata(metadata_path), wav_dir, vocab);
}

std::map<std::string, DurationTargets> load_duration_targets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open duration targets");
  std::map<std::string, DurationTargets> out;
  std::string line;
  for (size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where + ": expected 'id<TAB>durations'");
    DurationTargets t{trim(std::string_view(line).substr(0, tab)), {}};
    for (const auto& tok : split_whitespace(std::string_view(line).substr(tab + 1))) {
      int64_t v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw DataError(where + ": '" + tok + "' is not an integer duration");
      }
      if (v < 0) throw DataError(where + ": negative duration " + tok + " for '" + t.utterance_id + "'");
      t.durations.push_back(v);
    }
    if (t.durations.empty()) throw DataError(where + ": no durations for '" + t.utterance_id + "'");
    auto id = t.utterance_id;
    if (!out.emplace(id, std::move(t)).second) throw DataError(where + ": duplicate id '" + id + "'");
  }
  return out;
}

void check_duration_targets(const std::map<std::string, DurationTargets>& targets,
                            std::span<const CorpusEntry> entries) {
  std::string problems;
  for (const auto& e : entries) {
    auto it = targets.find(e.utterance_id);
    if (it == targets.end()) continue;
    const auto n = static_cast<int64_t>(it->second.durations.size());
    if (n != e.phonemes.size()) {
      problems += "\n  " + e.utterance_id + ": " + std::to_string(n) + " durations for " +
                  std::to_string(e.phonemes.size()) + " tokens";
    }
  }
  if (!problems.empty()) throw DataError("duration targets do not match the corpus:" + problems);
}

std::vector<Utterance> load_utterances(std::span<const CorpusEntry> entries, int hop, int workers) {
  std::vector<Utterance> out(entries.size());
  auto load_one = [&](size_t i) {
    Waveform w = load_audio(entries[i].audio_path);
    w.samples.resize(static_cast<size_t>(w.size() / hop * hop));
    if (w.samples.empty()) {
      throw DataError("utterance '" + entries[i].utterance_id + "' is shorter than one frame");
    }
    out[i] = {entries[i], std::move(w)};
  };
  workers = std::max(1, workers);
  if (workers == 1) {
    for (size_t i = 0; i < entries.size(); ++i) load_one(i);
    return out;
  }
  std::vector<std::future<void>> jobs;
  for (int w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (size_t i = static_cast<size_t>(w); i < entries.size(); i += static_cast<size_t>(workers)) {
        load_one(i);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

Batch collate(std::span<const Utterance* const> utterances, int hop, int64_t min_frames) {
  if (utterances.empty()) throw DataError("collate: empty batch");
  Batch b;
  int64_t max_tokens = 0;
  int64_t max_frames = min_frames;
  for (const auto* u : utterances) {
    max_tokens = std::max(max_tokens, u->entry.phonemes.size());
    max_frames = std::max(max_frames, u->num_frames(hop));
  }
  const auto count = static_cast<int64_t>(utterances.size());
  b.ids = torch::full({count, max_tokens}, kPadId, torch::kInt64);
  b.mask = torch::zeros({count, max_tokens}, torch::kBool);
  b.audio = torch::zeros({count, max_frames * hop}, torch::kFloat32);
  for (int64_t i = 0; i < count; ++i) {
    const auto& u = *utterances[static_cast<size_t>(i)];
    const auto n = u.entry.phonemes.size();
    b.ids[i].narrow(0, 0, n).copy_(torch::tensor(u.entry.phonemes.ids, torch::kInt64));
    b.mask[i].narrow(0, 0, n).fill_(true);
    const auto frames = u.num_frames(hop);
    b.audio[i].narrow(0, 0, frames * hop).copy_(to_tensor(u.audio).narrow(0, 0, frames * hop));
    b.num_tokens.push_back(n);
    b.num_frames.push_back(frames);
    b.utterance_ids.push_back(u.entry.utterance_id);
  }
  return b;
}

Batch collate_tokens(std::span<const PhonemeSequence> sequences) {
  if (sequences.empty()) throw DataError("collate: empty batch");
  Batch b;
  int64_t max_tokens = 0;
  for (const auto& s : sequences) max_tokens = std::max(max_tokens, s.size());
  const auto count = static_cast<int64_t>(sequences.size());
  b.ids = torch::full({count, max_tokens}, kPadId, torch::kInt64);
  b.mask = torch::zeros({count, max_tokens}, torch::kBool);
  for (int64_t i = 0; i < count; ++i) {
    const auto& s = sequences[static_cast<size_t>(i)];
    b.ids[i].narrow(0, 0, s.size()).copy_(torch::tensor(s.ids, torch::kInt64));
    b.mask[i].narrow(0, 0, s.size()).fill_(true);
    b.num_tokens.push_back(s.size());
    b.utterance_ids.push_back(s.utterance_id);
  }
  return b;
}

}  // namespace rtts
