#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "rtts/data.hpp"
#include "rtts/random.hpp"
#include "rtts/signal.hpp"
#include "rtts/toy_corpus.hpp"

namespace rtts {
namespace {

constexpr int kHop = 256;
constexpr int kFade = 32;
constexpr int kHarmonics = 4;

int64_t draw(std::mt19937_64& rng, int64_t lo, int64_t hi) {
  return lo + static_cast<int64_t>(uniform_below(rng, static_cast<uint64_t>(hi - lo + 1)));
}

}  // namespace

void ToyCorpusConfig::validate() const {
  if (num_utterances < 1) throw std::invalid_argument("toy corpus: num_utterances must be >= 1");
  if (alphabet.empty()) throw std::invalid_argument("toy corpus: empty alphabet");
  for (char c : alphabet) {
    if (c < 'a' || c > 'z') throw std::invalid_argument("toy corpus: alphabet must be lowercase letters");
  }
  if (min_words < 1 || max_words < min_words) throw std::invalid_argument("toy corpus: bad word count range");
  if (min_word_length < 1 || max_word_length < min_word_length) {
    throw std::invalid_argument("toy corpus: bad word length range");
  }
  if (min_frames < 1 || max_frames < min_frames) throw std::invalid_argument("toy corpus: bad frame range");
  if (!(amplitude > 0.0 && amplitude <= 1.0)) throw std::invalid_argument("toy corpus: amplitude must be in (0, 1]");
}

std::vector<float> render_toy_tokens(const std::string& text, const std::vector<int64_t>& frames,
                                     double amplitude) {
  if (text.size() != frames.size()) throw std::invalid_argument("render_toy_tokens: one duration per character");
  std::vector<float> out;
  for (size_t k = 0; k < text.size(); ++k) {
    const auto len = static_cast<int>(frames[k] * kHop);
    const auto start = out.size();
    out.resize(start + static_cast<size_t>(len), 0.0f);
    if (text[k] == ' ') continue;
    const int letter = static_cast<unsigned char>(text[k]) % 32;
    const double f0 = 110.0 * std::pow(2.0, letter / 8.0);
    double weights[kHarmonics];
    double norm = 0.0;
    for (int h = 0; h < kHarmonics; ++h) {
      weights[h] = 0.55 + 0.45 * std::sin(1.7 * letter + 0.9 * (h + 1));
      norm += weights[h];
    }
    for (int n = 0; n < len; ++n) {
      const double t = static_cast<double>(n) / kSampleRate;
      double v = 0.0;
      for (int h = 0; h < kHarmonics; ++h) v += weights[h] * std::sin(2.0 * std::numbers::pi * f0 * (h + 1) * t);
      const double edge = std::min({1.0, (n + 0.5) / kFade, (len - n - 0.5) / kFade});
      out[start + static_cast<size_t>(n)] = static_cast<float>(amplitude * edge * v / norm);
    }
  }
  return out;
}

ToyCorpus write_toy_corpus(const std::filesystem::path& dir, const ToyCorpusConfig& cfg) {
  cfg.validate();
  ToyCorpus corpus{dir / "metadata.csv", dir / "wavs", dir / "durations.tsv", {}};
  std::filesystem::create_directories(corpus.wav_dir);
  std::ofstream meta(corpus.metadata);
  std::ofstream durs(corpus.durations);
  if (!meta || !durs) throw std::runtime_error(dir.string() + ": cannot write toy corpus");

  const auto vocab = Vocabulary::characters();
  std::mt19937_64 rng(cfg.seed);
  for (int64_t u = 0; u < cfg.num_utterances; ++u) {
    std::string text;
    const auto words = draw(rng, cfg.min_words, cfg.max_words);
    for (int64_t w = 0; w < words; ++w) {
      if (w > 0) text += ' ';
      const auto len = draw(rng, cfg.min_word_length, cfg.max_word_length);
      for (int64_t c = 0; c < len; ++c) {
        text += cfg.alphabet[static_cast<size_t>(uniform_below(rng, cfg.alphabet.size()))];
      }
    }
    const auto tokens = vocab.tokenize(text);
    std::vector<int64_t> frames;
    for (int64_t k = 0; k < tokens.size(); ++k) frames.push_back(draw(rng, cfg.min_frames, cfg.max_frames));

    char id[32];
    std::snprintf(id, sizeof id, "TOY%04lld", static_cast<long long>(u));
    write_wav(corpus.wav_dir / (std::string(id) + ".wav"),
              Waveform{render_toy_tokens(normalize_text(text), frames, cfg.amplitude), kSampleRate});
    meta << id << '|' << text << '|' << text << '\n';
    durs << id << '\t';
    for (size_t k = 0; k < frames.size(); ++k) durs << (k ? " " : "") << frames[k];
    durs << '\n';
    corpus.utterance_ids.emplace_back(id);
  }
  if (!meta.flush() || !durs.flush()) throw std::runtime_error(dir.string() + ": toy corpus write failed");
  return corpus;
}

}  // namespace rtts
