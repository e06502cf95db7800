#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest_torch.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "rtts/data.hpp"
#include "test_util.hpp"

using namespace rtts;

namespace {

void write_corpus(const std::filesystem::path& dir, int n) {
  std::filesystem::create_directories(dir / "wavs");
  std::ofstream meta(dir / "metadata.csv");
  for (int i = 0; i < n; ++i) {
    const auto id = "U" + std::to_string(i);
    meta << id << "|Raw " << i << "|hello world " << std::string(static_cast<size_t>(3 * i + 1), 'x') << "\n";
    write_wav(dir / "wavs" / (id + ".wav"), Waveform{std::vector<float>(1000 + 300 * i, 0.1f), kSampleRate});
  }
}

std::vector<int> iota_items(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("normalization lowercases and strips punctuation") {
  CHECK(normalize_text("  Hello, World!  ") == "hello world");
  CHECK(normalize_text("Don't -- stop") == "don't stop");
  CHECK(normalize_text("'quoted'") == "quoted");
}

TEST_CASE("single character tokenizes to one id") {
  auto seq = tokenize("a");
  REQUIRE(seq.size() == 1);
  CHECK(seq.ids[0] == Vocabulary::characters().id("a"));
  CHECK(seq.ids[0] != kPadId);
}

TEST_CASE("tokenization is deterministic and order sensitive") {
  CHECK(tokenize("hello there").ids == tokenize("hello there").ids);
  auto ab = tokenize("ab").ids;
  auto ba = tokenize("ba").ids;
  const auto& v = Vocabulary::characters();
  CHECK(ab == std::vector<int64_t>{v.id("a"), v.id("b")});
  CHECK(ba == std::vector<int64_t>{ab[1], ab[0]});
}

TEST_CASE("tokenization depends only on normalized text") {
  CHECK(tokenize("Hi, there!").ids == tokenize("hi there").ids);
}

TEST_CASE("empty text after normalization is an error") {
  CHECK_THROWS_AS(tokenize("?!"), DataError);
  CHECK_THROWS_AS(tokenize(""), DataError);
}

TEST_CASE("phoneme vocabulary maps unknown symbols to UNK and round-trips") {
  std::vector<std::string> texts{"HH AH0 L OW1", "W ER1 L D"};
  auto v = Vocabulary::from_phoneme_texts(texts);
  CHECK(v.mode() == TokenizerMode::phonemes);
  CHECK(v.symbol(0) == "<pad>");
  auto seq = v.tokenize("HH ZZZ OW1");
  CHECK(seq.ids == std::vector<int64_t>{v.id("HH"), 1, v.id("OW1")});
  TempDir dir;
  v.save(dir.path / "vocab.json");
  CHECK(Vocabulary::load(dir.path / "vocab.json") == v);
  CHECK(Vocabulary::from_json(Vocabulary::characters().to_json()) == Vocabulary::characters());
}

TEST_CASE("three-line metadata gives three entries") {
  TempDir dir;
  write_corpus(dir.path, 3);
  auto entries = load_corpus(dir.path / "metadata.csv", dir.path / "wavs");
  REQUIRE(entries.size() == 3);
  CHECK(entries[1].utterance_id == "U1");
  CHECK(entries[1].phonemes.ids == tokenize("hello world xxxx").ids);
}

TEST_CASE("a missing wav is reported by id") {
  TempDir dir;
  write_corpus(dir.path, 3);
  std::filesystem::remove(dir.path / "wavs" / "U2.wav");
  try {
    load_corpus(dir.path / "metadata.csv", dir.path / "wavs");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("U2") != std::string::npos);
  }
}

TEST_CASE("malformed metadata names the line") {
  TempDir dir;
  std::ofstream(dir.path / "m.csv") << "a|b|c\n\nbroken line\n";
  try {
    read_metadata(dir.path / "m.csv");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("m.csv:3:") != std::string::npos);
  }
}

TEST_CASE("splits have the requested sizes") {
  auto s = make_splits(iota_items(1000), 1234);
  CHECK(s.train.size() == 400);
  CHECK(s.val.size() == 300);
  CHECK(s.test.size() == 300);
}

TEST_CASE("splits are disjoint, exhaustive and reproducible for every seed") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto items = iota_items(57);
    auto s = make_splits(items, seed, 10, 7);
    std::vector<int> all;
    for (auto* part : {&s.train, &s.val, &s.test}) {
      CHECK(std::is_sorted(part->begin(), part->end()));
      all.insert(all.end(), part->begin(), part->end());
    }
    std::sort(all.begin(), all.end());
    CHECK(all == items);
    auto again = make_splits(items, seed, 10, 7);
    CHECK(again.val == s.val);
    CHECK(again.test == s.test);
  }
}

TEST_CASE("different seeds give different splits") {
  auto a = make_splits(iota_items(1000), 1, 300, 300);
  auto b = make_splits(iota_items(1000), 2, 300, 300);
  CHECK(a.val != b.val);
  CHECK_THROWS_AS(make_splits(iota_items(10), 1, 6, 6), DataError);
}

TEST_CASE("duration targets parse and validate") {
  TempDir dir;
  std::ofstream(dir.path / "d.tsv") << "u1\t3 5 2\n";
  auto t = load_duration_targets(dir.path / "d.tsv");
  CHECK(t.at("u1").durations == std::vector<int64_t>{3, 5, 2});

  std::ofstream(dir.path / "neg.tsv") << "u1\t3 -5 2\n";
  CHECK_THROWS_AS(load_duration_targets(dir.path / "neg.tsv"), DataError);
  std::ofstream(dir.path / "frac.tsv") << "u1\t3 2.5\n";
  CHECK_THROWS_AS(load_duration_targets(dir.path / "frac.tsv"), DataError);

  CorpusEntry e{"u1", "ab", tokenize("ab"), {}};
  std::vector<CorpusEntry> entries{e};
  try {
    check_duration_targets(t, entries);
    FAIL("expected a mismatch");
  } catch (const DataError& err) {
    CHECK(std::string(err.what()).find("u1") != std::string::npos);
  }
  entries[0].phonemes = tokenize("abc");
  CHECK_NOTHROW(check_duration_targets(t, entries));
}

TEST_CASE("utterances are trimmed to whole hops and collated with padding") {
  TempDir dir;
  write_corpus(dir.path, 3);
  auto entries = load_corpus(dir.path / "metadata.csv", dir.path / "wavs");
  auto utts = load_utterances(entries, 256, 2);
  REQUIRE(utts.size() == 3);
  for (size_t i = 0; i < utts.size(); ++i) {
    CHECK(utts[i].entry.utterance_id == entries[i].utterance_id);
    CHECK(utts[i].audio.size() % 256 == 0);
  }
  std::vector<const Utterance*> ptrs{&utts[0], &utts[2]};
  auto b = collate(ptrs, 256, 16);
  CHECK(b.size() == 2);
  CHECK(b.audio.size(1) == 16 * 256);
  CHECK(b.num_frames == std::vector<int64_t>{utts[0].num_frames(256), utts[2].num_frames(256)});
  const auto n0 = utts[0].entry.phonemes.size();
  const auto n2 = utts[2].entry.phonemes.size();
  CHECK(b.ids.size(1) == std::max(n0, n2));
  CHECK(b.mask.sum().item<int64_t>() == n0 + n2);
  CHECK((b.ids.masked_select(~b.mask) == kPadId).all().item<bool>());
}
