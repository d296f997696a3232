#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "cru/data.hpp"
#include "cru/errors.hpp"
#include "cru/log.hpp"

using namespace cru;
namespace fs = std::filesystem;

namespace {

using Tokens = std::vector<std::string>;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("cru_data_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name, const std::string& content) const {
    fs::create_directories((path_ / name).parent_path());
    std::ofstream(path_ / name, std::ios::binary) << content;
    return path_ / name;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Corpus corpus_of(std::initializer_list<std::string> lines) {
  Corpus c;
  for (const auto& l : lines) c.samples.push_back({tokenize(l), 1});
  return c;
}

struct Quiet : ::testing::Test {
  void SetUp() override { log::set_quiet(true); }
  void TearDown() override { log::set_quiet(false); }
};

}  // namespace

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("I like that Smith"), (Tokens{"i", "like", "that", "smith"}));
  EXPECT_EQ(tokenize("clever, but not compelling."),
            (Tokens{"clever", ",", "but", "not", "compelling", "."}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize(" \t \n").empty());
  EXPECT_EQ(tokenize("(\"wow!\")"), (Tokens{"(", "\"", "wow", "!", "\"", ")"}));
  EXPECT_EQ(tokenize("isn't it"), (Tokens{"isn't", "it"}));
}

TEST(Utf8, DropsMalformedBytes) {
  std::size_t dropped = 0;
  EXPECT_EQ(sanitize_utf8("caf\xc3\xa9", &dropped), "caf\xc3\xa9");
  EXPECT_EQ(dropped, 0u);
  EXPECT_EQ(sanitize_utf8("a\xff" "b\xc3", &dropped), "ab");
  EXPECT_EQ(dropped, 2u);
}

TEST(Format, Parse) {
  EXPECT_EQ(parse_format("subj"), DatasetFormat::subj);
  EXPECT_THROW(parse_format("sst"), ConfigError);
}

TEST(Vocab, FrequencyOrderAndSpecials) {
  auto v = Vocab::build(corpus_of({"a a b"}));
  EXPECT_EQ(v.tokens(), (Tokens{"<pad>", "<unk>", "a", "b"}));
  EXPECT_EQ(v.encode("a"), 2u);
  EXPECT_EQ(v.encode("zzz"), kUnkId);
  EXPECT_EQ(v.count(2), 2u);
}

TEST(Vocab, TiesKeepFirstOccurrence) {
  auto v = Vocab::build(corpus_of({"c b", "a b c"}));
  EXPECT_EQ(v.tokens(), (Tokens{"<pad>", "<unk>", "c", "b", "a"}));
}

TEST(Vocab, CapMapsRareTokensToUnk) {
  auto v = Vocab::build(corpus_of({"a a b"}), 3);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.encode("b"), kUnkId);
  EXPECT_THROW(Vocab::build(corpus_of({"a"}), 2), ConfigError);
  EXPECT_THROW(Vocab::build(Corpus{}), ContractError);
}

TEST(Vocab, DeterministicAndRoundTrips) {
  auto c = corpus_of({"the cat sat on the mat", "a dog , the end ."});
  auto v1 = Vocab::build(c);
  auto v2 = Vocab::build(c);
  EXPECT_EQ(v1.tokens(), v2.tokens());
  for (const auto& s : c.samples)
    for (const auto& t : s.tokens) EXPECT_EQ(v1.decode(v1.encode(t)), t);
  TempDir dir;
  v1.save(dir.path() / "vocab.tsv");
  auto loaded = Vocab::load(dir.path() / "vocab.tsv");
  EXPECT_EQ(loaded.tokens(), v1.tokens());
  EXPECT_EQ(loaded.count(2), v1.count(2));
  EXPECT_THROW(v1.decode(999), IndexError);
}

TEST_F(Quiet, PretrainedCoverageAndRows) {
  TempDir dir;
  auto path = dir.file("vec.txt", "b 0.5 -0.5\nzz 9 9\nb 7 7\n");
  auto vocab = Vocab::build(corpus_of({"a b"}));
  Rng rng(3);
  EmbeddingCoverage cov;
  auto table = load_pretrained_embeddings(path, vocab, 2, rng, &cov);
  EXPECT_EQ(cov.found, 1u);
  EXPECT_EQ(cov.total, 2u);
  EXPECT_DOUBLE_EQ(cov.coverage(), 0.5);
  const auto& w = table.weights.value;
  const std::size_t b = vocab.encode("b");
  EXPECT_EQ(w.at(b, 0), 0.5);
  EXPECT_EQ(w.at(b, 1), -0.5);
  for (std::size_t id : {std::size_t{0}, std::size_t{1}, vocab.encode("a")})
    for (std::size_t c = 0; c < 2; ++c) EXPECT_LE(std::abs(w.at(id, c)), kEmbeddingInitLimit);
}

TEST_F(Quiet, PretrainedEmptyFileAndErrors) {
  TempDir dir;
  auto vocab = Vocab::build(corpus_of({"a b"}));
  Rng rng(4);
  EmbeddingCoverage cov;
  load_pretrained_embeddings(dir.file("empty.txt", ""), vocab, 3, rng, &cov);
  EXPECT_EQ(cov.found, 0u);
  EXPECT_EQ(cov.random_rows, 2u);

  try {
    load_pretrained_embeddings(dir.file("bad.txt", "a 1 2 3\nb 1 2\n"), vocab, 3, rng);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_pretrained_embeddings(dir.file("nan.txt", "a 1 x 3\n"), vocab, 3, rng),
               ParseError);
  EXPECT_THROW(load_pretrained_embeddings(dir.path() / "missing.txt", vocab, 3, rng), IoError);
}

TEST(Folds, EvenSplit) {
  auto plan = make_folds(10, 10, 7);
  for (std::size_t f = 0; f < 10; ++f) EXPECT_EQ(plan.test_indices(f).size(), 1u);
}

TEST(Folds, UnevenSplitAndPartition) {
  auto plan = make_folds(11, 10, 7);
  std::vector<std::size_t> sizes;
  std::multiset<std::size_t> all;
  for (std::size_t f = 0; f < 10; ++f) {
    auto test = plan.test_indices(f);
    auto train = plan.train_indices(f);
    sizes.push_back(test.size());
    EXPECT_EQ(test.size() + train.size(), 11u);
    std::set<std::size_t> tr(train.begin(), train.end());
    for (auto i : test) EXPECT_EQ(tr.count(i), 0u);
    all.insert(test.begin(), test.end());
  }
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes.back(), 2u);
  EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 1u), 9);
  EXPECT_EQ(all.size(), 11u);
  for (std::size_t i = 0; i < 11; ++i) EXPECT_EQ(all.count(i), 1u);
}

TEST(Folds, SeedDeterminism) {
  EXPECT_EQ(make_folds(50, 10, 1).fold_of, make_folds(50, 10, 1).fold_of);
  EXPECT_NE(make_folds(50, 10, 1).fold_of, make_folds(50, 10, 2).fold_of);
  EXPECT_THROW(make_folds(5, 1, 0), ConfigError);
  EXPECT_THROW(make_folds(5, 6, 0), ConfigError);
}

TEST(Truncate, KeepsLeadingTokens) {
  std::vector<EncodedSample> v{{{5, 6, 7, 8}, 1}, {{9}, 0}};
  truncate_samples(v, 2);
  EXPECT_EQ(v[0].ids, (std::vector<std::size_t>{5, 6}));
  EXPECT_EQ(v[0].label, 1);
  EXPECT_EQ(v[1].ids, (std::vector<std::size_t>{9}));
  EXPECT_THROW(truncate_samples(v, 0), ConfigError);
}

TEST(Batching, PadsToLongest) {
  std::vector<EncodedSample> s{{{2, 3, 4}, 1}, {{5, 6, 7, 8, 9}, 0}};
  auto batches = batch_and_pad(s, 2);
  ASSERT_EQ(batches.size(), 1u);
  const auto& b = batches[0];
  EXPECT_EQ(b.width, 5u);
  EXPECT_EQ(b.lengths, (std::vector<std::size_t>{3, 5}));
  EXPECT_EQ(b.ids[3 * 2 + 0], kPadId);
  EXPECT_EQ(b.ids[4 * 2 + 0], kPadId);
  EXPECT_EQ(b.ids[2 * 2 + 0], 4u);
  EXPECT_EQ(b.mask.at(2, 0), 1.0);
  EXPECT_EQ(b.mask.at(3, 0), 0.0);
  EXPECT_EQ(b.mask.at(4, 1), 1.0);
  EXPECT_EQ(b.labels[0], 1.0);
  EXPECT_EQ(b.labels[1], 0.0);
}

TEST(Batching, SizeOneHasNoPadding) {
  std::vector<EncodedSample> s{{{2, 3, 4}, 1}, {{5}, 0}, {{6, 7}, 1}};
  for (const auto& b : batch_and_pad(s, 1))
    for (double m : b.mask.data()) EXPECT_EQ(m, 1.0);
}

TEST(Batching, ShufflePreservesSamples) {
  std::vector<EncodedSample> s;
  for (std::size_t i = 0; i < 37; ++i) s.push_back({std::vector<std::size_t>(1 + i % 5, 2 + i), int(i % 2)});
  Rng rng(9);
  auto batches = batch_and_pad(s, 8, kPadId, &rng);
  EXPECT_EQ(batches.size(), 5u);
  EXPECT_EQ(batches.back().size, 5u);
  std::size_t total = 0, tokens = 0;
  std::multiset<std::size_t> firsts;
  for (const auto& b : batches) {
    total += b.size;
    tokens += std::accumulate(b.lengths.begin(), b.lengths.end(), std::size_t{0});
    for (std::size_t j = 0; j < b.size; ++j) firsts.insert(b.ids[j]);
  }
  EXPECT_EQ(total, 37u);
  std::size_t expected_tokens = 0;
  for (const auto& x : s) expected_tokens += x.ids.size();
  EXPECT_EQ(tokens, expected_tokens);
  for (std::size_t i = 0; i < 37; ++i) EXPECT_EQ(firsts.count(2 + i), 1u);
}

TEST_F(Quiet, LoadTwoFileCorpusSkipsEmptyLines) {
  TempDir dir;
  dir.file("mr/rt-polarity.pos", "a fine film .\n\nwonderful\n");
  dir.file("mr/rt-polarity.neg", "dull\n");
  auto data = load_dataset(dir.path() / "mr", DatasetFormat::mr);
  ASSERT_EQ(data.train.size(), 3u);
  EXPECT_EQ(data.train.samples[0].label, 1);
  EXPECT_EQ(data.train.samples[2].label, 0);
  EXPECT_FALSE(data.test.has_value());
  EXPECT_THROW(load_dataset(dir.path() / "nope", DatasetFormat::mr), IoError);
}

TEST_F(Quiet, LoadSubjLabels) {
  TempDir dir;
  dir.file("subj/quote.tok.gt9.5000", "i loved it\n");
  dir.file("subj/plot.tok.gt9.5000", "he walks home\n");
  auto data = load_dataset(dir.path() / "subj", DatasetFormat::subj);
  ASSERT_EQ(data.train.size(), 2u);
  EXPECT_EQ(data.train.samples[0].tokens, (Tokens{"i", "loved", "it"}));
  EXPECT_EQ(data.train.samples[0].label, 1);
  EXPECT_EQ(data.train.samples[1].label, 0);
}

TEST_F(Quiet, LoadImdbSplit) {
  TempDir dir;
  dir.file("imdb/train/pos/1.txt", "great");
  dir.file("imdb/train/neg/1.txt", "bad");
  dir.file("imdb/test/pos/1.txt", "good");
  dir.file("imdb/test/neg/1.txt", "awful movie");
  auto data = load_dataset(dir.path() / "imdb", DatasetFormat::imdb);
  EXPECT_EQ(data.train.size(), 2u);
  ASSERT_TRUE(data.test.has_value());
  EXPECT_EQ(data.test->size(), 2u);
}
