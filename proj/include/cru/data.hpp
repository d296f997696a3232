#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cru/layers.hpp"

namespace cru {

// ---------------------------------------------------------------------------
// Text
// ---------------------------------------------------------------------------

/// Lowercases ASCII letters, splits on whitespace and peels leading/trailing
/// ASCII punctuation off each chunk as single-character tokens. An empty
/// result means the line should be skipped.
std::vector<std::string> tokenize(std::string_view raw);

/// Drops bytes that are not part of a well-formed UTF-8 sequence. The number
/// of dropped bytes is added to *dropped when given.
std::string sanitize_utf8(std::string_view raw, std::size_t* dropped = nullptr);

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

enum class DatasetFormat { mr, subj, imdb };

DatasetFormat parse_format(const std::string& name);
const char* format_name(DatasetFormat f);

struct Sample {
  std::vector<std::string> tokens;
  int label = 0;
};

struct Corpus {
  std::vector<Sample> samples;
  DatasetFormat format = DatasetFormat::mr;
  std::size_t size() const { return samples.size(); }
};

/// Training data plus an optional predefined test split (IMDB).
struct Dataset {
  Corpus train;
  std::optional<Corpus> test;
};

/// Lines of `positive` get label 1, lines of `negative` label 0. Undecodable
/// bytes and lines that tokenize to nothing are dropped with a warning.
Corpus load_two_file_corpus(const std::filesystem::path& positive,
                            const std::filesystem::path& negative, DatasetFormat format);

/// mr:   <dir>/rt-polarity.pos, <dir>/rt-polarity.neg
/// subj: <dir>/quote.tok.gt9.5000 (subjective, 1), <dir>/plot.tok.gt9.5000 (objective, 0)
/// imdb: <dir>/{train,test}/{pos,neg}/*.txt, one review per file
/// Throws IoError when the expected files are missing.
Dataset load_dataset(const std::filesystem::path& dir, DatasetFormat format);

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

/// Token index with pad = 0 and unk = 1, then tokens by descending frequency
/// (ties broken by first occurrence).
class Vocab {
 public:
  /// max_size counts the two special tokens; values below 3 throw ConfigError.
  static Vocab build(const Corpus& corpus, std::optional<std::size_t> max_size = std::nullopt);
  static Vocab from_tokens(std::vector<std::string> id_to_token,
                           std::vector<std::uint64_t> counts = {});

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t encode(const std::string& token) const;
  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;
  const std::string& decode(std::size_t id) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  std::uint64_t count(std::size_t id) const { return id < counts_.size() ? counts_[id] : 0; }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// One token per line, in id order: `token<TAB>count`.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  std::vector<std::string> id_to_token_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Pretrained embeddings
// ---------------------------------------------------------------------------

struct EmbeddingCoverage {
  std::size_t found = 0;        // non-special vocab tokens copied from the file
  std::size_t total = 0;        // non-special vocab tokens
  std::size_t random_rows = 0;  // non-special rows left at random init
  double coverage() const { return total ? static_cast<double>(found) / total : 0.0; }
};

/// Text format: `token v1 ... vd` per line. Rows for tokens found in the file
/// are copied (first occurrence wins); every other row, specials included,
/// is uniform(-0.05, 0.05). Throws ParseError (with line number) on a wrong
/// field count or bad number and IoError when the file cannot be read.
EmbeddingTable load_pretrained_embeddings(const std::filesystem::path& path, const Vocab& vocab,
                                          std::size_t dim, Rng& rng,
                                          EmbeddingCoverage* coverage = nullptr);

inline constexpr double kEmbeddingInitLimit = 0.05;

// ---------------------------------------------------------------------------
// Folds and batches
// ---------------------------------------------------------------------------

struct FoldPlan {
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;  // per sample

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
  std::size_t fold_size(std::size_t fold) const;
};

/// Seeded shuffle of 0..n-1, then round-robin assignment to K folds.
/// Requires K >= 2 and n >= K; otherwise ConfigError.
FoldPlan make_folds(std::size_t n_samples, std::size_t k, std::uint64_t seed);

struct EncodedSample {
  std::vector<std::size_t> ids;
  int label = 0;
};

std::vector<EncodedSample> encode_corpus(const Corpus& corpus, const Vocab& vocab,
                                         std::span<const std::size_t> indices = {});

/// Cuts every sample to at most max_length leading tokens.
void truncate_samples(std::vector<EncodedSample>& samples, std::size_t max_length);

/// A padded batch in time-major layout.
struct Batch {
  std::size_t width = 0;             // longest sample
  std::size_t size = 0;              // number of samples
  std::vector<std::size_t> ids;      // [width x size], ids[t * size + b]
  std::vector<std::size_t> lengths;  // true lengths
  Tensor mask;                       // [width x size], 1 for true tokens
  Tensor labels;                     // [size]
};

Batch make_batch(std::span<const EncodedSample* const> samples, std::size_t pad_id = kPadId);

/// Splits samples into batches of batch_size (last may be short), each padded
/// to its own longest sample. With a shuffle rng the sample order is a seeded
/// permutation; otherwise input order is kept.
std::vector<Batch> batch_and_pad(std::span<const EncodedSample> samples, std::size_t batch_size,
                                 std::size_t pad_id = kPadId, Rng* shuffle = nullptr);

}  // namespace cru
