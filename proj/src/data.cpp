#include "cru/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cru/errors.hpp"
#include "cru/log.hpp"

namespace cru {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Text
// ---------------------------------------------------------------------------

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct(unsigned char c) {
  return c < 0x80 && ((c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) ||
                      (c >= 0x5b && c <= 0x60) || (c >= 0x7b && c <= 0x7e));
}

void split_chunk(std::string_view chunk, std::vector<std::string>& out) {
  std::size_t begin = 0;
  std::size_t end = chunk.size();
  while (begin < end && is_punct(static_cast<unsigned char>(chunk[begin]))) {
    out.emplace_back(1, chunk[begin]);
    ++begin;
  }
  std::vector<std::string> trailing;
  while (end > begin && is_punct(static_cast<unsigned char>(chunk[end - 1]))) {
    trailing.emplace_back(1, chunk[end - 1]);
    --end;
  }
  if (end > begin) out.emplace_back(chunk.substr(begin, end - begin));
  out.insert(out.end(), trailing.rbegin(), trailing.rend());
}

}  // namespace

std::vector<std::string> tokenize(std::string_view raw) {
  std::string lowered(raw);
  for (auto& c : lowered) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::string_view text = lowered;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) split_chunk(text.substr(i, j - i), tokens);
    i = j;
  }
  return tokens;
}

std::string sanitize_utf8(std::string_view raw, std::size_t* dropped) {
  std::string out;
  out.reserve(raw.size());
  std::size_t bad = 0;
  std::size_t i = 0;
  while (i < raw.size()) {
    const auto c = static_cast<unsigned char>(raw[i]);
    std::size_t len = 0;
    if (c < 0x80) len = 1;
    else if (c >= 0xc2 && c <= 0xdf) len = 2;
    else if (c >= 0xe0 && c <= 0xef) len = 3;
    else if (c >= 0xf0 && c <= 0xf4) len = 4;
    bool ok = len > 0 && i + len <= raw.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      ok = (static_cast<unsigned char>(raw[i + k]) & 0xc0) == 0x80;
    }
    if (ok && len == 3) {
      const auto c1 = static_cast<unsigned char>(raw[i + 1]);
      ok = !(c == 0xe0 && c1 < 0xa0) && !(c == 0xed && c1 >= 0xa0);
    } else if (ok && len == 4) {
      const auto c1 = static_cast<unsigned char>(raw[i + 1]);
      ok = !(c == 0xf0 && c1 < 0x90) && !(c == 0xf4 && c1 >= 0x90);
    }
    if (ok) {
      out.append(raw.substr(i, len));
      i += len;
    } else {
      ++bad;
      ++i;
    }
  }
  if (dropped) *dropped += bad;
  return out;
}

// ---------------------------------------------------------------------------
// Corpus loading
// ---------------------------------------------------------------------------

DatasetFormat parse_format(const std::string& name) {
  if (name == "mr") return DatasetFormat::mr;
  if (name == "subj") return DatasetFormat::subj;
  if (name == "imdb") return DatasetFormat::imdb;
  throw ConfigError("unknown dataset format '" + name + "' (expected mr|subj|imdb)");
}

const char* format_name(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::mr: return "mr";
    case DatasetFormat::subj: return "subj";
    case DatasetFormat::imdb: return "imdb";
  }
  return "?";
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_lines(const fs::path& path, int label, Corpus& corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::size_t dropped_bytes = 0;
  std::size_t skipped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = tokenize(sanitize_utf8(line, &dropped_bytes));
    if (tokens.empty()) {
      ++skipped;
      log::warn("empty_line_skipped", {{"file", path.string()}, {"line", std::to_string(line_no)}});
      continue;
    }
    corpus.samples.push_back({std::move(tokens), label});
  }
  if (dropped_bytes) {
    log::warn("undecodable_bytes_dropped",
              {{"file", path.string()}, {"bytes", std::to_string(dropped_bytes)}});
  }
}

void append_review_dir(const fs::path& dir, int label, Corpus& corpus) {
  if (!fs::is_directory(dir)) throw IoError("missing directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::size_t dropped_bytes = 0;
  for (const auto& f : files) {
    auto tokens = tokenize(sanitize_utf8(read_file(f), &dropped_bytes));
    if (tokens.empty()) {
      log::warn("empty_review_skipped", {{"file", f.string()}});
      continue;
    }
    corpus.samples.push_back({std::move(tokens), label});
  }
  if (dropped_bytes) {
    log::warn("undecodable_bytes_dropped",
              {{"dir", dir.string()}, {"bytes", std::to_string(dropped_bytes)}});
  }
}

fs::path require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw IoError("missing data file " + path.string());
  return path;
}

}  // namespace

Corpus load_two_file_corpus(const fs::path& positive, const fs::path& negative,
                            DatasetFormat format) {
  Corpus corpus;
  corpus.format = format;
  append_lines(require_file(positive), 1, corpus);
  append_lines(require_file(negative), 0, corpus);
  if (corpus.samples.empty()) throw IoError("no samples in " + positive.parent_path().string());
  return corpus;
}

Dataset load_dataset(const fs::path& dir, DatasetFormat format) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  Dataset ds;
  switch (format) {
    case DatasetFormat::mr:
      ds.train = load_two_file_corpus(dir / "rt-polarity.pos", dir / "rt-polarity.neg", format);
      break;
    case DatasetFormat::subj:
      ds.train =
          load_two_file_corpus(dir / "quote.tok.gt9.5000", dir / "plot.tok.gt9.5000", format);
      break;
    case DatasetFormat::imdb: {
      ds.train.format = format;
      append_review_dir(dir / "train" / "pos", 1, ds.train);
      append_review_dir(dir / "train" / "neg", 0, ds.train);
      Corpus test;
      test.format = format;
      append_review_dir(dir / "test" / "pos", 1, test);
      append_review_dir(dir / "test" / "neg", 0, test);
      ds.test = std::move(test);
      break;
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Vocab
// ---------------------------------------------------------------------------

Vocab Vocab::build(const Corpus& corpus, std::optional<std::size_t> max_size) {
  if (max_size && *max_size < 3) {
    throw ConfigError("vocab cap must be >= 3 (pad, unk and one token), got " +
                      std::to_string(*max_size));
  }
  if (corpus.samples.empty()) throw ContractError("cannot build a vocab from an empty corpus");

  struct Entry {
    std::uint64_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Entry> seen;
  std::vector<std::string> order;
  for (const auto& s : corpus.samples) {
    for (const auto& tok : s.tokens) {
      auto [it, inserted] = seen.try_emplace(tok, Entry{0, order.size()});
      if (inserted) order.push_back(tok);
      ++it->second.count;
    }
  }
  std::vector<std::size_t> rank(order.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return seen[order[a]].count > seen[order[b]].count;
  });

  std::vector<std::string> tokens{kPadToken, kUnkToken};
  std::vector<std::uint64_t> counts{0, 0};
  for (std::size_t r : rank) {
    if (max_size && tokens.size() >= *max_size) break;
    if (order[r] == kPadToken || order[r] == kUnkToken) continue;
    tokens.push_back(order[r]);
    counts.push_back(seen[order[r]].count);
  }
  return from_tokens(std::move(tokens), std::move(counts));
}

Vocab Vocab::from_tokens(std::vector<std::string> id_to_token, std::vector<std::uint64_t> counts) {
  if (id_to_token.size() < 2 || id_to_token[kPadId] != kPadToken ||
      id_to_token[kUnkId] != kUnkToken) {
    throw ContractError("vocab must start with <pad>, <unk>");
  }
  Vocab v;
  v.id_to_token_ = std::move(id_to_token);
  v.counts_ = std::move(counts);
  v.counts_.resize(v.id_to_token_.size(), 0);
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
    if (!v.index_.emplace(v.id_to_token_[i], i).second) {
      throw ContractError("duplicate vocab token '" + v.id_to_token_[i] + "'");
    }
  }
  return v;
}

std::size_t Vocab::encode(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<std::size_t> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(encode(t));
  return ids;
}

const std::string& Vocab::decode(std::size_t id) const {
  if (id >= id_to_token_.size()) {
    throw IndexError("vocab id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[id];
}

void Vocab::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    out << id_to_token_[i] << '\t' << counts_[i] << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Vocab Vocab::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError("vocab line without count", line_no);
    std::uint64_t c = 0;
    const auto* first = line.data() + tab + 1;
    const auto* last = line.data() + line.size();
    if (std::from_chars(first, last, c).ec != std::errc{}) {
      throw ParseError("bad vocab count", line_no);
    }
    tokens.push_back(line.substr(0, tab));
    counts.push_back(c);
  }
  return from_tokens(std::move(tokens), std::move(counts));
}

// ---------------------------------------------------------------------------
// Pretrained embeddings
// ---------------------------------------------------------------------------

EmbeddingTable load_pretrained_embeddings(const fs::path& path, const Vocab& vocab,
                                          std::size_t dim, Rng& rng, EmbeddingCoverage* coverage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read embeddings file " + path.string());

  EmbeddingTable table = EmbeddingTable::uniform(vocab.size(), dim, kEmbeddingInitLimit, rng);
  std::vector<bool> filled(vocab.size(), false);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fields.clear();
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_space(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !is_space(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) fields.emplace_back(line.data() + i, j - i);
      i = j;
    }
    if (fields.empty()) continue;
    if (fields.size() != dim + 1) {
      throw ParseError("embedding line has " + std::to_string(fields.size() - 1) +
                           " values, expected " + std::to_string(dim),
                       line_no);
    }
    const std::string token(fields[0]);
    if (!vocab.contains(token)) continue;
    const std::size_t id = vocab.encode(token);
    if (id == kPadId || id == kUnkId || filled[id]) continue;
    std::vector<double> row(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const auto f = fields[k + 1];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), row[k]);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
        throw ParseError("bad number '" + std::string(f) + "'", line_no);
      }
    }
    std::copy(row.begin(), row.end(), table.weights.value.raw() + id * dim);
    filled[id] = true;
  }

  if (coverage) {
    coverage->total = vocab.size() - 2;
    coverage->found = static_cast<std::size_t>(std::count(filled.begin(), filled.end(), true));
    coverage->random_rows = coverage->total - coverage->found;
  }
  return table;
}

// ---------------------------------------------------------------------------
// Folds and batches
// ---------------------------------------------------------------------------

FoldPlan make_folds(std::size_t n_samples, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("need at least 2 folds, got " + std::to_string(k));
  if (k > n_samples) {
    throw ConfigError("more folds (" + std::to_string(k) + ") than samples (" +
                      std::to_string(n_samples) + ")");
  }
  std::vector<std::size_t> perm(n_samples);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  FoldPlan plan;
  plan.seed = seed;
  plan.k = k;
  plan.fold_of.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) plan.fold_of[perm[i]] = i % k;
  return plan;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

std::size_t FoldPlan::fold_size(std::size_t fold) const {
  return static_cast<std::size_t>(std::count(fold_of.begin(), fold_of.end(), fold));
}

std::vector<EncodedSample> encode_corpus(const Corpus& corpus, const Vocab& vocab,
                                         std::span<const std::size_t> indices) {
  std::vector<EncodedSample> out;
  auto encode_one = [&](const Sample& s) { out.push_back({vocab.encode(s.tokens), s.label}); };
  if (indices.empty()) {
    out.reserve(corpus.size());
    for (const auto& s : corpus.samples) encode_one(s);
  } else {
    out.reserve(indices.size());
    for (auto i : indices) encode_one(corpus.samples.at(i));
  }
  return out;
}

Batch make_batch(std::span<const EncodedSample* const> samples, std::size_t pad_id) {
  if (samples.empty()) throw ContractError("make_batch needs at least one sample");
  Batch b;
  b.size = samples.size();
  for (const auto* s : samples) {
    if (s->ids.empty()) throw ContractError("empty sample in batch");
    b.width = std::max(b.width, s->ids.size());
  }
  b.ids.assign(b.width * b.size, pad_id);
  b.mask = Tensor({b.width, b.size});
  b.labels = Tensor({b.size});
  for (std::size_t j = 0; j < b.size; ++j) {
    const auto& ids = samples[j]->ids;
    b.lengths.push_back(ids.size());
    b.labels[j] = samples[j]->label;
    for (std::size_t t = 0; t < ids.size(); ++t) {
      b.ids[t * b.size + j] = ids[t];
      b.mask.at(t, j) = 1.0;
    }
  }
  return b;
}

std::vector<Batch> batch_and_pad(std::span<const EncodedSample> samples, std::size_t batch_size,
                                 std::size_t pad_id, Rng* shuffle) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<const EncodedSample*> order;
  order.reserve(samples.size());
  for (const auto& s : samples) order.push_back(&s);
  if (shuffle) std::shuffle(order.begin(), order.end(), *shuffle);
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - i);
    batches.push_back(make_batch(std::span(order).subspan(i, len), pad_id));
  }
  return batches;
}

void truncate_samples(std::vector<EncodedSample>& samples, std::size_t max_length) {
  if (max_length == 0) throw ConfigError("max length must be >= 1");
  for (auto& s : samples)
    if (s.ids.size() > max_length) s.ids.resize(max_length);
}

}  // namespace cru
