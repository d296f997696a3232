#include "run_config.hpp"

#include <fmt/core.h>

#include <charconv>
#include <fstream>

#include "cru/errors.hpp"

namespace cru::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || v.empty())
    throw ConfigError(fmt::format("invalid {}: '{}' is not a non-negative integer", key, v));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || v.empty())
    throw ConfigError(fmt::format("invalid {}: '{}' is not a number", key, v));
  return out;
}

}  // namespace

SplitMode parse_split_mode(const std::string& s) {
  if (s == "cv") return SplitMode::cv;
  if (s == "fixed") return SplitMode::fixed;
  if (s == "full") return SplitMode::full;
  throw ConfigError("invalid split: '" + s + "' (expected cv|fixed|full)");
}

const char* split_mode_name(SplitMode m) {
  switch (m) {
    case SplitMode::cv: return "cv";
    case SplitMode::fixed: return "fixed";
    case SplitMode::full: return "full";
  }
  return "?";
}

const std::vector<std::string>& training_keys() {
  static const std::vector<std::string> keys{
      "variant", "filter", "embed", "hidden", "fc",         "dropout",    "lr",
      "l2",      "clip",   "batch", "epochs", "seed",       "vocab-cap",  "max-length",
      "pretrained", "split", "folds"};
  return keys;
}

KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  KeyValues out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("{}:{}: expected key=value", path.string(), line_no));
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_key(RunConfig& c, const std::string& key, const std::string& value) {
  TrainConfig& t = c.train;
  if (key == "format") c.format = parse_format(value);
  else if (key == "data-dir") c.data_dir = value;
  else if (key == "variant") t.variant = parse_variant(value);
  else if (key == "filter") t.filter_length = parse_size(key, value);
  else if (key == "embed") t.embed_dim = parse_size(key, value);
  else if (key == "hidden") t.hidden_dim = parse_size(key, value);
  else if (key == "fc") t.fc_dim = parse_size(key, value);
  else if (key == "dropout") t.dropout = parse_double(key, value);
  else if (key == "lr") t.lr = parse_double(key, value);
  else if (key == "l2") t.l2 = parse_double(key, value);
  else if (key == "clip") t.clip = parse_double(key, value);
  else if (key == "batch") t.batch_size = parse_size(key, value);
  else if (key == "epochs") t.epochs = parse_size(key, value);
  else if (key == "seed") t.seed = parse_size(key, value);
  else if (key == "vocab-cap") {
    if (value == "none") t.vocab_cap.reset();
    else t.vocab_cap = parse_size(key, value);
  } else if (key == "max-length") {
    if (value == "none") t.max_length.reset();
    else t.max_length = parse_size(key, value);
  } else if (key == "pretrained") t.pretrained = value;
  else if (key == "split") c.split = parse_split_mode(value);
  else if (key == "folds") {
    c.folds = parse_size(key, value);
    if (c.folds < 1 || c.folds > c.fold_count)
      throw ConfigError(fmt::format("invalid folds: must be in [1, {}]", c.fold_count));
  } else if (key == "last-fold") c.last_fold = parse_size(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string to_config_text(const RunConfig& c) {
  const TrainConfig& t = c.train;
  std::string out;
  auto put = [&](const char* k, const std::string& v) { out += fmt::format("{}={}\n", k, v); };
  put("format", format_name(c.format));
  put("data-dir", c.data_dir.string());
  put("variant", variant_name(t.variant));
  put("filter", std::to_string(t.filter_length));
  put("embed", std::to_string(t.embed_dim));
  put("hidden", std::to_string(t.hidden_dim));
  put("fc", std::to_string(t.fc_dim));
  put("dropout", fmt::format("{}", t.dropout));
  put("lr", fmt::format("{}", t.lr));
  put("l2", fmt::format("{}", t.l2));
  put("clip", fmt::format("{}", t.clip));
  put("batch", std::to_string(t.batch_size));
  put("epochs", std::to_string(t.epochs));
  put("seed", std::to_string(t.seed));
  put("vocab-cap", t.vocab_cap ? std::to_string(*t.vocab_cap) : "none");
  put("max-length", t.max_length ? std::to_string(*t.max_length) : "none");
  if (!t.pretrained.empty()) put("pretrained", t.pretrained);
  put("split", split_mode_name(c.split));
  put("folds", std::to_string(c.folds));
  put("last-fold", std::to_string(c.last_fold));
  return out;
}

RunConfig resolve(DatasetFormat fallback_format, const KeyValues& file, const KeyValues& flags) {
  RunConfig c;
  c.format = fallback_format;
  for (const auto* layer : {&file, &flags})
    for (const auto& [k, v] : *layer)
      if (k == "format") c.format = parse_format(v);
  c.train = TrainConfig::defaults_for(c.format);
  c.split = c.format == DatasetFormat::imdb ? SplitMode::fixed : SplitMode::cv;
  for (const auto* layer : {&file, &flags})
    for (const auto& [k, v] : *layer) apply_key(c, k, v);
  return c;
}

}  // namespace cru::cli
