#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cru/classifier.hpp"
#include "cru/data.hpp"

namespace cru::cli {

/// How a training run partitions its data.
enum class SplitMode { cv, fixed, full };

SplitMode parse_split_mode(const std::string& s);
const char* split_mode_name(SplitMode m);

/// Fully resolved settings for one subcommand.
struct RunConfig {
  DatasetFormat format = DatasetFormat::mr;
  std::filesystem::path data_dir;
  TrainConfig train;
  SplitMode split = SplitMode::cv;
  std::size_t folds = 10;      // folds to run under cv (1..10)
  std::size_t fold_count = 10;  // K of the K-fold plan
  std::size_t last_fold = 0;    // fold whose model the checkpoint holds
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Keys accepted in config files and as --flags.
const std::vector<std::string>& training_keys();

/// Flat `key = value` file; `#` starts a comment. Throws ConfigError with the
/// line number on malformed lines and IoError when unreadable.
KeyValues read_config_file(const std::filesystem::path& path);

/// Applies one entry. Unknown keys and unparsable values throw ConfigError
/// naming the key.
void apply_key(RunConfig& config, const std::string& key, const std::string& value);

/// Serializes everything apply_key understands, one `key=value` per line.
std::string to_config_text(const RunConfig& config);

/// Resolves precedence: flags > config file > per-dataset defaults. The
/// format comes from the `format` entry (flag, then file) or the fallback.
RunConfig resolve(DatasetFormat fallback_format, const KeyValues& file, const KeyValues& flags);

}  // namespace cru::cli
