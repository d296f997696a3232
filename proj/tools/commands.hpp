#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace cru::cli {

enum ExitCode : int { kOk = 0, kConfig = 1, kIo = 2, kNumeric = 3, kVerification = 4 };

/// Dataset directory and format from --dataset/--format/--data-dir. A
/// --dataset value naming a format (mr|subj|imdb) maps to data/<name>;
/// anything else is a directory whose basename may name the format.
struct DatasetChoice {
  std::optional<DatasetFormat> format;
  std::filesystem::path dir;
};
DatasetChoice choose_dataset(const std::string& dataset, const std::string& format,
                             const std::string& data_dir);

struct TrainArgs {
  RunConfig config;
  std::filesystem::path out_dir;
  std::filesystem::path checkpoint;  // empty: <out>/model.ckpt
};
int cmd_train(const TrainArgs& args);

struct EvalArgs {
  RunConfig config;
  std::filesystem::path checkpoint;
  std::filesystem::path out_dir;  // empty: no CSV
  std::string split = "test";     // train | test | all
  std::optional<std::size_t> fold;
};
int cmd_eval(const EvalArgs& args);

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t seeds = 5;
  double h = 1e-5;
  double tol = 1e-4;
};
int cmd_gradcheck(const GradcheckArgs& args);

struct InferArgs {
  std::filesystem::path checkpoint;  // empty with zero_model
  bool zero_model = false;
  bool demo = false;
  std::vector<std::string> texts;
  std::optional<RunConfig> overrides;
};
int cmd_infer(const InferArgs& args);

struct RcFeaturesArgs {
  std::filesystem::path document;
  std::filesystem::path query;
};
int cmd_rc_features(const RcFeaturesArgs& args);

/// Sidecar paths stored next to a checkpoint.
std::filesystem::path vocab_sidecar(const std::filesystem::path& checkpoint);
std::filesystem::path config_sidecar(const std::filesystem::path& checkpoint);

}  // namespace cru::cli
