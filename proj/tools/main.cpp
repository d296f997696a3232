#include <fmt/core.h>

#include <CLI11.hpp>
#include <map>

#include "commands.hpp"
#include "cru/errors.hpp"
#include "cru/log.hpp"

namespace fs = std::filesystem;
using namespace cru;
using namespace cru::cli;

namespace {

/// Training-key flags shared by train, eval and infer. Values stay strings so
/// a single parser handles flags and config-file entries alike.
struct KeyFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void add(CLI::App* app) {
    static const std::map<std::string, std::string> help{
        {"variant", "gru|shallow|deep|deep_enhanced"},
        {"filter", "convolution filter length K (odd)"},
        {"embed", "embedding size D"},
        {"hidden", "hidden size H"},
        {"fc", "fully connected layer size"},
        {"dropout", "dropout rate R"},
        {"lr", "Adam learning rate"},
        {"l2", "L2 weight on the embedding matrix"},
        {"clip", "global gradient norm cap"},
        {"batch", "batch size B"},
        {"epochs", "training epochs E"},
        {"seed", "random seed S"},
        {"vocab-cap", "vocabulary size limit N (or 'none')"},
        {"max-length", "keep at most N tokens per sample (or 'none')"},
        {"pretrained", "word vector text file"},
        {"split", "cv|fixed|full"},
        {"folds", "number of CV folds to run (1-10)"},
    };
    for (const auto& key : training_keys()) options[key] = app->add_option("--" + key, values[key], help.at(key));
  }

  KeyValues given() const {
    KeyValues out;
    for (const auto& key : training_keys())
      if (options.at(key)->count() > 0) out.emplace_back(key, values.at(key));
    return out;
  }
};

struct DatasetFlags {
  std::string dataset, format, data_dir, config_file;

  void add(CLI::App* app) {
    app->add_option("--dataset", dataset, "mr|subj|imdb (read from data/<name>) or a dataset directory");
    app->add_option("--format", format, "mr|subj|imdb when --dataset is a directory");
    app->add_option("--data-dir", data_dir, "dataset directory (overrides --dataset)");
    app->add_option("--config", config_file, "key=value config file");
  }
};

KeyValues with_dataset(KeyValues kv, const DatasetChoice& choice) {
  if (choice.format) kv.emplace_back("format", format_name(*choice.format));
  if (!choice.dir.empty()) kv.emplace_back("data-dir", choice.dir.string());
  return kv;
}

/// Sidecar config (when present) < config file < flags.
RunConfig resolve_with_sidecar(const fs::path& checkpoint, const DatasetFlags& ds, const KeyFlags& keys) {
  KeyValues base;
  if (!checkpoint.empty() && fs::is_regular_file(config_sidecar(checkpoint)))
    base = read_config_file(config_sidecar(checkpoint));
  if (!ds.config_file.empty())
    for (auto& kv : read_config_file(ds.config_file)) base.push_back(kv);
  const auto choice = choose_dataset(ds.dataset, ds.format, ds.data_dir);
  return resolve(DatasetFormat::mr, base, with_dataset(keys.given(), choice));
}

int run(int argc, char** argv) {
  CLI::App app{"cru: contextual recurrent units for sentence classification"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress log lines on stderr");

  TrainArgs train;
  DatasetFlags train_ds;
  KeyFlags train_keys;
  std::string train_out = "runs/latest", train_ckpt;
  auto* train_cmd = app.add_subcommand("train", "train with per-dataset defaults");
  train_ds.add(train_cmd);
  train_keys.add(train_cmd);
  train_cmd->add_option("--out", train_out, "output directory for metrics and checkpoint");
  train_cmd->add_option("--checkpoint", train_ckpt, "checkpoint path (default <out>/model.ckpt)");

  EvalArgs eval;
  DatasetFlags eval_ds;
  KeyFlags eval_keys;
  std::string eval_ckpt, eval_out;
  std::size_t eval_fold = 0;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_ds.add(eval_cmd);
  eval_keys.add(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--out", eval_out, "write eval.csv into this directory");
  eval_cmd->add_option("--on", eval.split, "which samples: train|test|all")->check(CLI::IsMember({"train", "test", "all"}));
  auto* fold_opt = eval_cmd->add_option("--fold", eval_fold, "CV fold (default: the checkpoint's fold)");

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every cell and the classifier");
  gc_cmd->add_option("--seed", gc.seed, "first seed");
  gc_cmd->add_option("--seeds", gc.seeds, "number of seeds");
  gc_cmd->add_option("--tol", gc.tol, "relative error tolerance");
  gc_cmd->add_option("--step", gc.h, "central difference step");

  InferArgs infer;
  DatasetFlags infer_ds;
  KeyFlags infer_keys;
  std::string infer_ckpt;
  auto* infer_cmd = app.add_subcommand("infer", "classify sentences");
  infer_ds.add(infer_cmd);
  infer_keys.add(infer_cmd);
  infer_cmd->add_option("--checkpoint", infer_ckpt, "checkpoint path");
  infer_cmd->add_flag("--zero-model", infer.zero_model, "use an all-zero untrained model");
  infer_cmd->add_flag("--demo", infer.demo, "classify the three-level negation example");
  infer_cmd->add_option("text", infer.texts, "sentences to classify");

  RcFeaturesArgs rc;
  std::string rc_doc, rc_query;
  auto* rc_cmd = app.add_subcommand("rc-features", "per-token freq and coq features as TSV");
  rc_cmd->add_option("--document", rc_doc, "document text file")->required();
  rc_cmd->add_option("--query", rc_query, "query text file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }
  log::set_quiet(quiet);

  if (*train_cmd) {
    const auto choice = choose_dataset(train_ds.dataset, train_ds.format, train_ds.data_dir);
    if (choice.dir.empty()) throw ConfigError("train: --dataset or --data-dir is required");
    if (!choice.format) throw ConfigError("train: cannot infer the dataset format; pass --format");
    KeyValues file;
    if (!train_ds.config_file.empty()) file = read_config_file(train_ds.config_file);
    train.config = resolve(*choice.format, file, with_dataset(train_keys.given(), choice));
    train.out_dir = train_out;
    train.checkpoint = train_ckpt;
    return cmd_train(train);
  }
  if (*eval_cmd) {
    eval.checkpoint = eval_ckpt;
    eval.config = resolve_with_sidecar(eval.checkpoint, eval_ds, eval_keys);
    eval.out_dir = eval_out;
    if (fold_opt->count() > 0) eval.fold = eval_fold;
    return cmd_eval(eval);
  }
  if (*gc_cmd) return cmd_gradcheck(gc);
  if (*infer_cmd) {
    infer.checkpoint = infer_ckpt;
    infer.overrides = resolve_with_sidecar(infer.checkpoint, infer_ds, infer_keys);
    return cmd_infer(infer);
  }
  rc.document = rc_doc;
  rc.query = rc_query;
  return cmd_rc_features(rc);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    log::write("error", "config_error", {{"message", e.what()}});
    return kConfig;
  } catch (const IoError& e) {
    log::write("error", "io_error", {{"message", e.what()}});
    return kIo;
  } catch (const ParseError& e) {
    log::write("error", "parse_error", {{"message", e.what()}});
    return kIo;
  } catch (const NumericError& e) {
    log::write("error", "numeric_error", {{"message", e.what()}});
    return kNumeric;
  } catch (const std::exception& e) {
    log::write("error", "error", {{"message", e.what()}});
    return kConfig;
  }
}
