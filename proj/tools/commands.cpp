#include "commands.hpp"

#include <fmt/core.h>
#include <fmt/ostream.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "cru/errors.hpp"
#include "cru/log.hpp"
#include "cru/rc_features.hpp"
#include "cru/verification.hpp"

namespace cru::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCsvHeader = "epoch,fold,split,loss,accuracy\n";

const char* const kDemoSentences[] = {
    "I like that Smith",
    "I like that Smith, he's not making fun of these people,",
    "I like that Smith, he's not making fun of these people, he's not laughing at them.",
};

std::size_t env_threads() {
  if (const char* v = std::getenv("CRU_THREADS"); v && *v) {
    const int n = std::atoi(v);
    if (n < 1) throw ConfigError(fmt::format("invalid CRU_THREADS: '{}'", v));
    return static_cast<std::size_t>(n);
  }
  return 1;
}

std::string csv_row(std::size_t epoch, std::size_t fold, const char* split, const EpochMetrics& m) {
  return fmt::format("{},{},{},{:.6f},{:.6f}\n", epoch, fold, split, m.loss, m.accuracy);
}

std::string fmt_double(double v) { return fmt::format("{:.6f}", v); }

struct Split {
  std::vector<EncodedSample> train;
  std::vector<EncodedSample> test;
};

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

void append(std::vector<EncodedSample>& to, std::vector<EncodedSample> from) {
  to.insert(to.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
}

Vocab build_vocab(const Dataset& data, const RunConfig& c) {
  // IMDB keeps its test set out of the vocabulary; the other corpora have no
  // predefined split and share one vocabulary across folds.
  return Vocab::build(data.train, c.train.vocab_cap);
}

struct RunResult {
  SentimentModel model;
  AdamState adam;
  double test_accuracy = 0.0;
  EpochMetrics train_eval;
};

RunResult train_one(const RunConfig& c, const Vocab& vocab, const Split& split, std::size_t fold,
                    const std::optional<EmbeddingTable>& pretrained, std::ostream& csv) {
  const TrainConfig& t = c.train;
  Rng init(t.seed * 1000 + fold);
  RunResult r{SentimentModel::create(t.model_config(vocab.size()), init, pretrained), {}, 0.0, {}};
  auto params = r.model.params();
  r.adam = AdamState(params, AdamConfig{t.lr});
  Rng shuffle(t.seed * 1000 + fold + 500), dropout(t.seed * 1000 + fold + 700);
  const auto train_eval_batches = batch_and_pad(split.train, t.batch_size);
  const auto test_batches = batch_and_pad(split.test, t.batch_size);

  for (std::size_t epoch = 1; epoch <= t.epochs; ++epoch) {
    const auto batches = batch_and_pad(split.train, t.batch_size, kPadId, &shuffle);
    const EpochMetrics m = train_epoch(r.model, r.adam, batches, t, dropout);
    csv << csv_row(epoch, fold, "train", m);
    log::Fields fields{{"fold", std::to_string(fold)},
                       {"epoch", std::to_string(epoch)},
                       {"train_loss", fmt_double(m.loss)},
                       {"train_accuracy", fmt_double(m.accuracy)}};
    if (!test_batches.empty()) {
      const EpochMetrics te = evaluate(r.model, test_batches);
      csv << csv_row(epoch, fold, "test", te);
      r.test_accuracy = te.accuracy;
      fields.emplace_back("test_loss", fmt_double(te.loss));
      fields.emplace_back("test_accuracy", fmt_double(te.accuracy));
    }
    if (epoch == t.epochs) {
      r.train_eval = evaluate(r.model, train_eval_batches);
      csv << csv_row(epoch, fold, "train_eval", r.train_eval);
    }
    csv.flush();
    log::info("epoch_end", fields);
  }
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

struct LoadedModel {
  RunConfig config;
  Vocab vocab;
  SentimentModel model;
};

LoadedModel load_model(const fs::path& checkpoint, const RunConfig& config) {
  if (!fs::is_regular_file(checkpoint)) throw IoError("checkpoint not found: " + checkpoint.string());
  Vocab vocab = Vocab::load(vocab_sidecar(checkpoint));
  Rng rng(config.train.seed);
  SentimentModel model = SentimentModel::create(config.train.model_config(vocab.size()), rng);
  load_checkpoint(checkpoint, model);
  return {config, std::move(vocab), std::move(model)};
}

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<EncodedSample> encode(const RunConfig& c, const Corpus& corpus, const Vocab& vocab,
                                  const std::vector<std::size_t>& indices) {
  auto out = encode_corpus(corpus, vocab, indices);
  if (c.train.max_length) truncate_samples(out, *c.train.max_length);
  return out;
}

}  // namespace

fs::path vocab_sidecar(const fs::path& checkpoint) { return checkpoint.string() + ".vocab"; }
fs::path config_sidecar(const fs::path& checkpoint) { return checkpoint.string() + ".cfg"; }

DatasetChoice choose_dataset(const std::string& dataset, const std::string& format,
                             const std::string& data_dir) {
  DatasetChoice out;
  auto as_format = [](const std::string& s) -> std::optional<DatasetFormat> {
    for (auto f : {DatasetFormat::mr, DatasetFormat::subj, DatasetFormat::imdb})
      if (s == format_name(f)) return f;
    return std::nullopt;
  };
  if (!dataset.empty()) {
    if (auto f = as_format(dataset)) {
      out.format = f;
      out.dir = fs::path("data") / dataset;
    } else {
      out.dir = dataset;
      out.format = as_format(fs::path(dataset).filename().string());
    }
  }
  if (!format.empty()) out.format = parse_format(format);
  if (!data_dir.empty()) out.dir = data_dir;
  return out;
}

int cmd_train(const TrainArgs& args) {
  RunConfig c = args.config;
  c.train.threads = env_threads();
  c.train.validate();
  if (c.split == SplitMode::fixed && c.format != DatasetFormat::imdb)
    throw ConfigError("invalid split: fixed needs a dataset with a predefined test set (imdb)");
  if (c.split == SplitMode::cv && c.format == DatasetFormat::imdb)
    throw ConfigError("invalid split: imdb uses its fixed train/test split");

  const Dataset data = load_dataset(c.data_dir, c.format);
  const Vocab vocab = build_vocab(data, c);
  std::optional<EmbeddingTable> pretrained;
  if (!c.train.pretrained.empty()) {
    Rng rng(c.train.seed);
    EmbeddingCoverage cov;
    pretrained = load_pretrained_embeddings(c.train.pretrained, vocab, c.train.embed_dim, rng, &cov);
    log::info("pretrained_loaded", {{"found", std::to_string(cov.found)},
                                    {"total", std::to_string(cov.total)},
                                    {"coverage", fmt_double(cov.coverage())}});
  }
  log::info("train_start", {{"format", format_name(c.format)},
                            {"samples", std::to_string(data.train.size())},
                            {"vocab", std::to_string(vocab.size())},
                            {"variant", variant_name(c.train.variant)},
                            {"split", split_mode_name(c.split)},
                            {"threads", std::to_string(c.train.threads)}});

  fs::create_directories(args.out_dir);
  std::ofstream csv(args.out_dir / "metrics.csv", std::ios::binary);
  if (!csv) throw IoError("cannot write " + (args.out_dir / "metrics.csv").string());
  csv << kCsvHeader;

  std::vector<double> accuracies;
  std::optional<RunResult> last;
  const std::size_t n = data.train.size();
  if (c.split == SplitMode::cv) {
    const FoldPlan plan = make_folds(n, c.fold_count, c.train.seed);
    for (std::size_t fold = 0; fold < c.folds; ++fold) {
      Split s{encode(c, data.train, vocab, plan.train_indices(fold)),
              encode(c, data.train, vocab, plan.test_indices(fold))};
      last.emplace(train_one(c, vocab, s, fold, pretrained, csv));
      accuracies.push_back(last->test_accuracy);
      c.last_fold = fold;
    }
  } else {
    Split s{encode(c, data.train, vocab, all_indices(n)), {}};
    if (c.split == SplitMode::fixed) s.test = encode(c, *data.test, vocab, all_indices(data.test->size()));
    last.emplace(train_one(c, vocab, s, 0, pretrained, csv));
    if (c.split == SplitMode::fixed) accuracies.push_back(last->test_accuracy);
  }

  const fs::path ckpt = args.checkpoint.empty() ? args.out_dir / "model.ckpt" : args.checkpoint;
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(ckpt, last->model, &last->adam);
  vocab.save(vocab_sidecar(ckpt));
  write_text(config_sidecar(ckpt), to_config_text(c));

  std::string summary = fmt::format("split={} runs={} final_train_accuracy={:.6f}", split_mode_name(c.split),
                                    c.split == SplitMode::cv ? c.folds : 1, last->train_eval.accuracy);
  if (!accuracies.empty()) summary += fmt::format(" mean_test_accuracy={:.6f}", mean_accuracy(accuracies));
  summary += fmt::format(" checkpoint={}\n", ckpt.string());
  write_text(args.out_dir / "summary.txt", summary);
  fmt::print("{}", summary);
  return kOk;
}

int cmd_eval(const EvalArgs& args) {
  RunConfig c = args.config;
  c.train.threads = 1;
  c.train.validate();
  LoadedModel lm = load_model(args.checkpoint, c);
  const Dataset data = load_dataset(c.data_dir, c.format);
  const std::size_t n = data.train.size();
  const std::size_t fold = args.fold.value_or(c.last_fold);

  std::vector<EncodedSample> samples;
  const bool want_train = args.split == "train" || args.split == "all";
  const bool want_test = args.split == "test" || args.split == "all";
  if (!want_train && !want_test) throw ConfigError("invalid split: '" + args.split + "' (expected train|test|all)");
  if (c.split == SplitMode::cv && args.split != "all") {
    const FoldPlan plan = make_folds(n, c.fold_count, c.train.seed);
    if (fold >= c.fold_count) throw ConfigError(fmt::format("invalid fold: {} (have {})", fold, c.fold_count));
    samples = encode(c, data.train, lm.vocab, want_train ? plan.train_indices(fold) : plan.test_indices(fold));
  } else {
    if (want_train || c.split == SplitMode::cv) append(samples, encode(c, data.train, lm.vocab, all_indices(n)));
    if (want_test && c.split != SplitMode::cv) {
      if (!data.test) throw ConfigError("invalid split: this run has no held-out test set");
      append(samples, encode(c, *data.test, lm.vocab, all_indices(data.test->size())));
    }
  }
  const auto batches = batch_and_pad(samples, c.train.batch_size);
  const EpochMetrics m = evaluate(lm.model, batches);
  const std::size_t csv_fold = c.split == SplitMode::cv ? fold : 0;
  fmt::print("split={} fold={} samples={} loss={:.6f} accuracy={:.6f}\n", args.split, csv_fold, m.samples,
             m.loss, m.accuracy);
  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    write_text(args.out_dir / "eval.csv",
               std::string(kCsvHeader) + csv_row(c.train.epochs, csv_fold, args.split.c_str(), m));
  }
  return kOk;
}

int cmd_gradcheck(const GradcheckArgs& args) {
  GradcheckSuiteOptions opt;
  opt.seed = args.seed;
  opt.seeds = args.seeds;
  opt.h = args.h;
  opt.tol = args.tol;
  if (!(opt.tol > 0.0) || !(opt.h > 0.0) || opt.seeds == 0)
    throw ConfigError("invalid gradcheck options: tol and h must be > 0, seeds >= 1");
  const auto checks = run_gradcheck_suite(opt);
  std::map<std::string, double> worst;
  std::vector<std::string> order;
  bool ok = true;
  for (const auto& c : checks) {
    if (!worst.count(c.component)) order.push_back(c.component);
    worst[c.component] = std::max(worst[c.component], c.report.max_rel_error);
    fmt::print("component={} seed={} checked={} max_rel_error={:.3e} status={}\n", c.component, c.seed,
               c.report.checked, c.report.max_rel_error, c.report.passed ? "pass" : "fail");
    if (!c.report.passed) {
      ok = false;
      for (const auto& f : c.report.failures)
        log::write("error", "gradcheck_failure",
                   {{"component", c.component}, {"seed", std::to_string(c.seed)}, {"param", f.param},
                    {"index", std::to_string(f.index)}, {"analytic", fmt::format("{:.6e}", f.analytic)},
                    {"numeric", fmt::format("{:.6e}", f.numeric)},
                    {"rel_error", fmt::format("{:.3e}", f.rel_error)}});
    }
  }
  for (const auto& name : order)
    fmt::print("summary component={} max_rel_error={:.3e} tol={:.1e}\n", name, worst[name], opt.tol);
  fmt::print("result={}\n", ok ? "pass" : "fail");
  return ok ? kOk : kVerification;
}

int cmd_infer(const InferArgs& args) {
  std::vector<std::string> texts = args.texts;
  if (args.demo) texts.insert(texts.end(), std::begin(kDemoSentences), std::end(kDemoSentences));
  if (texts.empty()) throw ConfigError("infer: no text given (pass sentences or --demo)");

  std::optional<LoadedModel> lm;
  if (args.zero_model) {
    RunConfig c = args.overrides.value_or(RunConfig{});
    Rng rng(c.train.seed);
    Vocab vocab = Vocab::from_tokens({kPadToken, kUnkToken});
    SentimentModel model = SentimentModel::create(c.train.model_config(vocab.size()), rng);
    model.zero_all();
    lm.emplace(LoadedModel{c, std::move(vocab), std::move(model)});
  } else {
    if (args.checkpoint.empty()) throw ConfigError("infer: --checkpoint or --zero-model is required");
    lm.emplace(load_model(args.checkpoint, *args.overrides));
  }
  for (const auto& text : texts) {
    const auto tokens = tokenize(sanitize_utf8(text));
    if (tokens.empty()) throw ConfigError("infer: empty text");
    const auto ids = lm->vocab.encode(tokens);
    const double p = classify_sentence(lm->model, ids);
    fmt::print("{:.6f}\t{}\t{}\n", p, p >= 0.5 ? "POS" : "NEG", text);
  }
  return kOk;
}

int cmd_rc_features(const RcFeaturesArgs& args) {
  const auto document = tokenize(sanitize_utf8(read_all(args.document)));
  const auto query = tokenize(sanitize_utf8(read_all(args.query)));
  if (document.empty()) throw ConfigError("rc-features: document has no tokens");
  const auto freq = doc_word_freq(document);
  const auto coq = count_of_query_word(document, query);
  fmt::print("token\tfreq\tcoq\n");
  for (std::size_t i = 0; i < document.size(); ++i)
    fmt::print("{}\t{:.6f}\t{}\n", document[i], freq[i], coq[i]);
  return kOk;
}

}  // namespace cru::cli
