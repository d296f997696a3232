#include "cru/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <thread>
#include <unordered_map>

#include "cru/errors.hpp"

namespace cru {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

TrainConfig TrainConfig::defaults_for(DatasetFormat format) {
  TrainConfig c;
  switch (format) {
    case DatasetFormat::mr:
      break;
    case DatasetFormat::subj:
      c.dropout = 0.4;
      break;
    case DatasetFormat::imdb:
      c.embed_dim = 256;
      c.hidden_dim = 256;
      c.lr = 0.001;
      c.vocab_cap = 50000;
      break;
  }
  return c;
}

ModelConfig TrainConfig::model_config(std::size_t vocab_size) const {
  ModelConfig m;
  m.variant = variant;
  m.vocab_size = vocab_size;
  m.embed_dim = embed_dim;
  m.hidden_dim = hidden_dim;
  m.filter_length = filter_length;
  m.fc_dim = fc_dim;
  m.embed_dropout = dropout;
  m.fc_dropout = dropout;
  return m;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("invalid " + key + ": " + why);
  };
  if (embed_dim == 0) fail("embed", "must be >= 1");
  if (hidden_dim == 0) fail("hidden", "must be >= 1");
  if (fc_dim == 0) fail("fc", "must be >= 1");
  if (variant != Variant::gru && (filter_length == 0 || filter_length % 2 == 0)) {
    fail("filter", "must be odd and >= 1, got " + std::to_string(filter_length));
  }
  if (variant == Variant::deep && hidden_dim != embed_dim) {
    fail("hidden", "deep fusion requires hidden == embed (hidden " + std::to_string(hidden_dim) +
                       ", embed " + std::to_string(embed_dim) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout", "must be in [0, 1)");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr", "must be a finite value >= 0");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) fail("l2", "must be a finite value >= 0");
  if (!(clip > 0.0)) fail("clip", "must be > 0");
  if (batch_size == 0) fail("batch", "must be >= 1");
  if (epochs == 0) fail("epochs", "must be >= 1");
  if (vocab_cap && *vocab_cap < 3) fail("vocab-cap", "must be >= 3");
  if (max_length && *max_length == 0) fail("max-length", "must be >= 1");
  if (threads == 0) fail("threads", "must be >= 1");
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

SentimentModel SentimentModel::create(const ModelConfig& config, Rng& rng,
                                      std::optional<EmbeddingTable> embedding) {
  if (config.vocab_size < 2) throw ConfigError("vocab must hold at least <pad> and <unk>");
  if (config.variant == Variant::deep && config.hidden_dim != config.embed_dim) {
    throw ConfigError("deep fusion requires hidden == embed");
  }
  check_dropout_rate(config.embed_dropout);
  check_dropout_rate(config.fc_dropout);
  SentimentModel m;
  m.config = config;
  if (embedding) {
    if (embedding->vocab_size() != config.vocab_size || embedding->dim() != config.embed_dim) {
      throw ConfigError("embedding table shape " + to_string(embedding->weights.value.shape()) +
                        " does not match vocab/embed settings");
    }
    m.embedding = std::move(*embedding);
  } else {
    m.embedding =
        EmbeddingTable::uniform(config.vocab_size, config.embed_dim, kEmbeddingInitLimit, rng);
  }
  m.fwd = Cell::create("fwd", config.variant, config.embed_dim, config.hidden_dim,
                       config.filter_length, rng);
  m.bwd = Cell::create("bwd", config.variant, config.embed_dim, config.hidden_dim,
                       config.filter_length, rng);
  m.fc = DenseLayer::create("fc", config.fc_dim, 2 * config.hidden_dim, Activation::relu, rng);
  m.out = DenseLayer::create("out", 1, config.fc_dim, Activation::sigmoid, rng);
  return m;
}

std::vector<Param*> SentimentModel::params() {
  std::vector<Param*> out{&embedding.weights};
  for (Param* p : fwd.params()) out.push_back(p);
  for (Param* p : bwd.params()) out.push_back(p);
  fc.collect(out);
  this->out.collect(out);
  return out;
}

void SentimentModel::zero_all() {
  for (Param* p : params()) p->value.fill(0.0);
}

DropoutMasks sample_dropout_masks(const SentimentModel& model, const Batch& batch, Rng& rng) {
  DropoutMasks m;
  if (model.config.embed_dropout > 0.0) {
    m.embed = dropout_mask({batch.width, batch.size, model.config.embed_dim},
                           model.config.embed_dropout, rng);
  }
  if (model.config.fc_dropout > 0.0) {
    m.fc = dropout_mask({batch.size, model.config.fc_dim}, model.config.fc_dropout, rng);
  }
  return m;
}

BoundModel bind_model(Tape& tape, SentimentModel& model) {
  return {tape.param(model.embedding.weights), model.fwd.bind(tape), model.bwd.bind(tape),
          model.fc.bind(tape), model.out.bind(tape)};
}

Var forward_classify(const BoundModel& model, const Batch& batch, const DropoutMasks* masks) {
  Tape& tape = model.embedding.tape();
  const std::size_t d = model.embedding.value().dim(1);
  if (batch.ids.size() != batch.width * batch.size || batch.lengths.size() != batch.size) {
    throw ContractError("malformed batch");
  }
  Var x = reshape(embed_lookup(model.embedding, batch.ids), {batch.width, batch.size, d});
  if (masks && !masks->embed.empty()) x = mul(x, tape.constant(masks->embed));
  Var features = run_bidirectional(model.fwd, model.bwd, x, batch.lengths).final_pair;
  Var hidden = dense_forward(model.fc, features);
  if (masks && !masks->fc.empty()) hidden = mul(hidden, tape.constant(masks->fc));
  return reshape(dense_forward(model.out, hidden), {batch.size});
}

double classify_sentence(SentimentModel& model, std::span<const std::size_t> ids) {
  Tape tape;
  BoundModel bound = bind_model(tape, model);
  Var x = embed_lookup(bound.embedding, ids);
  Var features = run_bidirectional(bound.fwd, bound.bwd, x).final_pair;
  return dense_forward(bound.out, dense_forward(bound.fc, features)).value().item();
}

std::vector<double> predict(SentimentModel& model, const Batch& batch) {
  Tape tape;
  BoundModel bound = bind_model(tape, model);
  const auto probs = forward_classify(bound, batch).value().data();
  return {probs.begin(), probs.end()};
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

Batch slice_batch(const Batch& batch, std::size_t begin, std::size_t count) {
  Batch out;
  out.size = count;
  for (std::size_t j = begin; j < begin + count; ++j) {
    out.width = std::max(out.width, batch.lengths[j]);
  }
  out.ids.assign(out.width * count, kPadId);
  out.mask = Tensor({out.width, count});
  out.labels = Tensor({count});
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t src = begin + j;
    out.lengths.push_back(batch.lengths[src]);
    out.labels[j] = batch.labels[src];
    for (std::size_t t = 0; t < out.width; ++t) {
      out.ids[t * count + j] = batch.ids[t * batch.size + src];
      out.mask.at(t, j) = batch.mask.at(t, src);
    }
  }
  return out;
}

std::size_t count_correct(std::span<const double> probs, const Tensor& labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int predicted = probs[i] >= 0.5 ? 1 : 0;
    if (predicted == static_cast<int>(labels[i])) ++correct;
  }
  return correct;
}

struct ShardResult {
  double loss = 0.0;
  std::size_t correct = 0;
};

}  // namespace

EpochMetrics train_epoch(SentimentModel& model, AdamState& adam, std::span<const Batch> batches,
                         const TrainConfig& config, Rng& dropout_rng) {
  std::vector<Param*> params = model.params();
  EpochMetrics metrics;
  double loss_sum = 0.0;
  std::size_t correct = 0;

  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    const Batch& batch = batches[bi];
    for (Param* p : params) p->zero_grad();

    const std::size_t shard_count = std::min(config.threads, batch.size);
    std::vector<Batch> shards;
    if (shard_count > 1) {
      const std::size_t base = batch.size / shard_count;
      const std::size_t extra = batch.size % shard_count;
      std::size_t begin = 0;
      for (std::size_t s = 0; s < shard_count; ++s) {
        const std::size_t count = base + (s < extra ? 1 : 0);
        shards.push_back(slice_batch(batch, begin, count));
        begin += count;
      }
    }
    std::span<const Batch> work = shards.empty() ? std::span<const Batch>(&batch, 1)
                                                 : std::span<const Batch>(shards);

    std::vector<DropoutMasks> masks;
    masks.reserve(work.size());
    for (const auto& shard : work) masks.push_back(sample_dropout_masks(model, shard, dropout_rng));

    std::vector<ShardResult> results(work.size());
    std::vector<std::unique_ptr<Tape>> tapes(work.size());
    auto run_shard = [&](std::size_t s) {
      tapes[s] = std::make_unique<Tape>();
      Tape& tape = *tapes[s];
      BoundModel bound = bind_model(tape, model);
      Var probs = forward_classify(bound, work[s], &masks[s]);
      Var loss = bce(probs, work[s].labels);
      results[s].loss = loss.value().item();
      results[s].correct = count_correct(probs.value().data(), work[s].labels);
      tape.backward(loss, /*flush_params=*/false);
    };
    if (work.size() == 1) {
      run_shard(0);
    } else {
      std::vector<std::jthread> workers;
      for (std::size_t s = 0; s < work.size(); ++s) workers.emplace_back(run_shard, s);
    }

    double data_loss = 0.0;
    for (std::size_t s = 0; s < work.size(); ++s) {
      const double weight = static_cast<double>(work[s].size) / static_cast<double>(batch.size);
      data_loss += weight * results[s].loss;
      tapes[s]->flush_param_grads(weight);
      tapes[s].reset();
      correct += results[s].correct;
    }

    double reg = 0.0;
    if (config.l2 > 0.0) {
      Tape tape;
      Var penalty = l2_penalty(tape.param(model.embedding.weights), config.l2);
      reg = penalty.value().item();
      tape.backward(penalty);
    }

    const double loss = data_loss + reg;
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite loss at batch " + std::to_string(bi));
    }
    clip_global_norm(params, config.clip);
    adam.step(params);

    loss_sum += loss * static_cast<double>(batch.size);
    metrics.samples += batch.size;
  }

  if (metrics.samples) {
    metrics.loss = loss_sum / static_cast<double>(metrics.samples);
    metrics.accuracy = static_cast<double>(correct) / static_cast<double>(metrics.samples);
  }
  return metrics;
}

EpochMetrics evaluate(SentimentModel& model, std::span<const Batch> batches) {
  EpochMetrics metrics;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (const auto& batch : batches) {
    Tape tape;
    BoundModel bound = bind_model(tape, model);
    Var probs = forward_classify(bound, batch);
    loss_sum += bce(probs, batch.labels).value().item() * static_cast<double>(batch.size);
    correct += count_correct(probs.value().data(), batch.labels);
    metrics.samples += batch.size;
  }
  if (metrics.samples == 0) throw ContractError("evaluate called on an empty set");
  metrics.loss = loss_sum / static_cast<double>(metrics.samples);
  metrics.accuracy = static_cast<double>(correct) / static_cast<double>(metrics.samples);
  return metrics;
}

double mean_accuracy(std::span<const double> fold_accuracies) {
  if (fold_accuracies.empty()) throw ContractError("no fold accuracies");
  double s = 0.0;
  for (double a : fold_accuracies) s += a;
  return s / static_cast<double>(fold_accuracies.size());
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr const char* kAdamStep = "adam.t";
}

NamedTensors model_state(SentimentModel& model, const AdamState* adam) {
  NamedTensors out;
  const auto params = model.params();
  for (const Param* p : params) out.emplace_back(p->name, p->value);
  if (adam) {
    out.emplace_back(kAdamStep, Tensor::scalar(static_cast<double>(adam->t())));
    for (std::size_t k = 0; k < params.size(); ++k) {
      out.emplace_back("adam.m." + params[k]->name, adam->first_moments().at(k));
      out.emplace_back("adam.v." + params[k]->name, adam->second_moments().at(k));
    }
  }
  return out;
}

void load_model_state(const NamedTensors& state, SentimentModel& model, AdamState* adam) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : state) by_name[name] = &t;

  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ConfigError("checkpoint is missing tensor '" + name + "'");
    if (it->second->shape() != shape) {
      throw ConfigError("checkpoint tensor '" + name + "' has shape " +
                        to_string(it->second->shape()) + ", model expects " + to_string(shape));
    }
    return *it->second;
  };

  const auto params = model.params();
  std::size_t expected = params.size();
  for (Param* p : params) p->value = fetch(p->name, p->value.shape());

  const bool has_adam = by_name.count(kAdamStep) != 0;
  if (has_adam) expected += 1 + 2 * params.size();
  if (adam && has_adam) {
    *adam = AdamState(params, adam->config());
    adam->set_t(static_cast<std::uint64_t>(fetch(kAdamStep, {1}).item()));
    for (std::size_t k = 0; k < params.size(); ++k) {
      adam->first_moments()[k] = fetch("adam.m." + params[k]->name, params[k]->value.shape());
      adam->second_moments()[k] = fetch("adam.v." + params[k]->name, params[k]->value.shape());
    }
  }

  if (by_name.size() != expected) {
    for (const auto& [name, t] : state) {
      const bool known =
          std::any_of(params.begin(), params.end(), [&](Param* p) {
            return p->name == name || "adam.m." + p->name == name || "adam.v." + p->name == name;
          }) ||
          name == kAdamStep;
      if (!known) throw ConfigError("checkpoint tensor '" + name + "' is not part of this model");
    }
    throw ConfigError("checkpoint holds an unexpected set of tensors");
  }
}

void save_checkpoint(const std::filesystem::path& path, SentimentModel& model,
                     const AdamState* adam) {
  save_tensors(path, model_state(model, adam));
}

void load_checkpoint(const std::filesystem::path& path, SentimentModel& model, AdamState* adam) {
  load_model_state(load_tensors(path), model, adam);
}

}  // namespace cru
