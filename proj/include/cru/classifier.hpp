#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cru/data.hpp"
#include "cru/optim.hpp"
#include "cru/recurrent.hpp"
#include "cru/serialize.hpp"

namespace cru {

struct ModelConfig {
  Variant variant = Variant::deep_enhanced;
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 200;
  std::size_t hidden_dim = 200;
  std::size_t filter_length = 3;
  std::size_t fc_dim = 1024;
  double embed_dropout = 0.3;
  double fc_dropout = 0.3;
};

/// Hyper-parameters of one training run. Defaults follow the MR column of
/// the reference setup; defaults_for() switches per dataset.
struct TrainConfig {
  Variant variant = Variant::deep_enhanced;
  std::size_t filter_length = 3;
  std::size_t embed_dim = 200;
  std::size_t hidden_dim = 200;
  std::size_t fc_dim = 1024;
  double dropout = 0.3;
  double lr = 0.0005;
  double l2 = 1e-4;
  double clip = 5.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::optional<std::size_t> vocab_cap;
  std::optional<std::size_t> max_length;  // token cap per sample; off by default
  std::string pretrained;
  std::size_t threads = 1;

  static TrainConfig defaults_for(DatasetFormat format);
  ModelConfig model_config(std::size_t vocab_size) const;
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// embeddings -> dropout -> bidirectional cell pair -> [fwd final ; bwd final]
/// -> dense(fc_dim, relu) -> dropout -> dense(1, sigmoid).
struct SentimentModel {
  ModelConfig config;
  EmbeddingTable embedding;
  Cell fwd;
  Cell bwd;
  DenseLayer fc;
  DenseLayer out;

  /// Validates the dimension chain (ConfigError) and initializes weights.
  /// A provided embedding table replaces the random one.
  static SentimentModel create(const ModelConfig& config, Rng& rng,
                               std::optional<EmbeddingTable> embedding = std::nullopt);

  std::vector<Param*> params();
  void zero_all();
};

/// Dropout masks for one forward pass; empty tensors mean no dropout.
struct DropoutMasks {
  Tensor embed;  // [width x B x d]
  Tensor fc;     // [B x fc_dim]
};

DropoutMasks sample_dropout_masks(const SentimentModel& model, const Batch& batch, Rng& rng);

struct BoundModel {
  Var embedding;
  Cell::Bound fwd;
  Cell::Bound bwd;
  DenseLayer::Bound fc;
  DenseLayer::Bound out;
};

BoundModel bind_model(Tape& tape, SentimentModel& model);

/// Probabilities [B] for a padded batch. Without masks the pass is in eval mode.
Var forward_classify(const BoundModel& model, const Batch& batch, const DropoutMasks* masks = nullptr);

/// Single unpadded sentence through the rank-2 path (eval mode).
double classify_sentence(SentimentModel& model, std::span<const std::size_t> ids);

/// Eval-mode probabilities for every sample of a batch.
std::vector<double> predict(SentimentModel& model, const Batch& batch);

struct EpochMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t samples = 0;
};

/// Per batch: forward (train-mode dropout), bce + l2 on embeddings,
/// backward, global-norm clip, Adam step. Throws NumericError naming the
/// batch index on a non-finite loss.
EpochMetrics train_epoch(SentimentModel& model, AdamState& adam, std::span<const Batch> batches,
                         const TrainConfig& config, Rng& dropout_rng);

/// Eval-mode mean bce and accuracy; p >= 0.5 predicts the positive class.
/// Throws ContractError on an empty set.
EpochMetrics evaluate(SentimentModel& model, std::span<const Batch> batches);

/// Unweighted mean of per-fold accuracies.
double mean_accuracy(std::span<const double> fold_accuracies);

// Checkpoints ---------------------------------------------------------------

NamedTensors model_state(SentimentModel& model, const AdamState* adam = nullptr);
/// Copies tensors into the model (and Adam state when given). Any missing,
/// extra or mis-shaped tensor throws ConfigError naming it.
void load_model_state(const NamedTensors& state, SentimentModel& model, AdamState* adam = nullptr);

void save_checkpoint(const std::filesystem::path& path, SentimentModel& model,
                     const AdamState* adam = nullptr);
void load_checkpoint(const std::filesystem::path& path, SentimentModel& model,
                     AdamState* adam = nullptr);

}  // namespace cru
