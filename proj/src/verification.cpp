#include "cru/verification.hpp"

#include "cru/classifier.hpp"
#include "cru/recurrent.hpp"

namespace cru {

namespace {

constexpr std::size_t kDim = 4;
constexpr std::size_t kFilter = 3;

GradcheckReport check_cell(Variant variant, std::uint64_t seed, const GradcheckSuiteOptions& opt) {
  Rng rng(seed);
  const std::size_t n = 2 + seed % 4;  // 2..5
  const std::vector<std::size_t> lengths{n, n > 2 ? n - 2 : 1};
  Cell cell = Cell::create("cell", variant, kDim, kDim, kFilter, rng);
  // Non-zero biases so every bias path carries a nontrivial gradient.
  for (Param* p : cell.params()) {
    if (p->value.rank() == 1) p->value = uniform_tensor(p->value.shape(), 0.3, rng);
  }
  Param input("input", uniform_tensor({n, lengths.size(), kDim}, 1.0, rng));
  const Tensor weights = uniform_tensor({n, lengths.size(), kDim}, 1.0, rng);

  auto loss = [&](Tape& tape) {
    Cell::Bound bound = cell.bind(tape);
    auto out = run_sequence(bound, tape.param(input), {}, lengths);
    return add(sum(mul(out.all_h, tape.constant(weights))), sum(out.final_h));
  };
  std::vector<Param*> params = cell.params();
  params.push_back(&input);
  return finite_diff_gradcheck(loss, params, opt.h, opt.tol);
}

GradcheckReport check_classifier(std::uint64_t seed, const GradcheckSuiteOptions& opt) {
  Rng rng(seed);
  ModelConfig config;
  config.variant = Variant::deep_enhanced;
  config.vocab_size = 7;
  config.embed_dim = kDim;
  config.hidden_dim = kDim;
  config.filter_length = kFilter;
  config.fc_dim = 6;
  config.embed_dropout = 0.0;
  config.fc_dropout = 0.0;
  SentimentModel model = SentimentModel::create(config, rng);
  for (Param* p : model.params()) {
    if (p->value.rank() == 1) p->value = uniform_tensor(p->value.shape(), 0.2, rng);
  }
  model.embedding.weights.value = uniform_tensor({7, kDim}, 1.0, rng);

  std::vector<EncodedSample> samples{{{2, 3, 4, 5, 6}, 1}, {{6, 1, 2}, 0}, {{3, 3}, 1}};
  const Batch batch = batch_and_pad(samples, samples.size()).front();
  constexpr double kLambda = 0.01;

  auto loss = [&](Tape& tape) {
    BoundModel bound = bind_model(tape, model);
    Var probs = forward_classify(bound, batch);
    return add(bce(probs, batch.labels), l2_penalty(bound.embedding, kLambda));
  };
  const auto params = model.params();
  return finite_diff_gradcheck(loss, params, opt.h, opt.tol);
}

}  // namespace

std::vector<ComponentCheck> run_gradcheck_suite(const GradcheckSuiteOptions& options) {
  std::vector<ComponentCheck> out;
  for (std::size_t s = 0; s < options.seeds; ++s) {
    const std::uint64_t seed = options.seed + s;
    for (Variant v : kAllVariants) out.push_back({variant_name(v), seed, check_cell(v, seed, options)});
    out.push_back({"classifier", seed, check_classifier(seed, options)});
  }
  return out;
}

}  // namespace cru
