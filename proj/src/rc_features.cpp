#include "cru/rc_features.hpp"

#include <algorithm>
#include <unordered_map>

#include "cru/errors.hpp"

namespace cru {

void ClozeSample::validate() const {
  if (document.empty()) throw ContractError("cloze sample has an empty document");
  if (query.empty()) throw ContractError("cloze sample has an empty query");
  if (std::find(document.begin(), document.end(), answer) == document.end()) {
    throw ContractError("answer '" + answer + "' does not occur in the document");
  }
}

namespace {

std::unordered_map<std::string_view, std::size_t> count_tokens(std::span<const std::string> tokens) {
  std::unordered_map<std::string_view, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  return counts;
}

}  // namespace

std::vector<double> doc_word_freq(std::span<const std::string> document) {
  if (document.empty()) throw ContractError("doc_word_freq needs a non-empty document");
  const auto counts = count_tokens(document);
  const double len = static_cast<double>(document.size());
  std::vector<double> out;
  out.reserve(document.size());
  for (const auto& t : document) out.push_back(static_cast<double>(counts.at(t)) / len);
  return out;
}

std::vector<double> count_of_query_word(std::span<const std::string> document,
                                        std::span<const std::string> query) {
  const auto counts = count_tokens(query);
  std::vector<double> out;
  out.reserve(document.size());
  for (const auto& t : document) {
    auto it = counts.find(t);
    out.push_back(it == counts.end() ? 0.0 : static_cast<double>(it->second));
  }
  return out;
}

EnrichedEmbedding enrich_embeddings(Var base, std::span<const std::string> document,
                                    std::span<const std::string> query) {
  const Tensor& bv = base.value();
  if (bv.rank() != 2 || bv.dim(0) != document.size()) {
    throw DimensionError("enrich_embeddings: base " + to_string(bv.shape()) + " does not align with " +
                         std::to_string(document.size()) + " document tokens");
  }
  const std::size_t n = document.size();
  EnrichedEmbedding out;
  out.base = base;
  out.freq = Tensor({n, 1}, doc_word_freq(document));
  out.coq = Tensor({n, 1}, count_of_query_word(document, query));
  Tape& tape = base.tape();
  const Var parts[] = {base, tape.constant(out.freq), tape.constant(out.coq)};
  out.enriched = concat_last(parts);
  return out;
}

Var encode_bidirectional_enriched(const Cell::Bound& fwd, const Cell::Bound& bwd, Var enriched) {
  const Tensor& ev = enriched.value();
  if (ev.rank() != 2 || ev.dim(1) != fwd.input_dim || ev.dim(1) != bwd.input_dim) {
    throw DimensionError("enriched width " + std::to_string(ev.shape().back()) +
                         " does not match cell input " + std::to_string(fwd.input_dim));
  }
  return run_bidirectional(fwd, bwd, enriched).per_position;
}

}  // namespace cru
