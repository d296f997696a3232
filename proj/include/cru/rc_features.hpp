#pragma once

#include <span>
#include <string>
#include <vector>

#include "cru/recurrent.hpp"

namespace cru {

/// Cloze-style sample: the answer is a single word of the document.
struct ClozeSample {
  std::vector<std::string> document;
  std::vector<std::string> query;
  std::string answer;

  /// Throws ContractError when document or query is empty or the answer is
  /// not a document token.
  void validate() const;
};

/// Per document position: (occurrences of that token in the document) / |D|.
std::vector<double> doc_word_freq(std::span<const std::string> document);

/// Per document position: occurrences of that token in the query (a count,
/// not a 0/1 indicator).
std::vector<double> count_of_query_word(std::span<const std::string> document,
                                        std::span<const std::string> query);

/// Document embeddings with the two scalar features appended as columns.
struct EnrichedEmbedding {
  Var base;      // [n x d]
  Tensor freq;   // [n x 1]
  Tensor coq;    // [n x 1]
  Var enriched;  // [n x (d + 2)]; feature columns carry no gradient
};

EnrichedEmbedding enrich_embeddings(Var base, std::span<const std::string> document,
                                    std::span<const std::string> query);

/// Per-position bidirectional states [n x 2d_h] over the enriched document.
Var encode_bidirectional_enriched(const Cell::Bound& fwd, const Cell::Bound& bwd, Var enriched);

}  // namespace cru
