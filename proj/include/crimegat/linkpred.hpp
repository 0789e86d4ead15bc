#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crimegat/graph.hpp"
#include "crimegat/matrix.hpp"
#include "crimegat/rng.hpp"

namespace crimegat {

enum class ScorerKind { dot, hadamard_linear };

const char* to_string(ScorerKind kind);
ScorerKind parse_scorer_kind(const std::string& name);

// Turns a pair of node embeddings into a link logit. `dot` is parameter-free;
// `hadamard_linear` scores w . (h_u * h_v) + b. Both are symmetric in (u, v).
struct LinkScorer {
  ScorerKind kind = ScorerKind::dot;
  std::vector<double> w;  // hadamard_linear only
  double b = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

LinkScorer make_dot_scorer();
LinkScorer make_hadamard_scorer(std::size_t dim, Rng& rng);

double score_link(const LinkScorer& scorer, std::span<const double> h_u,
                  std::span<const double> h_v);

std::vector<double> score_pairs(const LinkScorer& scorer, const Matrix& embeddings,
                                std::span<const Edge> pairs);

// Accumulates d(loss)/d(embeddings) into d_embeddings and the scorer's own
// gradients into its grad buffers.
void score_pairs_backward(LinkScorer& scorer, const Matrix& embeddings,
                          std::span<const Edge> pairs, std::span<const double> d_logits,
                          Matrix& d_embeddings);

struct BceResult {
  double loss = 0.0;
  std::vector<double> d_logits;
};

// Mean binary cross-entropy in the logit-stable form
// max(z, 0) - z*y + log(1 + exp(-|z|)); gradient (sigmoid(z) - y) / n.
BceResult bce_loss(std::span<const double> logits, std::span<const int> labels);

}  // namespace crimegat
