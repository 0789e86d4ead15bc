#include "crimegat/linkpred.hpp"

#include <cmath>
#include <string>

#include "crimegat/errors.hpp"

namespace crimegat {

const char* to_string(ScorerKind kind) {
  return kind == ScorerKind::dot ? "dot" : "hadamard_linear";
}

ScorerKind parse_scorer_kind(const std::string& name) {
  if (name == "dot") return ScorerKind::dot;
  if (name == "hadamard_linear") return ScorerKind::hadamard_linear;
  throw ConfigError("unknown scorer kind '" + name + "'");
}

LinkScorer make_dot_scorer() { return LinkScorer{}; }

LinkScorer make_hadamard_scorer(std::size_t dim, Rng& rng) {
  LinkScorer s;
  s.kind = ScorerKind::hadamard_linear;
  const double bound = std::sqrt(6.0 / (static_cast<double>(dim) + 1.0));
  s.w.resize(dim);
  for (double& w : s.w) w = rng.uniform(-bound, bound);
  s.grad_w.assign(dim, 0.0);
  return s;
}

double score_link(const LinkScorer& scorer, std::span<const double> h_u,
                  std::span<const double> h_v) {
  if (h_u.size() != h_v.size()) throw ContractError("score_link: embedding dims differ");
  if (scorer.kind == ScorerKind::dot) return dot(h_u, h_v);
  if (scorer.w.size() != h_u.size()) {
    throw ContractError("score_link: scorer dim " + std::to_string(scorer.w.size()) +
                        " does not match embedding dim " + std::to_string(h_u.size()));
  }
  double s = scorer.b;
  // w * (h_u . h_v) keeps the score bitwise symmetric in (u, v).
  for (std::size_t i = 0; i < h_u.size(); ++i) s += scorer.w[i] * (h_u[i] * h_v[i]);
  return s;
}

std::vector<double> score_pairs(const LinkScorer& scorer, const Matrix& embeddings,
                                std::span<const Edge> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const Edge& e : pairs) {
    out.push_back(score_link(scorer, embeddings.row(e.u), embeddings.row(e.v)));
  }
  return out;
}

void score_pairs_backward(LinkScorer& scorer, const Matrix& embeddings,
                          std::span<const Edge> pairs, std::span<const double> d_logits,
                          Matrix& d_embeddings) {
  if (pairs.size() != d_logits.size()) {
    throw ContractError("score_pairs_backward: pair/gradient count mismatch");
  }
  if (!d_embeddings.same_shape(embeddings)) {
    throw ContractError("score_pairs_backward: gradient shape mismatch");
  }
  const std::size_t d = embeddings.cols();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double g = d_logits[k];
    const auto hu = embeddings.row(pairs[k].u);
    const auto hv = embeddings.row(pairs[k].v);
    auto du = d_embeddings.row(pairs[k].u);
    auto dv = d_embeddings.row(pairs[k].v);
    if (scorer.kind == ScorerKind::dot) {
      for (std::size_t i = 0; i < d; ++i) {
        du[i] += g * hv[i];
        dv[i] += g * hu[i];
      }
    } else {
      for (std::size_t i = 0; i < d; ++i) {
        du[i] += g * scorer.w[i] * hv[i];
        dv[i] += g * scorer.w[i] * hu[i];
        scorer.grad_w[i] += g * hu[i] * hv[i];
      }
      scorer.grad_b += g;
    }
  }
}

BceResult bce_loss(std::span<const double> logits, std::span<const int> labels) {
  if (logits.empty()) throw ContractError("bce_loss: empty input");
  if (logits.size() != labels.size()) {
    throw ContractError("bce_loss: logits and labels differ in length");
  }
  const double n = static_cast<double>(logits.size());
  BceResult r;
  r.d_logits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw ContractError("bce_loss: labels must be 0 or 1");
    }
    const double z = logits[i];
    const double y = static_cast<double>(labels[i]);
    r.loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    r.d_logits[i] = (sigmoid(z) - y) / n;
  }
  r.loss /= n;
  if (!std::isfinite(r.loss)) throw NumericError("bce_loss: non-finite loss");
  return r;
}

}  // namespace crimegat
