#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "crimegat/gat.hpp"
#include "crimegat/graph.hpp"
#include "crimegat/linkpred.hpp"
#include "crimegat/matrix.hpp"

namespace crimegat {

// Handcrafted features for one candidate pair, computed on the training graph
// only. Fixed vector layout: [common_neighbors, jaccard, pref_attachment,
// min_degree, max_degree].
struct PairFeatures {
  std::size_t common_neighbors = 0;
  double jaccard = 0.0;
  double pref_attachment = 0.0;
  std::size_t degree_min = 0;
  std::size_t degree_max = 0;

  static constexpr std::size_t kDim = 5;
  std::array<double, kDim> to_vector() const {
    return {static_cast<double>(common_neighbors), jaccard, pref_attachment,
            static_cast<double>(degree_min), static_cast<double>(degree_max)};
  }
};

PairFeatures pair_features(const Graph& g, std::size_t u, std::size_t v);

// degree(u) * degree(v); degrees exclude self-loops.
double pa_score(const Graph& g, std::size_t u, std::size_t v);

// Symmetric CSR matrix with values; used for the GCN propagation rule.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> targets;
  std::vector<double> values;
};

// A_hat = D^(-1/2) (A + I) D^(-1/2), with D the degree matrix of A + I.
// Requires self-loops to be present.
CsrMatrix normalize_adjacency(const Graph& g);

Matrix csr_multiply(const CsrMatrix& m, const Matrix& h);

struct GcnLayerParams {
  Matrix W;  // out_dim x in_dim
  Matrix grad_W;
  Activation activation = Activation::leaky_relu;
};

struct GcnCache {
  Matrix input;
  Matrix aggregated;  // A_hat * input
  Matrix preact;
};

std::pair<Matrix, GcnCache> gcn_layer_forward(const GcnLayerParams& layer,
                                              const CsrMatrix& a_hat, const Matrix& h,
                                              double slope);
Matrix gcn_layer_backward(GcnLayerParams& layer, const GcnCache& cache,
                          const CsrMatrix& a_hat, const Matrix& d_out, double slope);

struct SageLayerParams {
  Matrix W_self;   // out_dim x in_dim
  Matrix W_neigh;  // out_dim x in_dim
  Matrix grad_W_self;
  Matrix grad_W_neigh;
  Activation activation = Activation::leaky_relu;
};

struct SageCache {
  Matrix input;
  Matrix neigh_mean;  // mean over N(v) \ {v}; zero rows for isolated nodes
  Matrix preact;
};

std::pair<Matrix, SageCache> sage_layer_forward(const SageLayerParams& layer,
                                                const Graph& g, const Matrix& h,
                                                double slope);
Matrix sage_layer_backward(SageLayerParams& layer, const SageCache& cache, const Graph& g,
                           const Matrix& d_out, double slope);

struct GcnModel {
  std::vector<GcnLayerParams> layers;
  LinkScorer scorer;
  double leaky_slope = kDefaultLeakySlope;
};

struct SageModel {
  std::vector<SageLayerParams> layers;
  LinkScorer scorer;
  double leaky_slope = kDefaultLeakySlope;
};

struct GnnArch {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 16;
  std::size_t output_dim = 16;
  std::size_t num_layers = 2;
  ScorerKind scorer = ScorerKind::dot;
  double leaky_slope = kDefaultLeakySlope;
};

GcnModel init_gcn_model(const GnnArch& arch, std::uint64_t seed);
SageModel init_sage_model(const GnnArch& arch, std::uint64_t seed);

std::pair<Matrix, std::vector<GcnCache>> gcn_encoder_forward(const GcnModel& model,
                                                             const Graph& g,
                                                             const Matrix& x);
Matrix gcn_encoder_backward(GcnModel& model, const std::vector<GcnCache>& caches,
                            const Graph& g, const Matrix& d_out);
std::pair<Matrix, std::vector<SageCache>> sage_encoder_forward(const SageModel& model,
                                                               const Graph& g,
                                                               const Matrix& x);
Matrix sage_encoder_backward(SageModel& model, const std::vector<SageCache>& caches,
                             const Graph& g, const Matrix& d_out);

void zero_grads(GcnModel& model);
void zero_grads(SageModel& model);

// Column statistics fitted on the training rows and applied unchanged
// elsewhere; near-constant columns map to zero.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> inv_sd;
  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

struct SvmCheckpoint {
  std::vector<double> w;
  double b = 0.0;
};

struct SvmTrainResult {
  std::vector<double> w;
  double b = 0.0;
  // Best-so-far snapshot at the end of each epoch; the recorded objective
  // sequence is non-increasing by construction.
  std::vector<SvmCheckpoint> checkpoints;
  std::vector<double> objective_history;
};

// Pegasos-style stochastic subgradient descent on
// lambda/2 ||w||^2 + mean hinge loss. Expects standardized features and both
// classes present. Returns the best epoch-end iterate by training objective.
SvmTrainResult svm_train(const Matrix& features, std::span<const int> labels,
                         double lambda, std::size_t epochs, std::uint64_t seed);

double svm_objective(std::span<const double> w, double b, const Matrix& features,
                     std::span<const int> labels, double lambda);

double svm_decision(std::span<const double> w, double b, std::span<const double> x);

}  // namespace crimegat
