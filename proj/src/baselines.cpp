#include "crimegat/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crimegat/errors.hpp"
#include "crimegat/rng.hpp"

namespace crimegat {

namespace {

void check_pair(const Graph& g, std::size_t u, std::size_t v) {
  if (u >= g.num_nodes() || v >= g.num_nodes()) {
    throw ContractError("pair op: node id out of range");
  }
  if (u == v) throw ContractError("pair op: u and v must differ");
}

// Neighbor slice with any self-loop entry removed.
std::vector<std::size_t> proper_neighbors(const Graph& g, std::size_t v) {
  std::vector<std::size_t> out;
  const auto nb = g.neighbors(v);
  out.reserve(nb.size());
  for (std::size_t u : nb) {
    if (u != v) out.push_back(u);
  }
  return out;
}

Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-bound, bound);
  return m;
}

Matrix apply_activation(const Matrix& z, Activation act, double slope) {
  return act == Activation::leaky_relu ? leaky_relu(z, slope) : z;
}

Matrix activation_grad_factors(const Matrix& z, Activation act, double slope) {
  if (act == Activation::identity) return Matrix(z.rows(), z.cols(), 1.0);
  return leaky_relu_grad(z, slope);
}

}  // namespace

PairFeatures pair_features(const Graph& g, std::size_t u, std::size_t v) {
  check_pair(g, u, v);
  const auto nu = proper_neighbors(g, u);
  const auto nv = proper_neighbors(g, v);
  std::vector<std::size_t> common;
  std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(),
                        std::back_inserter(common));
  std::vector<std::size_t> unioned;
  std::set_union(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(unioned));

  PairFeatures f;
  f.common_neighbors = common.size();
  f.jaccard = unioned.empty()
                  ? 0.0
                  : static_cast<double>(common.size()) / static_cast<double>(unioned.size());
  f.pref_attachment = static_cast<double>(nu.size()) * static_cast<double>(nv.size());
  f.degree_min = std::min(nu.size(), nv.size());
  f.degree_max = std::max(nu.size(), nv.size());
  return f;
}

double pa_score(const Graph& g, std::size_t u, std::size_t v) {
  check_pair(g, u, v);
  return static_cast<double>(g.degree(u)) * static_cast<double>(g.degree(v));
}

CsrMatrix normalize_adjacency(const Graph& g) {
  if (!g.has_self_loops()) {
    throw ContractError("normalize_adjacency: graph must already contain self-loops");
  }
  CsrMatrix m;
  m.n = g.num_nodes();
  m.offsets = g.csr_offsets();
  m.targets = g.csr_targets();
  m.values.resize(m.targets.size());
  std::vector<double> inv_sqrt_deg(m.n);
  for (std::size_t v = 0; v < m.n; ++v) {
    inv_sqrt_deg[v] = 1.0 / std::sqrt(static_cast<double>(g.neighbors(v).size()));
  }
  for (std::size_t v = 0; v < m.n; ++v) {
    for (std::size_t k = m.offsets[v]; k < m.offsets[v + 1]; ++k) {
      m.values[k] = inv_sqrt_deg[v] * inv_sqrt_deg[m.targets[k]];
    }
  }
  return m;
}

Matrix csr_multiply(const CsrMatrix& m, const Matrix& h) {
  if (h.rows() != m.n) throw ContractError("csr_multiply: row count mismatch");
  Matrix out(m.n, h.cols());
  for (std::size_t v = 0; v < m.n; ++v) {
    auto orow = out.row(v);
    for (std::size_t k = m.offsets[v]; k < m.offsets[v + 1]; ++k) {
      const double w = m.values[k];
      const auto hrow = h.row(m.targets[k]);
      for (std::size_t j = 0; j < h.cols(); ++j) orow[j] += w * hrow[j];
    }
  }
  return out;
}

std::pair<Matrix, GcnCache> gcn_layer_forward(const GcnLayerParams& layer,
                                              const CsrMatrix& a_hat, const Matrix& h,
                                              double slope) {
  if (h.cols() != layer.W.cols()) {
    throw ContractError("gcn: input dim " + std::to_string(h.cols()) +
                        " does not match W with " + std::to_string(layer.W.cols()) +
                        " columns");
  }
  GcnCache cache;
  cache.input = h;
  cache.aggregated = csr_multiply(a_hat, h);
  cache.preact = matmul(cache.aggregated, transpose(layer.W));
  Matrix out = apply_activation(cache.preact, layer.activation, slope);
  return {std::move(out), std::move(cache)};
}

Matrix gcn_layer_backward(GcnLayerParams& layer, const GcnCache& cache,
                          const CsrMatrix& a_hat, const Matrix& d_out, double slope) {
  if (!d_out.same_shape(cache.preact)) {
    throw ContractError("gcn_layer_backward: gradient shape mismatch");
  }
  Matrix dz = d_out;
  const Matrix factors = activation_grad_factors(cache.preact, layer.activation, slope);
  for (std::size_t i = 0; i < dz.data().size(); ++i) dz.data()[i] *= factors.data()[i];

  add_in_place(layer.grad_W, matmul(transpose(dz), cache.aggregated));
  const Matrix d_agg = matmul(dz, layer.W);
  // A_hat is symmetric, so the adjoint is another multiplication by A_hat.
  return csr_multiply(a_hat, d_agg);
}

std::pair<Matrix, SageCache> sage_layer_forward(const SageLayerParams& layer,
                                                const Graph& g, const Matrix& h,
                                                double slope) {
  if (h.cols() != layer.W_self.cols()) {
    throw ContractError("sage: input dim does not match W_self columns");
  }
  const std::size_t n = g.num_nodes();
  SageCache cache;
  cache.input = h;
  cache.neigh_mean = Matrix(n, h.cols());
  for (std::size_t v = 0; v < n; ++v) {
    auto mrow = cache.neigh_mean.row(v);
    std::size_t count = 0;
    for (std::size_t u : g.neighbors(v)) {
      if (u == v) continue;
      const auto hrow = h.row(u);
      for (std::size_t j = 0; j < h.cols(); ++j) mrow[j] += hrow[j];
      ++count;
    }
    if (count > 0) {
      const double inv = 1.0 / static_cast<double>(count);
      for (std::size_t j = 0; j < h.cols(); ++j) mrow[j] *= inv;
    }
  }
  cache.preact = matmul(h, transpose(layer.W_self));
  add_in_place(cache.preact, matmul(cache.neigh_mean, transpose(layer.W_neigh)));
  Matrix out = apply_activation(cache.preact, layer.activation, slope);
  return {std::move(out), std::move(cache)};
}

Matrix sage_layer_backward(SageLayerParams& layer, const SageCache& cache, const Graph& g,
                           const Matrix& d_out, double slope) {
  if (!d_out.same_shape(cache.preact)) {
    throw ContractError("sage_layer_backward: gradient shape mismatch");
  }
  Matrix dz = d_out;
  const Matrix factors = activation_grad_factors(cache.preact, layer.activation, slope);
  for (std::size_t i = 0; i < dz.data().size(); ++i) dz.data()[i] *= factors.data()[i];

  add_in_place(layer.grad_W_self, matmul(transpose(dz), cache.input));
  add_in_place(layer.grad_W_neigh, matmul(transpose(dz), cache.neigh_mean));

  Matrix d_input = matmul(dz, layer.W_self);
  const Matrix d_mean = matmul(dz, layer.W_neigh);
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    std::size_t count = 0;
    for (std::size_t u : g.neighbors(v)) {
      if (u != v) ++count;
    }
    if (count == 0) continue;
    const double inv = 1.0 / static_cast<double>(count);
    const auto mrow = d_mean.row(v);
    for (std::size_t u : g.neighbors(v)) {
      if (u == v) continue;
      auto drow = d_input.row(u);
      for (std::size_t j = 0; j < d_input.cols(); ++j) drow[j] += inv * mrow[j];
    }
  }
  return d_input;
}

namespace {

template <typename Model>
void init_scorer(Model& model, ScorerKind kind, std::size_t out_dim, Rng& rng) {
  model.scorer = kind == ScorerKind::dot ? make_dot_scorer()
                                         : make_hadamard_scorer(out_dim, rng);
}

}  // namespace

GcnModel init_gcn_model(const GnnArch& arch, std::uint64_t seed) {
  if (arch.num_layers == 0 || arch.in_dim == 0) {
    throw ContractError("init_gcn_model: bad architecture");
  }
  Rng rng(derive_seed(seed, streams::kParamInit));
  GcnModel model;
  model.leaky_slope = arch.leaky_slope;
  std::size_t in_dim = arch.in_dim;
  for (std::size_t li = 0; li < arch.num_layers; ++li) {
    const bool last = li + 1 == arch.num_layers;
    const std::size_t out_dim = last ? arch.output_dim : arch.hidden_dim;
    GcnLayerParams layer;
    layer.activation = last ? Activation::identity : Activation::leaky_relu;
    layer.W = glorot(out_dim, in_dim, rng);
    layer.grad_W = Matrix(out_dim, in_dim);
    model.layers.push_back(std::move(layer));
    in_dim = out_dim;
  }
  init_scorer(model, arch.scorer, in_dim, rng);
  return model;
}

SageModel init_sage_model(const GnnArch& arch, std::uint64_t seed) {
  if (arch.num_layers == 0 || arch.in_dim == 0) {
    throw ContractError("init_sage_model: bad architecture");
  }
  Rng rng(derive_seed(seed, streams::kParamInit));
  SageModel model;
  model.leaky_slope = arch.leaky_slope;
  std::size_t in_dim = arch.in_dim;
  for (std::size_t li = 0; li < arch.num_layers; ++li) {
    const bool last = li + 1 == arch.num_layers;
    const std::size_t out_dim = last ? arch.output_dim : arch.hidden_dim;
    SageLayerParams layer;
    layer.activation = last ? Activation::identity : Activation::leaky_relu;
    layer.W_self = glorot(out_dim, in_dim, rng);
    layer.W_neigh = glorot(out_dim, in_dim, rng);
    layer.grad_W_self = Matrix(out_dim, in_dim);
    layer.grad_W_neigh = Matrix(out_dim, in_dim);
    model.layers.push_back(std::move(layer));
    in_dim = out_dim;
  }
  init_scorer(model, arch.scorer, in_dim, rng);
  return model;
}

std::pair<Matrix, std::vector<GcnCache>> gcn_encoder_forward(const GcnModel& model,
                                                             const Graph& g,
                                                             const Matrix& x) {
  if (model.layers.empty()) throw ContractError("gcn_encoder_forward: no layers");
  const CsrMatrix a_hat = normalize_adjacency(g);
  std::vector<GcnCache> caches;
  Matrix h = x;
  for (const GcnLayerParams& layer : model.layers) {
    auto [out, cache] = gcn_layer_forward(layer, a_hat, h, model.leaky_slope);
    caches.push_back(std::move(cache));
    h = std::move(out);
  }
  return {std::move(h), std::move(caches)};
}

Matrix gcn_encoder_backward(GcnModel& model, const std::vector<GcnCache>& caches,
                            const Graph& g, const Matrix& d_out) {
  if (caches.size() != model.layers.size()) {
    throw ContractError("gcn_encoder_backward: cache count mismatch");
  }
  const CsrMatrix a_hat = normalize_adjacency(g);
  Matrix grad = d_out;
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    grad = gcn_layer_backward(model.layers[i], caches[i], a_hat, grad, model.leaky_slope);
  }
  return grad;
}

std::pair<Matrix, std::vector<SageCache>> sage_encoder_forward(const SageModel& model,
                                                               const Graph& g,
                                                               const Matrix& x) {
  if (model.layers.empty()) throw ContractError("sage_encoder_forward: no layers");
  std::vector<SageCache> caches;
  Matrix h = x;
  for (const SageLayerParams& layer : model.layers) {
    auto [out, cache] = sage_layer_forward(layer, g, h, model.leaky_slope);
    caches.push_back(std::move(cache));
    h = std::move(out);
  }
  return {std::move(h), std::move(caches)};
}

Matrix sage_encoder_backward(SageModel& model, const std::vector<SageCache>& caches,
                             const Graph& g, const Matrix& d_out) {
  if (caches.size() != model.layers.size()) {
    throw ContractError("sage_encoder_backward: cache count mismatch");
  }
  Matrix grad = d_out;
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    grad = sage_layer_backward(model.layers[i], caches[i], g, grad, model.leaky_slope);
  }
  return grad;
}

void zero_grads(GcnModel& model) {
  for (GcnLayerParams& layer : model.layers) layer.grad_W.fill(0.0);
  std::fill(model.scorer.grad_w.begin(), model.scorer.grad_w.end(), 0.0);
  model.scorer.grad_b = 0.0;
}

void zero_grads(SageModel& model) {
  for (SageLayerParams& layer : model.layers) {
    layer.grad_W_self.fill(0.0);
    layer.grad_W_neigh.fill(0.0);
  }
  std::fill(model.scorer.grad_w.begin(), model.scorer.grad_w.end(), 0.0);
  model.scorer.grad_b = 0.0;
}

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  s.mean.assign(x.cols(), 0.0);
  s.inv_sd.assign(x.cols(), 0.0);
  if (x.rows() == 0) return s;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, j);
    mean /= static_cast<double>(x.rows());
    double var = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double d = x(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(x.rows());
    s.mean[j] = mean;
    s.inv_sd[j] = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw ContractError("Standardizer: column count mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out(i, j) = (x(i, j) - mean[j]) * inv_sd[j];
    }
  }
  return out;
}

double svm_decision(std::span<const double> w, double b, std::span<const double> x) {
  return dot(w, x) + b;
}

double svm_objective(std::span<const double> w, double b, const Matrix& features,
                     std::span<const int> labels, double lambda) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const double y = labels[i] == 1 ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * svm_decision(w, b, features.row(i)));
  }
  hinge /= static_cast<double>(features.rows());
  return 0.5 * lambda * dot(w, w) + hinge;
}

SvmTrainResult svm_train(const Matrix& features, std::span<const int> labels,
                         double lambda, std::size_t epochs, std::uint64_t seed) {
  if (features.rows() == 0 || features.rows() != labels.size()) {
    throw ContractError("svm_train: features and labels must be non-empty and aligned");
  }
  if (!(lambda > 0.0) || epochs == 0) {
    throw ContractError("svm_train: lambda must be positive and epochs at least 1");
  }
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!has_pos || !has_neg) {
    throw ContractError("svm_train: need at least one example of each class");
  }

  const std::size_t dim = features.cols();
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  Rng rng(derive_seed(seed, streams::kSvm));
  std::vector<std::size_t> order(features.rows());
  std::iota(order.begin(), order.end(), 0);

  SvmTrainResult result;
  result.w = w;
  result.b = b;
  double best_objective = svm_objective(w, b, features, labels, lambda);

  std::size_t t = 1;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double y = labels[i] == 1 ? 1.0 : -1.0;
      const auto x = features.row(i);
      const double margin = y * svm_decision(w, b, x);
      const double shrink = 1.0 - eta * lambda;
      for (double& wj : w) wj *= shrink;
      if (margin < 1.0) {
        for (std::size_t j = 0; j < dim; ++j) w[j] += eta * y * x[j];
        b += eta * y;  // bias is not regularized
      }
      ++t;
    }
    // Keep the best iterate by full-training objective, so the recorded
    // checkpoint sequence never regresses even though the stochastic steps do.
    const double objective = svm_objective(w, b, features, labels, lambda);
    if (objective < best_objective) {
      best_objective = objective;
      result.w = w;
      result.b = b;
    }
    result.checkpoints.push_back(SvmCheckpoint{result.w, result.b});
    result.objective_history.push_back(best_objective);
  }
  return result;
}

}  // namespace crimegat
