#include "crimegat/gat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crimegat/errors.hpp"

namespace crimegat {

const char* to_string(Activation a) {
  return a == Activation::leaky_relu ? "leaky_relu" : "identity";
}

const char* to_string(HeadCombine c) {
  return c == HeadCombine::concat ? "concat" : "average";
}

Activation parse_activation(const std::string& name) {
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + name + "'");
}

HeadCombine parse_head_combine(const std::string& name) {
  if (name == "concat") return HeadCombine::concat;
  if (name == "average") return HeadCombine::average;
  throw ConfigError("unknown head combine mode '" + name + "'");
}

namespace {

void require_self_loops(const Graph& g) {
  if (!g.has_self_loops()) {
    throw ContractError("gat: graph must have self-loops before attention layers run");
  }
}

Matrix apply_activation(const Matrix& z, Activation act, double slope) {
  return act == Activation::leaky_relu ? leaky_relu(z, slope) : z;
}

// d(act(z))/dz evaluated elementwise at the cached pre-activation.
Matrix activation_grad_factors(const Matrix& z, Activation act, double slope) {
  if (act == Activation::identity) return Matrix(z.rows(), z.cols(), 1.0);
  return leaky_relu_grad(z, slope);
}

std::vector<std::size_t> destination_ids(const Graph& g) {
  std::vector<std::size_t> ids;
  ids.reserve(g.csr_targets().size());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const auto nb = g.neighbors(v);
    ids.insert(ids.end(), nb.size(), v);
  }
  return ids;
}

struct HeadForward {
  Matrix projected;
  std::vector<double> raw_logits;
  std::vector<double> alpha;
  Matrix preact;
};

HeadForward head_forward(const GatLayerParams& head, const Graph& g, const Matrix& h,
                         double slope) {
  if (h.cols() != head.W.cols()) {
    throw ContractError("gat: input dim " + std::to_string(h.cols()) +
                        " does not match W with " + std::to_string(head.W.cols()) +
                        " columns");
  }
  if (h.rows() != g.num_nodes()) {
    throw ContractError("gat: embedding rows do not match node count");
  }
  const std::size_t d = head.W.rows();
  if (head.a.size() != 2 * d) {
    throw ContractError("gat: attention vector length " + std::to_string(head.a.size()) +
                        " is not twice the output dim " + std::to_string(d));
  }

  HeadForward f;
  f.projected = matmul(h, transpose(head.W));
  const std::span<const double> a_dst(head.a.data(), d);
  const std::span<const double> a_src(head.a.data() + d, d);
  std::vector<double> s_dst(g.num_nodes()), s_src(g.num_nodes());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    s_dst[v] = dot(a_dst, f.projected.row(v));
    s_src[v] = dot(a_src, f.projected.row(v));
  }

  f.raw_logits.reserve(g.csr_targets().size());
  std::vector<double> clamped;
  clamped.reserve(g.csr_targets().size());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    for (std::size_t u : g.neighbors(v)) {
      const double raw = s_dst[v] + s_src[u];
      f.raw_logits.push_back(raw);
      const double e = raw >= 0.0 ? raw : slope * raw;
      clamped.push_back(std::clamp(e, -kLogitClamp, kLogitClamp));
    }
  }
  f.alpha = segment_softmax(clamped, destination_ids(g));

  f.preact = Matrix(g.num_nodes(), d);
  std::size_t k = 0;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    auto zrow = f.preact.row(v);
    for (std::size_t u : g.neighbors(v)) {
      const double alpha = f.alpha[k++];
      const auto prow = f.projected.row(u);
      for (std::size_t j = 0; j < d; ++j) zrow[j] += alpha * prow[j];
    }
  }
  return f;
}

}  // namespace

std::vector<double> attention_logits(const GatLayerParams& head, const Graph& g,
                                     const Matrix& h, double slope) {
  require_self_loops(g);
  HeadForward f = head_forward(head, g, h, slope);
  std::vector<double> out;
  out.reserve(f.raw_logits.size());
  for (double raw : f.raw_logits) out.push_back(raw >= 0.0 ? raw : slope * raw);
  return out;
}

std::vector<double> attention_coefficients(std::span<const double> logits,
                                           const Graph& g) {
  if (logits.size() != g.csr_targets().size()) {
    throw ContractError("attention_coefficients: logit count does not match CSR entries");
  }
  std::vector<double> clamped(logits.begin(), logits.end());
  for (double& e : clamped) e = std::clamp(e, -kLogitClamp, kLogitClamp);
  return segment_softmax(clamped, destination_ids(g));
}

std::pair<NodeEmbeddings, LayerCache> gat_layer_forward(const GatLayer& layer,
                                                        const Graph& g, const Matrix& h,
                                                        double slope) {
  require_self_loops(g);
  if (layer.heads.empty()) throw ContractError("gat: layer has no heads");

  LayerCache cache;
  cache.input = h;
  const std::size_t d = layer.head_dim();
  const std::size_t n = g.num_nodes();

  if (layer.combine == HeadCombine::concat) {
    cache.combined_preact = Matrix(n, layer.heads.size() * d);
    for (std::size_t k = 0; k < layer.heads.size(); ++k) {
      HeadForward f = head_forward(layer.heads[k], g, h, slope);
      for (std::size_t v = 0; v < n; ++v) {
        const auto zrow = f.preact.row(v);
        auto crow = cache.combined_preact.row(v);
        for (std::size_t j = 0; j < d; ++j) crow[k * d + j] = zrow[j];
      }
      cache.heads.push_back(
          HeadCache{std::move(f.projected), std::move(f.raw_logits), std::move(f.alpha)});
    }
  } else {
    cache.combined_preact = Matrix(n, d);
    const double inv_heads = 1.0 / static_cast<double>(layer.heads.size());
    for (const GatLayerParams& head : layer.heads) {
      HeadForward f = head_forward(head, g, h, slope);
      for (std::size_t i = 0; i < cache.combined_preact.data().size(); ++i) {
        cache.combined_preact.data()[i] += inv_heads * f.preact.data()[i];
      }
      cache.heads.push_back(
          HeadCache{std::move(f.projected), std::move(f.raw_logits), std::move(f.alpha)});
    }
  }
  Matrix out = apply_activation(cache.combined_preact, layer.activation, slope);
  return {std::move(out), std::move(cache)};
}

Matrix gat_layer_backward(GatLayer& layer, const LayerCache& cache, const Graph& g,
                          const Matrix& d_out, double slope) {
  require_self_loops(g);
  const std::size_t n = g.num_nodes();
  const std::size_t d = layer.head_dim();
  const std::size_t entries = g.csr_targets().size();
  if (cache.heads.size() != layer.heads.size() || cache.input.rows() != n ||
      (!cache.heads.empty() && cache.heads.front().alpha.size() != entries)) {
    throw ContractError("gat_layer_backward: cache does not match layer/graph");
  }
  if (d_out.rows() != n || d_out.cols() != layer.out_dim()) {
    throw ContractError("gat_layer_backward: upstream gradient shape mismatch");
  }

  const Matrix act_grad = activation_grad_factors(cache.combined_preact, layer.activation, slope);
  Matrix d_comb = d_out;
  for (std::size_t i = 0; i < d_comb.data().size(); ++i) {
    d_comb.data()[i] *= act_grad.data()[i];
  }

  Matrix d_input(cache.input.rows(), cache.input.cols());
  const double inv_heads = 1.0 / static_cast<double>(layer.heads.size());

  for (std::size_t kh = 0; kh < layer.heads.size(); ++kh) {
    GatLayerParams& head = layer.heads[kh];
    const HeadCache& hc = cache.heads[kh];

    // Per-head slice of the pre-activation gradient.
    Matrix dz(n, d);
    if (layer.combine == HeadCombine::concat) {
      for (std::size_t v = 0; v < n; ++v) {
        const auto crow = d_comb.row(v);
        auto zrow = dz.row(v);
        for (std::size_t j = 0; j < d; ++j) zrow[j] = crow[kh * d + j];
      }
    } else {
      for (std::size_t i = 0; i < dz.data().size(); ++i) {
        dz.data()[i] = d_comb.data()[i] * inv_heads;
      }
    }

    // Aggregation Z[v] = sum_u alpha_vu P[u] splits into the alpha path and
    // the projected-features path.
    std::vector<double> d_alpha(entries, 0.0);
    Matrix d_proj(n, d);
    {
      std::size_t k = 0;
      for (std::size_t v = 0; v < n; ++v) {
        const auto zrow = dz.row(v);
        for (std::size_t u : g.neighbors(v)) {
          const auto prow = hc.projected.row(u);
          auto drow = d_proj.row(u);
          double s = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            s += zrow[j] * prow[j];
            drow[j] += hc.alpha[k] * zrow[j];
          }
          d_alpha[k] = s;
          ++k;
        }
      }
    }

    // Softmax Jacobian within each destination segment, then the clamp and
    // LeakyReLU local derivatives back to the raw logits.
    std::vector<double> d_raw(entries, 0.0);
    {
      std::size_t k = 0;
      for (std::size_t v = 0; v < n; ++v) {
        const std::size_t len = g.neighbors(v).size();
        double weighted = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          weighted += hc.alpha[k + i] * d_alpha[k + i];
        }
        for (std::size_t i = 0; i < len; ++i) {
          const double raw = hc.raw_logits[k + i];
          const double post = raw >= 0.0 ? raw : slope * raw;
          double grad = hc.alpha[k + i] * (d_alpha[k + i] - weighted);
          if (std::abs(post) >= kLogitClamp) grad = 0.0;
          grad *= raw > 0.0 ? 1.0 : slope;
          d_raw[k + i] = grad;
        }
        k += len;
      }
    }

    // raw = a_dst . P[v] + a_src . P[u].
    const std::span<const double> a_dst(head.a.data(), d);
    const std::span<const double> a_src(head.a.data() + d, d);
    {
      std::size_t k = 0;
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t u : g.neighbors(v)) {
          const double gr = d_raw[k++];
          if (gr == 0.0) continue;
          const auto pv = hc.projected.row(v);
          const auto pu = hc.projected.row(u);
          auto dv = d_proj.row(v);
          auto du = d_proj.row(u);
          for (std::size_t j = 0; j < d; ++j) {
            head.grad_a[j] += gr * pv[j];
            head.grad_a[d + j] += gr * pu[j];
            dv[j] += gr * a_dst[j];
            du[j] += gr * a_src[j];
          }
        }
      }
    }

    // P = H W^T: dW += dP^T H, dH += dP W.
    add_in_place(head.grad_W, matmul(transpose(d_proj), cache.input));
    add_in_place(d_input, matmul(d_proj, head.W));
  }
  return d_input;
}

std::pair<NodeEmbeddings, std::vector<LayerCache>> encoder_forward(const GatModel& model,
                                                                   const Graph& g,
                                                                   const Matrix& x) {
  if (model.layers.empty()) throw ContractError("encoder_forward: model has no layers");
  std::vector<LayerCache> caches;
  caches.reserve(model.layers.size());
  Matrix h = x;
  for (const GatLayer& layer : model.layers) {
    auto [out, cache] = gat_layer_forward(layer, g, h, model.leaky_slope);
    caches.push_back(std::move(cache));
    h = std::move(out);
  }
  return {std::move(h), std::move(caches)};
}

Matrix encoder_backward(GatModel& model, const std::vector<LayerCache>& caches,
                        const Graph& g, const Matrix& d_out) {
  if (caches.size() != model.layers.size()) {
    throw ContractError("encoder_backward: cache count does not match layer count");
  }
  Matrix grad = d_out;
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    grad = gat_layer_backward(model.layers[i], caches[i], g, grad, model.leaky_slope);
  }
  return grad;
}

GatModel init_gat_model(const GatArch& arch, std::uint64_t seed) {
  if (arch.num_layers == 0) throw ContractError("init_gat_model: need at least one layer");
  if (arch.in_dim == 0 || arch.hidden_dim == 0 || arch.output_dim == 0 || arch.heads == 0) {
    throw ContractError("init_gat_model: dimensions and head count must be positive");
  }
  Rng rng(derive_seed(seed, streams::kParamInit));
  GatModel model;
  model.leaky_slope = arch.leaky_slope;

  std::size_t in_dim = arch.in_dim;
  for (std::size_t li = 0; li < arch.num_layers; ++li) {
    const bool last = li + 1 == arch.num_layers;
    GatLayer layer;
    layer.activation = last ? Activation::identity : Activation::leaky_relu;
    layer.combine = last ? HeadCombine::average : HeadCombine::concat;
    const std::size_t head_dim = last ? arch.output_dim : arch.hidden_dim;
    const double w_bound =
        std::sqrt(6.0 / static_cast<double>(in_dim + head_dim));
    const double a_bound = std::sqrt(6.0 / (2.0 * static_cast<double>(head_dim) + 1.0));
    for (std::size_t h = 0; h < arch.heads; ++h) {
      GatLayerParams head;
      head.W = Matrix(head_dim, in_dim);
      for (double& w : head.W.data()) w = rng.uniform(-w_bound, w_bound);
      head.a.resize(2 * head_dim);
      for (double& a : head.a) a = rng.uniform(-a_bound, a_bound);
      head.grad_W = Matrix(head_dim, in_dim);
      head.grad_a.assign(2 * head_dim, 0.0);
      layer.heads.push_back(std::move(head));
    }
    model.layers.push_back(std::move(layer));
    in_dim = model.layers.back().out_dim();
  }

  if (arch.scorer == ScorerKind::dot) {
    model.scorer = make_dot_scorer();
  } else {
    model.scorer = make_hadamard_scorer(model.layers.back().out_dim(), rng);
  }
  return model;
}

void zero_grads(GatModel& model) {
  for (GatLayer& layer : model.layers) {
    for (GatLayerParams& head : layer.heads) {
      head.grad_W.fill(0.0);
      std::fill(head.grad_a.begin(), head.grad_a.end(), 0.0);
    }
  }
  std::fill(model.scorer.grad_w.begin(), model.scorer.grad_w.end(), 0.0);
  model.scorer.grad_b = 0.0;
}

}  // namespace crimegat
