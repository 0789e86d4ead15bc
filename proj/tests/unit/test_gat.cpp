#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "crimegat/errors.hpp"
#include "crimegat/gat.hpp"
#include "crimegat/model_io.hpp"
#include "crimegat/rng.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace crimegat;
using crimegat::testing::central_diff;
using crimegat::testing::random_graph;
using crimegat::testing::random_matrix;
using crimegat::testing::rel_err;

namespace {

GatLayerParams random_head(std::size_t out_dim, std::size_t in_dim, Rng& rng,
                           double scale = 0.5) {
  GatLayerParams head;
  head.W = random_matrix(out_dim, in_dim, rng);
  for (double& v : head.W.data()) v *= scale;
  head.a.resize(2 * out_dim);
  for (double& v : head.a) v = rng.normal() * scale;
  head.grad_W = Matrix(out_dim, in_dim);
  head.grad_a.assign(2 * out_dim, 0.0);
  return head;
}

GatLayer random_layer(std::size_t out_dim, std::size_t in_dim, std::size_t heads,
                      Activation act, HeadCombine combine, Rng& rng) {
  GatLayer layer;
  layer.activation = act;
  layer.combine = combine;
  for (std::size_t h = 0; h < heads; ++h) {
    layer.heads.push_back(random_head(out_dim, in_dim, rng));
  }
  return layer;
}

// Oracle that materializes the concatenated vector [W h_v || W h_u] per edge.
std::vector<double> naive_attention_logits(const GatLayerParams& head, const Graph& g,
                                           const Matrix& h, double slope) {
  const Matrix p = matmul(h, transpose(head.W));
  const std::size_t d = head.W.rows();
  std::vector<double> out;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    for (std::size_t u : g.neighbors(v)) {
      std::vector<double> concat(2 * d);
      for (std::size_t j = 0; j < d; ++j) {
        concat[j] = p(v, j);
        concat[d + j] = p(u, j);
      }
      double raw = 0.0;
      for (std::size_t j = 0; j < 2 * d; ++j) raw += head.a[j] * concat[j];
      out.push_back(raw >= 0.0 ? raw : slope * raw);
    }
  }
  return out;
}

// Dense oracle: explicit n x n attention matrix, then a dense product.
Matrix dense_layer_forward(const GatLayer& layer, const Graph& g, const Matrix& h,
                           double slope) {
  const std::size_t n = g.num_nodes();
  const std::size_t d = layer.head_dim();
  Matrix combined(n, layer.out_dim());
  const double inv_heads = 1.0 / static_cast<double>(layer.heads.size());
  for (std::size_t kh = 0; kh < layer.heads.size(); ++kh) {
    const GatLayerParams& head = layer.heads[kh];
    const Matrix p = matmul(h, transpose(head.W));
    const auto logits = naive_attention_logits(head, g, h, slope);
    Matrix attn(n, n);
    std::vector<std::vector<bool>> present(n, std::vector<bool>(n, false));
    std::size_t k = 0;
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t u : g.neighbors(v)) {
        attn(v, u) = logits[k++];
        present[v][u] = true;
      }
    }
    for (std::size_t v = 0; v < n; ++v) {
      double mx = -1e300;
      for (std::size_t u = 0; u < n; ++u) {
        if (present[v][u]) mx = std::max(mx, attn(v, u));
      }
      double sum = 0.0;
      for (std::size_t u = 0; u < n; ++u) {
        if (present[v][u]) {
          attn(v, u) = std::exp(attn(v, u) - mx);
          sum += attn(v, u);
        } else {
          attn(v, u) = 0.0;
        }
      }
      for (std::size_t u = 0; u < n; ++u) attn(v, u) /= sum;
    }
    const Matrix z = matmul(attn, p);
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t j = 0; j < d; ++j) {
        if (layer.combine == HeadCombine::concat) {
          combined(v, kh * d + j) = z(v, j);
        } else {
          combined(v, j) += inv_heads * z(v, j);
        }
      }
    }
  }
  return layer.activation == Activation::leaky_relu ? leaky_relu(combined, slope)
                                                    : combined;
}

double scalarize(const Matrix& out, const Matrix& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    s += out.data()[i] * weights.data()[i];
  }
  return s;
}

}  // namespace

TEST_CASE("attention_logits: zero vector, hand case, naive oracle") {
  Rng rng(101);
  {
    const Graph g = add_self_loops(random_graph(5, 0.5, 3, rng));
    GatLayerParams head = random_head(4, 3, rng);
    std::fill(head.a.begin(), head.a.end(), 0.0);
    for (double e : attention_logits(head, g, g.features(), 0.2)) CHECK(e == 0.0);
  }
  {
    // d_in = d_out = 1, W = [[1]], a = [1, 1], h_v = 2, h_u = 3.
    std::vector<Edge> edges = {Edge{0, 1}};
    Matrix features = Matrix::from_rows({{2.0}, {3.0}});
    const Graph g = add_self_loops(Graph::from_edges(2, edges, features));
    GatLayerParams head;
    head.W = Matrix::from_rows({{1.0}});
    head.a = {1.0, 1.0};
    head.grad_W = Matrix(1, 1);
    head.grad_a.assign(2, 0.0);
    const auto logits = attention_logits(head, g, g.features(), 0.2);
    // CSR order: (0<-0), (0<-1), (1<-0), (1<-1).
    CHECK(logits.size() == 4);
    CHECK(logits[1] == doctest::Approx(5.0).epsilon(1e-15));
  }
  {
    const Graph g = add_self_loops(random_graph(6, 0.5, 4, rng));
    const GatLayerParams head = random_head(3, 4, rng);
    const auto fast = attention_logits(head, g, g.features(), 0.2);
    const auto naive = naive_attention_logits(head, g, g.features(), 0.2);
    REQUIRE(fast.size() == naive.size());
    for (std::size_t i = 0; i < fast.size(); ++i) {
      CHECK(std::abs(fast[i] - naive[i]) < 1e-12);
    }
  }
}

TEST_CASE("attention_coefficients normalize per destination") {
  Rng rng(103);
  {
    // Isolated node: only the self-loop, so alpha = 1.
    const Graph g = add_self_loops(Graph::from_edges(1, {}));
    const std::vector<double> logits = {3.7};
    const auto alpha = attention_coefficients(logits, g);
    CHECK(alpha.size() == 1);
    CHECK(alpha[0] == 1.0);
  }
  {
    std::vector<Edge> edges = {Edge{0, 1}, Edge{0, 2}, Edge{0, 3}};
    const Graph g = add_self_loops(Graph::from_edges(4, edges));
    std::vector<double> logits(g.csr_targets().size(), 1.3);
    const auto alpha = attention_coefficients(logits, g);
    // Node 0 has 4 entries (self + 3): each 1/4.
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(alpha[k] == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
  {
    const Graph g = add_self_loops(random_graph(9, 0.4, 3, rng));
    const GatLayerParams head = random_head(4, 3, rng);
    const auto logits = attention_logits(head, g, g.features(), 0.2);
    const auto alpha = attention_coefficients(logits, g);
    std::size_t k = 0;
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
      double sum = 0.0;
      for (std::size_t i = 0; i < g.neighbors(v).size(); ++i) sum += alpha[k++];
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("gat_layer_forward: uniform attention reduces to the neighborhood mean") {
  Rng rng(107);
  const Graph g = add_self_loops(random_graph(7, 0.4, 4, rng));
  GatLayer layer;
  layer.activation = Activation::identity;
  layer.combine = HeadCombine::average;
  GatLayerParams head;
  head.W = Matrix::identity(4);
  head.a.assign(8, 0.0);
  head.grad_W = Matrix(4, 4);
  head.grad_a.assign(8, 0.0);
  layer.heads.push_back(std::move(head));

  const auto [out, cache] = gat_layer_forward(layer, g, g.features(), 0.2);
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const auto nb = g.neighbors(v);
    for (std::size_t j = 0; j < 4; ++j) {
      double mean = 0.0;
      for (std::size_t u : nb) mean += g.features()(u, j);
      mean /= static_cast<double>(nb.size());
      CHECK(out(v, j) == doctest::Approx(mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("gat_layer_forward: single node with self-loop gives W h") {
  Rng rng(109);
  const Matrix features = Matrix::from_rows({{1.5, -2.0, 0.5}});
  const Graph g = add_self_loops(Graph::from_edges(1, {}, features));
  GatLayer layer = random_layer(2, 3, 1, Activation::identity, HeadCombine::average, rng);
  const auto [out, cache] = gat_layer_forward(layer, g, g.features(), 0.2);
  const Matrix expected = matmul(features, transpose(layer.heads[0].W));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(out(0, j) == doctest::Approx(expected(0, j)).epsilon(1e-12));
  }
}

TEST_CASE("gat_layer_forward matches the dense-matrix oracle") {
  Rng rng(113);
  const Graph g = add_self_loops(random_graph(8, 0.4, 5, rng));
  for (const auto combine : {HeadCombine::concat, HeadCombine::average}) {
    const GatLayer layer = random_layer(4, 5, 2, Activation::leaky_relu, combine, rng);
    const auto [out, cache] = gat_layer_forward(layer, g, g.features(), 0.2);
    const Matrix expected = dense_layer_forward(layer, g, g.features(), 0.2);
    REQUIRE(out.same_shape(expected));
    for (std::size_t i = 0; i < out.data().size(); ++i) {
      CHECK(std::abs(out.data()[i] - expected.data()[i]) < 1e-10);
    }
  }
}

TEST_CASE("gat_layer_backward: zero upstream and linearity") {
  Rng rng(127);
  const Graph g = add_self_loops(random_graph(6, 0.5, 3, rng));
  GatLayer layer = random_layer(4, 3, 1, Activation::leaky_relu, HeadCombine::concat, rng);
  const auto [out, cache] = gat_layer_forward(layer, g, g.features(), 0.2);

  const Matrix zero(out.rows(), out.cols());
  const Matrix d_in = gat_layer_backward(layer, cache, g, zero, 0.2);
  for (double v : d_in.data()) CHECK(v == 0.0);
  for (double v : layer.heads[0].grad_W.data()) CHECK(v == 0.0);

  const Matrix upstream = random_matrix(out.rows(), out.cols(), rng);
  Matrix upstream_scaled = upstream;
  for (double& v : upstream_scaled.data()) v *= 3.5;

  GatLayer l1 = layer;
  GatLayer l2 = layer;
  const Matrix g1 = gat_layer_backward(l1, cache, g, upstream, 0.2);
  const Matrix g2 = gat_layer_backward(l2, cache, g, upstream_scaled, 0.2);
  for (std::size_t i = 0; i < g1.data().size(); ++i) {
    CHECK(g2.data()[i] == doctest::Approx(3.5 * g1.data()[i]).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < l1.heads[0].grad_a.size(); ++i) {
    CHECK(l2.heads[0].grad_a[i] ==
          doctest::Approx(3.5 * l1.heads[0].grad_a[i]).epsilon(1e-12));
  }
}

TEST_CASE("gat_layer_backward matches central finite differences") {
  Rng rng(131);
  const Graph g = add_self_loops(random_graph(8, 0.45, 5, rng));
  GatLayer layer = random_layer(4, 5, 1, Activation::leaky_relu, HeadCombine::concat, rng);
  Matrix x = g.features();
  const Matrix weights = random_matrix(8, 4, rng);

  const auto loss = [&] {
    const auto [out, cache] = gat_layer_forward(layer, g, x, 0.2);
    return scalarize(out, weights);
  };

  const auto [out, cache] = gat_layer_forward(layer, g, x, 0.2);
  for (GatLayerParams& head : layer.heads) {
    head.grad_W.fill(0.0);
    std::fill(head.grad_a.begin(), head.grad_a.end(), 0.0);
  }
  const Matrix d_input = gat_layer_backward(layer, cache, g, weights, 0.2);

  GatLayerParams& head = layer.heads[0];
  for (std::size_t i = 0; i < head.W.data().size(); ++i) {
    const double fd = central_diff(head.W.data()[i], 1e-5, loss);
    CHECK(rel_err(head.grad_W.data()[i], fd) < 1e-4);
  }
  for (std::size_t i = 0; i < head.a.size(); ++i) {
    const double fd = central_diff(head.a[i], 1e-5, loss);
    CHECK(rel_err(head.grad_a[i], fd) < 1e-4);
  }
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    const double fd = central_diff(x.data()[i], 1e-5, loss);
    CHECK(rel_err(d_input.data()[i], fd) < 1e-4);
  }
}

TEST_CASE("encoder composition and stacked finite differences") {
  Rng rng(137);
  const Graph g = add_self_loops(random_graph(8, 0.4, 5, rng));

  GatModel single;
  single.leaky_slope = 0.2;
  single.layers.push_back(
      random_layer(4, 5, 1, Activation::identity, HeadCombine::average, rng));
  const auto [h1, c1] = encoder_forward(single, g, g.features());
  const auto [h2, c2] = gat_layer_forward(single.layers[0], g, g.features(), 0.2);
  CHECK(h1 == h2);

  // Two identity layers with W = I and a = 0: two rounds of neighborhood
  // averaging.
  GatModel averaging;
  averaging.leaky_slope = 0.2;
  for (int i = 0; i < 2; ++i) {
    GatLayer layer;
    layer.activation = Activation::identity;
    layer.combine = HeadCombine::average;
    GatLayerParams head;
    head.W = Matrix::identity(5);
    head.a.assign(10, 0.0);
    head.grad_W = Matrix(5, 5);
    head.grad_a.assign(10, 0.0);
    layer.heads.push_back(std::move(head));
    averaging.layers.push_back(std::move(layer));
  }
  const auto [avg2, avg_caches] = encoder_forward(averaging, g, g.features());
  Matrix expected = g.features();
  for (int round = 0; round < 2; ++round) {
    Matrix next(expected.rows(), expected.cols());
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
      const auto nb = g.neighbors(v);
      for (std::size_t u : nb) {
        for (std::size_t j = 0; j < expected.cols(); ++j) {
          next(v, j) += expected(u, j) / static_cast<double>(nb.size());
        }
      }
    }
    expected = next;
  }
  for (std::size_t i = 0; i < avg2.data().size(); ++i) {
    CHECK(std::abs(avg2.data()[i] - expected.data()[i]) < 1e-10);
  }

  // Central differences through two stacked layers, all parameters and input.
  GatModel model;
  model.leaky_slope = 0.2;
  model.layers.push_back(
      random_layer(4, 5, 1, Activation::leaky_relu, HeadCombine::concat, rng));
  model.layers.push_back(
      random_layer(3, 4, 1, Activation::identity, HeadCombine::average, rng));
  Matrix x = g.features();
  const Matrix weights = random_matrix(8, 3, rng);
  const auto loss = [&] {
    const auto [out, caches] = encoder_forward(model, g, x);
    return scalarize(out, weights);
  };

  const auto [out, caches] = encoder_forward(model, g, x);
  zero_grads(model);
  const Matrix d_input = encoder_backward(model, caches, g, weights);

  for (GatLayer& layer : model.layers) {
    for (GatLayerParams& head : layer.heads) {
      for (std::size_t i = 0; i < head.W.data().size(); ++i) {
        const double fd = central_diff(head.W.data()[i], 1e-5, loss);
        CHECK(rel_err(head.grad_W.data()[i], fd) < 1e-4);
      }
      for (std::size_t i = 0; i < head.a.size(); ++i) {
        const double fd = central_diff(head.a[i], 1e-5, loss);
        CHECK(rel_err(head.grad_a[i], fd) < 1e-4);
      }
    }
  }
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    const double fd = central_diff(x.data()[i], 1e-5, loss);
    CHECK(rel_err(d_input.data()[i], fd) < 1e-4);
  }
}

TEST_CASE("multi-head layers pass the finite-difference check") {
  Rng rng(139);
  const Graph g = add_self_loops(random_graph(7, 0.45, 4, rng));
  GatModel model;
  model.leaky_slope = 0.2;
  model.layers.push_back(
      random_layer(3, 4, 2, Activation::leaky_relu, HeadCombine::concat, rng));
  model.layers.push_back(
      random_layer(3, 6, 2, Activation::identity, HeadCombine::average, rng));
  const Matrix weights = random_matrix(7, 3, rng);
  Matrix x = g.features();
  const auto loss = [&] {
    const auto [out, caches] = encoder_forward(model, g, x);
    return scalarize(out, weights);
  };
  const auto [out, caches] = encoder_forward(model, g, x);
  zero_grads(model);
  encoder_backward(model, caches, g, weights);
  for (GatLayer& layer : model.layers) {
    for (GatLayerParams& head : layer.heads) {
      for (std::size_t i = 0; i < head.W.data().size(); ++i) {
        const double fd = central_diff(head.W.data()[i], 1e-5, loss);
        CHECK(rel_err(head.grad_W.data()[i], fd) < 1e-4);
      }
      for (std::size_t i = 0; i < head.a.size(); ++i) {
        const double fd = central_diff(head.a[i], 1e-5, loss);
        CHECK(rel_err(head.grad_a[i], fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("forward is permutation equivariant") {
  Rng rng(149);
  const std::size_t n = 9;
  const Graph g = add_self_loops(random_graph(n, 0.4, 4, rng));
  GatModel model;
  model.leaky_slope = 0.2;
  model.layers.push_back(
      random_layer(4, 4, 1, Activation::leaky_relu, HeadCombine::concat, rng));

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm);

  std::vector<Edge> permuted_edges;
  for (const Edge& e : g.edges()) {
    permuted_edges.push_back(canonical_edge(perm[e.u], perm[e.v]));
  }
  Matrix permuted_features(n, g.features().cols());
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t j = 0; j < g.features().cols(); ++j) {
      permuted_features(perm[v], j) = g.features()(v, j);
    }
  }
  const Graph pg = add_self_loops(Graph::from_edges(n, permuted_edges, permuted_features));

  const auto [out, c1] = encoder_forward(model, g, g.features());
  const auto [pout, c2] = encoder_forward(model, pg, permuted_features);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      CHECK(std::abs(out(v, j) - pout(perm[v], j)) < 1e-12);
    }
  }
}

TEST_CASE("model persistence round-trips exactly") {
  Rng rng(151);
  GatArch arch;
  arch.in_dim = 5;
  arch.hidden_dim = 4;
  arch.output_dim = 3;
  arch.num_layers = 2;
  arch.heads = 2;
  arch.scorer = ScorerKind::hadamard_linear;
  const GatModel model = init_gat_model(arch, 77);

  std::ostringstream buffer;
  save_model(buffer, AnyModel(model));
  std::istringstream in(buffer.str());
  const ModelFile restored = load_model(in);
  REQUIRE(restored.net.has_value());
  const GatModel& loaded = std::get<GatModel>(*restored.net);
  REQUIRE(loaded.layers.size() == model.layers.size());
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    REQUIRE(loaded.layers[li].heads.size() == model.layers[li].heads.size());
    for (std::size_t h = 0; h < model.layers[li].heads.size(); ++h) {
      CHECK(loaded.layers[li].heads[h].W == model.layers[li].heads[h].W);
      CHECK(loaded.layers[li].heads[h].a == model.layers[li].heads[h].a);
    }
  }
  CHECK(loaded.scorer.w == model.scorer.w);
  CHECK(loaded.scorer.b == model.scorer.b);

  std::istringstream bad("crimegat-model 9\nmethod crimegat\n");
  CHECK_THROWS_AS((void)load_model(bad), DataError);
}

TEST_CASE("gat requires self-loops") {
  Rng rng(157);
  const Graph g = random_graph(5, 0.5, 3, rng);  // no self-loops added
  GatLayer layer = random_layer(2, 3, 1, Activation::identity, HeadCombine::average, rng);
  CHECK_THROWS_AS((void)gat_layer_forward(layer, g, g.features(), 0.2), ContractError);
}
