#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "crimegat/graph.hpp"
#include "crimegat/linkpred.hpp"
#include "crimegat/matrix.hpp"

namespace crimegat {

enum class Activation { leaky_relu, identity };
enum class HeadCombine { concat, average };

const char* to_string(Activation a);
const char* to_string(HeadCombine c);
Activation parse_activation(const std::string& name);
HeadCombine parse_head_combine(const std::string& name);

inline constexpr double kDefaultLeakySlope = 0.2;
// Attention logits are clamped here before the softmax. With max-subtraction
// already applied this is a no-op in normal operation.
inline constexpr double kLogitClamp = 50.0;

// One attention head: projection W (head_dim x in_dim) and attention vector
// a of length 2*head_dim, split as [destination half | source half] over the
// concatenated projections.
struct GatLayerParams {
  Matrix W;
  std::vector<double> a;
  Matrix grad_W;
  std::vector<double> grad_a;
};

struct GatLayer {
  std::vector<GatLayerParams> heads;
  Activation activation = Activation::leaky_relu;
  HeadCombine combine = HeadCombine::concat;

  std::size_t in_dim() const { return heads.front().W.cols(); }
  std::size_t head_dim() const { return heads.front().W.rows(); }
  std::size_t out_dim() const {
    return combine == HeadCombine::concat ? heads.size() * head_dim() : head_dim();
  }
};

struct HeadCache {
  Matrix projected;                // W h_u per node
  std::vector<double> raw_logits;  // pre-LeakyReLU, one per CSR entry
  std::vector<double> alpha;       // attention coefficients, one per CSR entry
};

struct LayerCache {
  Matrix input;
  std::vector<HeadCache> heads;
  Matrix combined_preact;  // pre-activation output after head combination
};

using NodeEmbeddings = Matrix;

struct GatModel {
  std::vector<GatLayer> layers;
  LinkScorer scorer;
  double leaky_slope = kDefaultLeakySlope;
};

// Per-edge logits e_vu = LeakyReLU(a_dst . (W h_v) + a_src . (W h_u)) for each
// directed CSR entry (v <- u), in CSR traversal order. Exploits the
// dot-product decomposition of the concatenation [W h_v || W h_u].
std::vector<double> attention_logits(const GatLayerParams& head, const Graph& g,
                                     const Matrix& h, double slope);

// Softmax of the (clamped) logits grouped by destination node.
std::vector<double> attention_coefficients(std::span<const double> logits, const Graph& g);

std::pair<NodeEmbeddings, LayerCache> gat_layer_forward(const GatLayer& layer,
                                                        const Graph& g, const Matrix& h,
                                                        double slope);

// Exact analytic gradients through the aggregation, the neighborhood softmax
// (Jacobian alpha_i * (delta_ij - alpha_j) within each segment), the LeakyReLU
// and the projection. Accumulates into the layer's grad buffers and returns
// d(loss)/d(input).
Matrix gat_layer_backward(GatLayer& layer, const LayerCache& cache, const Graph& g,
                          const Matrix& d_out, double slope);

std::pair<NodeEmbeddings, std::vector<LayerCache>> encoder_forward(const GatModel& model,
                                                                   const Graph& g,
                                                                   const Matrix& x);

Matrix encoder_backward(GatModel& model, const std::vector<LayerCache>& caches,
                        const Graph& g, const Matrix& d_out);

struct GatArch {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 16;  // per head on hidden layers
  std::size_t output_dim = 16;
  std::size_t num_layers = 2;
  std::size_t heads = 1;
  ScorerKind scorer = ScorerKind::dot;
  double leaky_slope = kDefaultLeakySlope;
};

// Glorot-uniform W, uniform a over +-sqrt(6 / (2*head_dim + 1)); hidden layers
// use LeakyReLU with head concatenation, the final layer is identity with head
// averaging so the scorer sees unsquashed embeddings.
GatModel init_gat_model(const GatArch& arch, std::uint64_t seed);

void zero_grads(GatModel& model);

}  // namespace crimegat
