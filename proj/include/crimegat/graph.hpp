#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "crimegat/matrix.hpp"
#include "crimegat/rng.hpp"

namespace crimegat {

// Undirected node pair in canonical form (u < v).
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline Edge canonical_edge(std::size_t a, std::size_t b) {
  return a < b ? Edge{a, b} : Edge{b, a};
}

// Immutable undirected graph: node-feature matrix plus CSR adjacency.
// Neighbor slices are strictly increasing; the adjacency is symmetric.
// Self-loops are never ingested from data, only added via add_self_loops.
class Graph {
 public:
  Graph() = default;

  // `edges` must be canonical (u < v) with endpoints below num_nodes;
  // duplicates are removed. An empty feature matrix selects the default
  // features: one-hot node identity up to 64 nodes, else a
  // [degree, degree/(n-1)] pair per node.
  static Graph from_edges(std::size_t num_nodes, std::vector<Edge> edges,
                          Matrix features = {}, std::vector<std::string> labels = {});

  std::size_t num_nodes() const { return num_nodes_; }
  // Undirected edge count, self-loops excluded.
  std::size_t num_edges() const { return edges_.size(); }
  std::span<const std::size_t> neighbors(std::size_t v) const;
  bool has_edge(std::size_t u, std::size_t v) const;
  // Self-loop excluded.
  std::size_t degree(std::size_t v) const;
  const Matrix& features() const { return features_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::string node_name(std::size_t v) const;
  bool has_self_loops() const { return has_self_loops_; }
  // Canonical edge list, self-loops excluded.
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& csr_offsets() const { return csr_offsets_; }
  const std::vector<std::size_t>& csr_targets() const { return csr_targets_; }
  Graph with_features(Matrix features) const;

 private:
  std::size_t num_nodes_ = 0;
  Matrix features_;
  std::vector<std::size_t> csr_offsets_;
  std::vector<std::size_t> csr_targets_;
  std::vector<Edge> edges_;
  std::vector<std::string> labels_;
  bool has_self_loops_ = false;

  friend Graph add_self_loops(const Graph& g);
};

// Every node's neighbor slice contains the node itself exactly once.
// Idempotent.
Graph add_self_loops(const Graph& g);

enum class EdgeFileFormat { edgelist, csv };

// Edge-list format: one edge per line as two whitespace-separated tokens,
// `#` comments allowed; a line with a single token declares an isolated node.
// CSV format: header `source,target` with an optional `label` column that is
// ignored. Tokens may be contiguous integer ids or names mapped to ids in
// first-seen order. Self-loops in the input are rejected.
//
// Feature stream: one line per node, node token followed by d floats; every
// node must be covered exactly once.
Graph load_edge_list(std::istream& in, EdgeFileFormat format,
                     std::istream* feature_source = nullptr);
Graph load_graph_file(const std::string& path, EdgeFileFormat format,
                      const std::string& feature_path = "");

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

// Disjoint train/val/test positive edges plus sampled negative pairs.
// The three positive sets partition the graph's edge set; negatives are
// never edges of the full graph, never self-pairs, never duplicated within
// a split.
struct EdgeSplit {
  std::vector<Edge> train_pos, val_pos, test_pos;
  std::vector<Edge> train_neg, val_neg, test_neg;
  std::uint64_t seed = 0;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct NegativeSets {
  std::vector<Edge> train, val, test;
};

// Seeded shuffle of the canonical edge list; counts follow the
// floor/floor/remainder rule. Requires at least 3 edges.
EdgeSplit split_edges(const Graph& g, SplitRatios ratios, std::uint64_t seed);

// Uniform non-adjacent pairs, round(ratio * count) per split, sampled without
// replacement within each split.
NegativeSets sample_negatives(const Graph& g, SplitCounts pos_counts, double ratio,
                              std::uint64_t seed);

// split_edges + sample_negatives with the negative sets filled in.
EdgeSplit make_edge_split(const Graph& g, SplitRatios ratios, double negative_ratio,
                          std::uint64_t seed);

// Uniform sample of `count` distinct non-adjacent pairs. Shared by the split
// negatives and the per-epoch training negatives.
std::vector<Edge> sample_nonedges(const Graph& g, std::size_t count, Rng& rng);

struct SbmParams {
  std::size_t blocks = 2;
  std::size_t nodes_per_block = 50;
  double p_in = 0.5;
  double p_out = 0.05;
  std::size_t feature_dim = 8;
  double feature_signal = 1.0;
};

// Stochastic block model. Features are the block indicator scaled by
// feature_signal plus unit Gaussian noise, so they carry community signal
// whenever feature_signal > 0.
Graph generate_sbm(const SbmParams& params, std::uint64_t seed);

// Train positives plus self-loops over the full node set; features and labels
// are carried over. Built once before training so no val/test edge ever
// participates in message passing.
Graph message_passing_graph(const Graph& full, std::span<const Edge> train_pos);

// Column-wise z-scoring; constant columns become zeros.
Matrix standardize_columns(const Matrix& x);

}  // namespace crimegat
