#include "crimegat/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "crimegat/errors.hpp"

namespace crimegat {

namespace {

Matrix default_features(std::size_t n, const std::vector<std::size_t>& degrees) {
  if (n <= 64) return Matrix::identity(n);
  Matrix f(n, 2);
  for (std::size_t v = 0; v < n; ++v) {
    f(v, 0) = static_cast<double>(degrees[v]);
    f(v, 1) = n > 1 ? static_cast<double>(degrees[v]) / static_cast<double>(n - 1) : 0.0;
  }
  return f;
}

}  // namespace

Graph Graph::from_edges(std::size_t num_nodes, std::vector<Edge> edges, Matrix features,
                        std::vector<std::string> labels) {
  for (const Edge& e : edges) {
    if (e.u >= e.v) {
      throw ContractError("Graph: edge (" + std::to_string(e.u) + ", " +
                          std::to_string(e.v) + ") is not canonical (u < v)");
    }
    if (e.v >= num_nodes) {
      throw ContractError("Graph: node id " + std::to_string(e.v) + " out of range for " +
                          std::to_string(num_nodes) + " nodes");
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  Graph g;
  g.num_nodes_ = num_nodes;
  g.edges_ = std::move(edges);

  std::vector<std::vector<std::size_t>> adj(num_nodes);
  for (const Edge& e : g.edges_) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  g.csr_offsets_.assign(num_nodes + 1, 0);
  for (std::size_t v = 0; v < num_nodes; ++v) {
    std::sort(adj[v].begin(), adj[v].end());
    g.csr_offsets_[v + 1] = g.csr_offsets_[v] + adj[v].size();
  }
  g.csr_targets_.reserve(g.csr_offsets_.back());
  for (std::size_t v = 0; v < num_nodes; ++v) {
    g.csr_targets_.insert(g.csr_targets_.end(), adj[v].begin(), adj[v].end());
  }

  if (!labels.empty() && labels.size() != num_nodes) {
    throw ContractError("Graph: label count does not match node count");
  }
  g.labels_ = std::move(labels);

  if (features.empty()) {
    std::vector<std::size_t> degrees(num_nodes);
    for (std::size_t v = 0; v < num_nodes; ++v) degrees[v] = adj[v].size();
    g.features_ = default_features(num_nodes, degrees);
  } else {
    if (features.rows() != num_nodes) {
      throw ContractError("Graph: feature rows (" + std::to_string(features.rows()) +
                          ") do not match node count (" + std::to_string(num_nodes) + ")");
    }
    ensure_finite(features, "Graph features");
    g.features_ = std::move(features);
  }
  return g;
}

std::span<const std::size_t> Graph::neighbors(std::size_t v) const {
  if (v >= num_nodes_) {
    throw ContractError("Graph: node id " + std::to_string(v) + " out of range");
  }
  return {csr_targets_.data() + csr_offsets_[v], csr_offsets_[v + 1] - csr_offsets_[v]};
}

bool Graph::has_edge(std::size_t u, std::size_t v) const {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::size_t Graph::degree(std::size_t v) const {
  const auto nb = neighbors(v);
  return nb.size() - (has_self_loops_ ? 1 : 0);
}

std::string Graph::node_name(std::size_t v) const {
  if (v < labels_.size() && !labels_[v].empty()) return labels_[v];
  return std::to_string(v);
}

Graph Graph::with_features(Matrix features) const {
  Graph g = *this;
  if (features.rows() != num_nodes_) {
    throw ContractError("with_features: feature rows do not match node count");
  }
  ensure_finite(features, "Graph features");
  g.features_ = std::move(features);
  return g;
}

Graph add_self_loops(const Graph& g) {
  if (g.has_self_loops_) return g;
  Graph out = g;
  out.csr_offsets_.assign(g.num_nodes_ + 1, 0);
  out.csr_targets_.clear();
  out.csr_targets_.reserve(g.csr_targets_.size() + g.num_nodes_);
  for (std::size_t v = 0; v < g.num_nodes_; ++v) {
    const auto nb = g.neighbors(v);
    bool inserted = false;
    for (std::size_t u : nb) {
      if (!inserted && u > v) {
        out.csr_targets_.push_back(v);
        inserted = true;
      }
      out.csr_targets_.push_back(u);
    }
    if (!inserted) out.csr_targets_.push_back(v);
    out.csr_offsets_[v + 1] = out.csr_targets_.size();
  }
  out.has_self_loops_ = true;
  return out;
}

namespace {

bool is_integer_token(const std::string& tok) {
  if (tok.empty()) return false;
  return std::all_of(tok.begin(), tok.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::string strip_comment_and_trim(std::string line) {
  if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
  const auto first = line.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = line.find_last_not_of(" \t\r\n");
  return line.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream iss(line);
  while (std::getline(iss, field, ',')) out.push_back(strip_comment_and_trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

struct RawEdges {
  // (token_a, token_b, line_number); single-token declarations have b empty.
  std::vector<std::tuple<std::string, std::string, std::size_t>> pairs;
};

RawEdges read_edgelist(std::istream& in) {
  RawEdges raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip_comment_and_trim(line);
    if (body.empty()) continue;
    const auto toks = split_ws(body);
    if (toks.size() == 1) {
      raw.pairs.emplace_back(toks[0], "", line_no);
    } else if (toks.size() == 2) {
      raw.pairs.emplace_back(toks[0], toks[1], line_no);
    } else {
      throw DataError("edge list line " + std::to_string(line_no) +
                      ": expected at most two tokens, got " + std::to_string(toks.size()));
    }
  }
  return raw;
}

RawEdges read_csv(std::istream& in) {
  RawEdges raw;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t expected_fields = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip_comment_and_trim(line);
    if (body.empty()) continue;
    const auto fields = split_csv(body);
    if (!header_seen) {
      if (fields.size() == 2 && fields[0] == "source" && fields[1] == "target") {
        expected_fields = 2;
      } else if (fields.size() == 3 && fields[0] == "source" && fields[1] == "target" &&
                 fields[2] == "label") {
        expected_fields = 3;
      } else {
        throw DataError("csv line " + std::to_string(line_no) +
                        ": expected header 'source,target' or 'source,target,label'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != expected_fields || fields[0].empty() || fields[1].empty()) {
      throw DataError("csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(expected_fields) + " fields");
    }
    raw.pairs.emplace_back(fields[0], fields[1], line_no);
  }
  if (!header_seen) throw DataError("csv input has no header line");
  return raw;
}

Matrix read_features(std::istream& in, std::size_t num_nodes,
                     const std::map<std::string, std::size_t>& name_to_id,
                     bool integer_mode) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  Matrix features;
  std::vector<bool> seen(num_nodes, false);
  std::size_t covered = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip_comment_and_trim(line);
    if (body.empty()) continue;
    const auto toks = split_ws(body);
    if (toks.size() < 2) {
      throw DataError("feature line " + std::to_string(line_no) +
                      ": expected node token plus at least one value");
    }
    std::size_t node = 0;
    if (integer_mode) {
      if (!is_integer_token(toks[0])) {
        throw DataError("feature line " + std::to_string(line_no) + ": unknown node '" +
                        toks[0] + "'");
      }
      node = std::stoull(toks[0]);
      if (node >= num_nodes) {
        throw DataError("feature line " + std::to_string(line_no) + ": node id " +
                        toks[0] + " out of range");
      }
    } else {
      const auto it = name_to_id.find(toks[0]);
      if (it == name_to_id.end()) {
        throw DataError("feature line " + std::to_string(line_no) + ": unknown node '" +
                        toks[0] + "'");
      }
      node = it->second;
    }
    if (dim == 0) {
      dim = toks.size() - 1;
      features = Matrix(num_nodes, dim);
    } else if (toks.size() - 1 != dim) {
      throw DataError("feature line " + std::to_string(line_no) + ": expected " +
                      std::to_string(dim) + " values");
    }
    if (seen[node]) {
      throw DataError("feature line " + std::to_string(line_no) + ": duplicate node '" +
                      toks[0] + "'");
    }
    seen[node] = true;
    ++covered;
    for (std::size_t j = 0; j < dim; ++j) {
      const std::string& tok = toks[j + 1];
      char* end = nullptr;
      const double value = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size() || !std::isfinite(value)) {
        throw DataError("feature line " + std::to_string(line_no) + ": bad value '" +
                        tok + "'");
      }
      features(node, j) = value;
    }
  }
  if (covered != num_nodes) {
    for (std::size_t v = 0; v < num_nodes; ++v) {
      if (!seen[v]) {
        throw DataError("feature file covers " + std::to_string(covered) + " of " +
                        std::to_string(num_nodes) + " nodes; node " + std::to_string(v) +
                        " is missing");
      }
    }
  }
  return features;
}

}  // namespace

Graph load_edge_list(std::istream& in, EdgeFileFormat format, std::istream* feature_source) {
  const RawEdges raw =
      format == EdgeFileFormat::edgelist ? read_edgelist(in) : read_csv(in);

  bool integer_mode = true;
  for (const auto& [a, b, line_no] : raw.pairs) {
    (void)line_no;
    if (!is_integer_token(a) || (!b.empty() && !is_integer_token(b))) {
      integer_mode = false;
      break;
    }
  }

  std::map<std::string, std::size_t> name_to_id;
  std::vector<std::string> labels;
  std::size_t num_nodes = 0;
  const auto resolve = [&](const std::string& tok) -> std::size_t {
    if (integer_mode) {
      const std::size_t id = std::stoull(tok);
      num_nodes = std::max(num_nodes, id + 1);
      return id;
    }
    const auto [it, inserted] = name_to_id.emplace(tok, labels.size());
    if (inserted) labels.push_back(tok);
    return it->second;
  };

  std::vector<Edge> edges;
  for (const auto& [a, b, line_no] : raw.pairs) {
    const std::size_t ia = resolve(a);
    if (b.empty()) continue;  // isolated-node declaration
    const std::size_t ib = resolve(b);
    if (ia == ib) {
      throw DataError("line " + std::to_string(line_no) + ": self-loop '" + a +
                      "' is not allowed in input data");
    }
    edges.push_back(canonical_edge(ia, ib));
  }
  if (!integer_mode) num_nodes = labels.size();
  if (num_nodes == 0) throw DataError("edge input contains no nodes");

  Matrix features;
  if (feature_source != nullptr) {
    features = read_features(*feature_source, num_nodes, name_to_id, integer_mode);
  }
  return Graph::from_edges(num_nodes, std::move(edges), std::move(features),
                           std::move(labels));
}

Graph load_graph_file(const std::string& path, EdgeFileFormat format,
                      const std::string& feature_path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  if (feature_path.empty()) return load_edge_list(in, format);
  std::ifstream feats(feature_path);
  if (!feats) throw DataError("cannot open feature file '" + feature_path + "'");
  return load_edge_list(in, format, &feats);
}

EdgeSplit split_edges(const Graph& g, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train >= 0 && ratios.val >= 0 && ratios.test >= 0) ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ContractError("split_edges: ratios must be non-negative and sum to 1");
  }
  const std::size_t e = g.num_edges();
  if (e < 3) {
    throw DataError("split_edges: need at least 3 edges, have " + std::to_string(e));
  }
  // floor with a 1e-9 nudge so binary representation of the ratios cannot
  // push an exact product below its integer value.
  const auto count = [&](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(e) + 1e-9));
  };
  const std::size_t n_train = count(ratios.train);
  const std::size_t n_val = count(ratios.val);
  if (n_train + n_val > e) throw ContractError("split_edges: ratios overflow edge count");

  std::vector<Edge> shuffled = g.edges();
  Rng rng(derive_seed(seed, streams::kEdgeShuffle));
  rng.shuffle(shuffled);

  EdgeSplit split;
  split.seed = seed;
  split.train_pos.assign(shuffled.begin(), shuffled.begin() + n_train);
  split.val_pos.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
  split.test_pos.assign(shuffled.begin() + n_train + n_val, shuffled.end());
  return split;
}

std::vector<Edge> sample_nonedges(const Graph& g, std::size_t count, Rng& rng) {
  const std::size_t n = g.num_nodes();
  const std::size_t all_pairs = n * (n - 1) / 2;
  const std::size_t available = all_pairs - g.num_edges();
  if (count > available) {
    throw DataError("sample_nonedges: requested " + std::to_string(count) +
                    " negatives but only " + std::to_string(available) +
                    " non-edges exist");
  }
  std::vector<Edge> out;
  out.reserve(count);
  if (count * 3 >= available) {
    // Dense request: enumerate all non-edges and take a shuffled prefix,
    // which stays uniform without replacement and cannot loop.
    std::vector<Edge> nonedges;
    nonedges.reserve(available);
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = u + 1; v < n; ++v) {
        if (!g.has_edge(u, v)) nonedges.push_back(Edge{u, v});
      }
    }
    rng.shuffle(nonedges);
    out.assign(nonedges.begin(), nonedges.begin() + count);
    return out;
  }
  std::set<Edge> chosen;
  while (out.size() < count) {
    const std::size_t a = rng.index(n);
    const std::size_t b = rng.index(n);
    if (a == b) continue;
    const Edge e = canonical_edge(a, b);
    if (g.has_edge(e.u, e.v)) continue;
    if (!chosen.insert(e).second) continue;
    out.push_back(e);
  }
  return out;
}

NegativeSets sample_negatives(const Graph& g, SplitCounts pos_counts, double ratio,
                              std::uint64_t seed) {
  if (!(ratio > 0.0)) throw ContractError("sample_negatives: ratio must be positive");
  const auto scaled = [&](std::size_t c) {
    return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(c)));
  };
  Rng rng(derive_seed(seed, streams::kNegatives));
  NegativeSets sets;
  sets.train = sample_nonedges(g, scaled(pos_counts.train), rng);
  sets.val = sample_nonedges(g, scaled(pos_counts.val), rng);
  sets.test = sample_nonedges(g, scaled(pos_counts.test), rng);
  return sets;
}

EdgeSplit make_edge_split(const Graph& g, SplitRatios ratios, double negative_ratio,
                          std::uint64_t seed) {
  EdgeSplit split = split_edges(g, ratios, seed);
  NegativeSets negatives = sample_negatives(
      g,
      SplitCounts{split.train_pos.size(), split.val_pos.size(), split.test_pos.size()},
      negative_ratio, seed);
  split.train_neg = std::move(negatives.train);
  split.val_neg = std::move(negatives.val);
  split.test_neg = std::move(negatives.test);
  return split;
}

Graph generate_sbm(const SbmParams& params, std::uint64_t seed) {
  if (params.blocks == 0 || params.nodes_per_block == 0) {
    throw ContractError("generate_sbm: blocks and nodes_per_block must be positive");
  }
  if (!(params.p_out >= 0.0 && params.p_out <= params.p_in && params.p_in <= 1.0)) {
    throw ContractError("generate_sbm: need 0 <= p_out <= p_in <= 1");
  }
  if (params.feature_dim < params.blocks) {
    throw ContractError("generate_sbm: feature_dim must be at least the block count");
  }
  const std::size_t n = params.blocks * params.nodes_per_block;
  const auto block = [&](std::size_t v) { return v / params.nodes_per_block; };

  Rng rng(derive_seed(seed, streams::kSbm));
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = block(u) == block(v) ? params.p_in : params.p_out;
      if (rng.uniform() < p) edges.push_back(Edge{u, v});
    }
  }
  Matrix features(n, params.feature_dim);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t j = 0; j < params.feature_dim; ++j) {
      const double mean = j == block(v) ? params.feature_signal : 0.0;
      features(v, j) = mean + rng.normal();
    }
  }
  return Graph::from_edges(n, std::move(edges), std::move(features));
}

Graph message_passing_graph(const Graph& full, std::span<const Edge> train_pos) {
  std::vector<Edge> edges(train_pos.begin(), train_pos.end());
  Graph g = Graph::from_edges(full.num_nodes(), std::move(edges), full.features(),
                              full.labels());
  return add_self_loops(g);
}

Matrix standardize_columns(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  if (x.rows() == 0) return out;
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
    const double sd = std::sqrt(var);
    const double inv = sd > 1e-12 ? 1.0 / sd : 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) out(i, j) = (x(i, j) - mean) * inv;
  }
  return out;
}

}  // namespace crimegat
