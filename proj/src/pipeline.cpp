#include "crimegat/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "crimegat/errors.hpp"
#include "crimegat/model_io.hpp"

namespace crimegat {

namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

EdgeFileFormat resolve_format(const RunConfig& cfg) {
  if (cfg.format == "edgelist") return EdgeFileFormat::edgelist;
  if (cfg.format == "csv") return EdgeFileFormat::csv;
  return cfg.dataset.size() >= 4 && cfg.dataset.ends_with(".csv")
             ? EdgeFileFormat::csv
             : EdgeFileFormat::edgelist;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

Graph load_dataset(const RunConfig& cfg) {
  Graph g;
  if (cfg.dataset == "florentine") {
    const fs::path dir(cfg.data_dir);
    g = load_graph_file((dir / "florentine_marriage.edges").string(),
                        EdgeFileFormat::edgelist,
                        (dir / "florentine_attrs.features").string());
  } else if (cfg.dataset == "sbm") {
    g = generate_sbm(cfg.sbm_params(), cfg.seed);
  } else {
    g = load_graph_file(cfg.dataset, resolve_format(cfg), cfg.features);
  }
  if (cfg.standardize_features) {
    g = g.with_features(standardize_columns(g.features()));
  }
  return g;
}

void write_split_manifest(std::ostream& out, const EdgeSplit& split) {
  out << "# crimegat-split 1\n";
  out << "seed " << split.seed << "\n";
  const auto block = [&](const char* name, const char* kind,
                         const std::vector<Edge>& edges) {
    for (const Edge& e : edges) {
      out << name << " " << kind << " " << e.u << " " << e.v << "\n";
    }
  };
  block("train", "pos", split.train_pos);
  block("train", "neg", split.train_neg);
  block("val", "pos", split.val_pos);
  block("val", "neg", split.val_neg);
  block("test", "pos", split.test_pos);
  block("test", "neg", split.test_neg);
}

void write_split_manifest_file(const std::string& path, const EdgeSplit& split) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split manifest '" + path + "'");
  write_split_manifest(out, split);
}

EdgeSplit read_split_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# crimegat-split 1", 0) != 0) {
    throw DataError("split manifest: missing '# crimegat-split 1' header");
  }
  EdgeSplit split;
  bool seed_seen = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream iss(line);
    std::string first;
    iss >> first;
    if (first == "seed") {
      if (!(iss >> split.seed)) {
        throw DataError("split manifest line " + std::to_string(line_no) + ": bad seed");
      }
      seed_seen = true;
      continue;
    }
    std::string kind;
    std::size_t u = 0, v = 0;
    if (!(iss >> kind >> u >> v)) {
      throw DataError("split manifest line " + std::to_string(line_no) +
                      ": expected '<split> <pos|neg> <u> <v>'");
    }
    std::vector<Edge>* target = nullptr;
    if (first == "train") target = kind == "pos" ? &split.train_pos : &split.train_neg;
    else if (first == "val") target = kind == "pos" ? &split.val_pos : &split.val_neg;
    else if (first == "test") target = kind == "pos" ? &split.test_pos : &split.test_neg;
    if (target == nullptr || (kind != "pos" && kind != "neg")) {
      throw DataError("split manifest line " + std::to_string(line_no) +
                      ": unknown record '" + first + " " + kind + "'");
    }
    target->push_back(Edge{u, v});
  }
  if (!seed_seen) throw DataError("split manifest: missing seed line");
  return split;
}

EdgeSplit read_split_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("split manifest not found at '" + path +
                    "' (run the train or split command first)");
  }
  return read_split_manifest(in);
}

namespace {

std::string summary_text(const RunConfig& cfg, const Graph& g, const EdgeSplit& split,
                         const MethodRun& run) {
  std::ostringstream out;
  out << "crimegat run summary\n";
  out << "method: " << to_string(cfg.method) << "\n";
  out << "nodes: " << g.num_nodes() << "\n";
  out << "edges: " << g.num_edges() << "\n";
  out << "split: train " << split.train_pos.size() << "/" << split.train_neg.size()
      << " val " << split.val_pos.size() << "/" << split.val_neg.size() << " test "
      << split.test_pos.size() << "/" << split.test_neg.size() << " (pos/neg)\n";
  if (run.trained.has_value()) {
    const TrainHistory& h = run.trained->history;
    out << "epochs_run: " << h.records.size() << "\n";
    out << "best_epoch: " << h.best_epoch << "\n";
    if (!h.records.empty()) {
      out << "final_train_loss: " << fmt17(h.records.back().train_loss) << "\n";
      out << "best_val_auc: " << fmt17(h.records[h.best_epoch - 1].val_auc) << "\n";
    }
  }
  const MetricsReport reports[] = {run.val, run.test};
  out << "\n" << render_metrics_table(reports) << "\n";
  out << "rows above: validation then test split\n";
  out << "\nresolved configuration:\n" << config_to_text(cfg);
  return out.str();
}

TrainHistory svm_history(const SvmLinkModel& final_model, const Graph& g,
                         const EdgeSplit& split, const RunConfig& cfg) {
  // Re-run the optimizer to recover per-epoch checkpoints, then score the
  // fixed validation pairs with each one.
  TrainHistory history;
  const Graph train_graph = [&] {
    std::vector<Edge> edges = split.train_pos;
    return Graph::from_edges(g.num_nodes(), std::move(edges), g.features(), g.labels());
  }();
  std::vector<Edge> train_pairs = split.train_pos;
  train_pairs.insert(train_pairs.end(), split.train_neg.begin(), split.train_neg.end());
  std::vector<int> train_labels(split.train_pos.size(), 1);
  train_labels.resize(train_pairs.size(), 0);

  Matrix raw(train_pairs.size(), PairFeatures::kDim);
  for (std::size_t i = 0; i < train_pairs.size(); ++i) {
    const auto fv = pair_features(train_graph, train_pairs[i].u, train_pairs[i].v).to_vector();
    for (std::size_t j = 0; j < PairFeatures::kDim; ++j) raw(i, j) = fv[j];
  }
  const Matrix standardized = final_model.standardizer.apply(raw);
  const SvmTrainResult result = svm_train(standardized, train_labels, cfg.svm_lambda,
                                          cfg.svm_epochs, cfg.seed);

  std::vector<Edge> val_pairs = split.val_pos;
  val_pairs.insert(val_pairs.end(), split.val_neg.begin(), split.val_neg.end());
  std::vector<int> val_labels(split.val_pos.size(), 1);
  val_labels.resize(val_pairs.size(), 0);
  Matrix val_raw(val_pairs.size(), PairFeatures::kDim);
  for (std::size_t i = 0; i < val_pairs.size(); ++i) {
    const auto fv = pair_features(train_graph, val_pairs[i].u, val_pairs[i].v).to_vector();
    for (std::size_t j = 0; j < PairFeatures::kDim; ++j) val_raw(i, j) = fv[j];
  }
  const Matrix val_features = final_model.standardizer.apply(val_raw);

  double best_auc = -1.0;
  for (std::size_t e = 0; e < result.checkpoints.size(); ++e) {
    const SvmCheckpoint& cp = result.checkpoints[e];
    std::vector<double> scores;
    scores.reserve(val_pairs.size());
    for (std::size_t i = 0; i < val_features.rows(); ++i) {
      scores.push_back(svm_decision(cp.w, cp.b, val_features.row(i)));
    }
    const double auc = auc_roc(scores, val_labels);
    history.records.push_back(EpochRecord{e + 1, result.objective_history[e], auc});
    if (auc > best_auc) {
      best_auc = auc;
      history.best_epoch = e + 1;
    }
  }
  return history;
}

}  // namespace

void run_train(const RunConfig& cfg, std::ostream& log) {
  const Graph g = load_dataset(cfg);
  const EdgeSplit split =
      make_edge_split(g, cfg.ratios(), cfg.negative_ratio, cfg.effective_split_seed());

  const RunPaths paths(cfg);
  fs::create_directories(paths.out_dir);
  write_split_manifest_file(paths.manifest().string(), split);

  const MethodRun run = run_method(g, split, cfg.train_config());

  if (run.trained.has_value()) {
    save_model_file(paths.model(cfg.method).string(), run.trained->model);
    write_text_file(paths.history(cfg.method), history_to_jsonl(run.trained->history));
  } else if (run.svm.has_value()) {
    save_model_file(paths.model(cfg.method).string(), *run.svm);
    write_text_file(paths.history(cfg.method),
                    history_to_jsonl(svm_history(*run.svm, g, split, cfg)));
  }
  write_text_file(paths.summary(cfg.method), summary_text(cfg, g, split, run));

  log << "run directory: " << paths.out_dir.string() << "\n";
  const MetricsReport reports[] = {run.val, run.test};
  log << render_metrics_table(reports);
}

namespace {

void check_net_matches_config(const AnyModel& model, const RunConfig& cfg, Method method) {
  std::size_t layers = 0;
  std::size_t hidden = 0;
  std::size_t output = 0;
  std::size_t heads = 1;
  ScorerKind scorer = ScorerKind::dot;
  if (const auto* gat = std::get_if<GatModel>(&model)) {
    layers = gat->layers.size();
    hidden = layers > 1 ? gat->layers.front().head_dim() : cfg.hidden_dim;
    output = gat->layers.back().head_dim();
    heads = gat->layers.front().heads.size();
    scorer = gat->scorer.kind;
  } else if (const auto* gcn = std::get_if<GcnModel>(&model)) {
    layers = gcn->layers.size();
    hidden = layers > 1 ? gcn->layers.front().W.rows() : cfg.hidden_dim;
    output = gcn->layers.back().W.rows();
    scorer = gcn->scorer.kind;
  } else {
    const auto& sage = std::get<SageModel>(model);
    layers = sage.layers.size();
    hidden = layers > 1 ? sage.layers.front().W_self.rows() : cfg.hidden_dim;
    output = sage.layers.back().W_self.rows();
    scorer = sage.scorer.kind;
  }
  if (layers != cfg.layers || hidden != cfg.hidden_dim || output != cfg.output_dim ||
      heads != cfg.heads || scorer != cfg.scorer) {
    throw ConfigError(std::string("model file for '") + to_string(method) +
                      "' does not match the configured architecture");
  }
}

}  // namespace

std::vector<MetricsReport> run_evaluate(const RunConfig& cfg,
                                        const std::vector<Method>& methods,
                                        const std::string& model_override,
                                        std::ostream& out, bool jsonl) {
  const Graph g = load_dataset(cfg);
  const RunPaths paths(cfg);
  const EdgeSplit split = read_split_manifest_file(paths.manifest().string());

  std::vector<MetricsReport> reports;
  for (Method method : methods) {
    if (method == Method::pa) {
      reports.push_back(evaluate_pa(g, split, EvalSplit::test));
      continue;
    }
    const std::string model_path = !model_override.empty() && methods.size() == 1
                                       ? model_override
                                       : paths.model(method).string();
    const ModelFile file = load_model_file(model_path);
    if (file.method != method) {
      throw ConfigError(std::string("model file at '") + model_path + "' holds method '" +
                        to_string(file.method) + "', not '" + to_string(method) + "'");
    }
    if (method == Method::svm) {
      reports.push_back(evaluate_svm(*file.svm, g, split, EvalSplit::test));
    } else {
      check_net_matches_config(*file.net, cfg, method);
      reports.push_back(evaluate_model(*file.net, g, split, EvalSplit::test));
    }
  }

  const std::string rendered =
      jsonl ? metrics_to_jsonl(reports) : render_metrics_table(reports);
  out << rendered;
  fs::create_directories(paths.out_dir);
  write_text_file(paths.metrics(), rendered);
  return reports;
}

void run_explain(const RunConfig& cfg, const std::string& model_override,
                 std::size_t top_k, std::ostream& out) {
  const Graph g = load_dataset(cfg);
  const RunPaths paths(cfg);
  const EdgeSplit split = read_split_manifest_file(paths.manifest().string());
  const std::string model_path =
      model_override.empty() ? paths.model(Method::crimegat).string() : model_override;
  const ModelFile file = load_model_file(model_path);
  if (file.method != Method::crimegat || !file.net.has_value() ||
      !std::holds_alternative<GatModel>(*file.net)) {
    throw ConfigError("explain: model at '" + model_path +
                      "' is not a crimegat model (baselines have no attention)");
  }
  const GatModel& model = std::get<GatModel>(*file.net);

  const Graph mp = message_passing_graph(g, split.train_pos);
  const auto [embeddings, caches] = encoder_forward(model, mp, mp.features());
  (void)embeddings;

  std::ostringstream report;
  report << "# crimegat-attention 1\n";
  report << "# nodes " << mp.num_nodes() << " layers " << caches.size() << "\n";

  // Total attention mass each node receives inside other nodes' neighborhoods,
  // accumulated across layers. Self-loop terms are reported but excluded here.
  std::vector<double> received(mp.num_nodes(), 0.0);
  for (std::size_t li = 0; li < caches.size(); ++li) {
    const LayerCache& cache = caches[li];
    const double inv_heads = 1.0 / static_cast<double>(cache.heads.size());
    std::size_t k = 0;
    for (std::size_t v = 0; v < mp.num_nodes(); ++v) {
      for (std::size_t u : mp.neighbors(v)) {
        double alpha = 0.0;
        for (const HeadCache& hc : cache.heads) alpha += hc.alpha[k];
        alpha *= inv_heads;
        report << "edge " << li << " " << mp.node_name(v) << " " << mp.node_name(u) << " "
               << fmt17(alpha) << "\n";
        if (u != v) received[u] += alpha;
        ++k;
      }
    }
  }

  std::vector<std::size_t> order(mp.num_nodes());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (received[a] != received[b]) return received[a] > received[b];
    return a < b;
  });
  const std::size_t k = std::min(top_k, order.size());
  for (std::size_t i = 0; i < k; ++i) {
    report << "rank " << i + 1 << " " << mp.node_name(order[i]) << " "
           << fmt17(received[order[i]]) << "\n";
  }

  const std::string text = report.str();
  fs::create_directories(paths.out_dir);
  write_text_file(paths.attention(), text);
  out << text;
}

void run_synth(const RunConfig& cfg, std::ostream& log) {
  const Graph g = generate_sbm(cfg.sbm_params(), cfg.seed);
  const RunPaths paths(cfg);
  fs::create_directories(paths.out_dir);

  std::ostringstream edges;
  edges << "# synthetic stochastic block model graph\n";
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    if (g.degree(v) == 0) edges << v << "\n";
  }
  for (const Edge& e : g.edges()) edges << e.u << " " << e.v << "\n";
  write_text_file(paths.out_dir / "sbm.edges", edges.str());

  std::ostringstream features;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    features << v;
    for (std::size_t j = 0; j < g.features().cols(); ++j) {
      features << " " << fmt17(g.features()(v, j));
    }
    features << "\n";
  }
  write_text_file(paths.out_dir / "sbm.features", features.str());

  log << "wrote " << (paths.out_dir / "sbm.edges").string() << " (" << g.num_nodes()
      << " nodes, " << g.num_edges() << " edges) and sbm.features\n";
}

void run_split(const RunConfig& cfg, std::ostream& log) {
  const Graph g = load_dataset(cfg);
  const EdgeSplit split =
      make_edge_split(g, cfg.ratios(), cfg.negative_ratio, cfg.effective_split_seed());
  const RunPaths paths(cfg);
  fs::create_directories(paths.out_dir);
  write_split_manifest_file(paths.manifest().string(), split);
  log << "wrote " << paths.manifest().string() << " (train " << split.train_pos.size()
      << ", val " << split.val_pos.size() << ", test " << split.test_pos.size() << ")\n";
}

}  // namespace crimegat
