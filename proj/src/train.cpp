#include "crimegat/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "crimegat/errors.hpp"
#include "crimegat/linkpred.hpp"
#include "crimegat/rng.hpp"

namespace crimegat {

const char* to_string(Method m) {
  switch (m) {
    case Method::crimegat: return "crimegat";
    case Method::gcn: return "gcn";
    case Method::sage: return "sage";
    case Method::svm: return "svm";
    case Method::pa: return "pa";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "crimegat") return Method::crimegat;
  if (name == "gcn") return Method::gcn;
  if (name == "sage") return Method::sage;
  if (name == "svm") return Method::svm;
  if (name == "pa") return Method::pa;
  throw ConfigError("unknown method '" + name + "'");
}

const char* to_string(EvalSplit s) { return s == EvalSplit::val ? "val" : "test"; }

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg, std::size_t t) {
  if (params.size() != grads.size()) {
    throw ContractError("adam_step: parameter and gradient sizes differ");
  }
  if (t == 0) throw ContractError("adam_step: step count is 1-based");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: state size does not match parameters");
  }
  const double b1t = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double b2t = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / b1t;
    const double v_hat = state.v[i] / b2t;
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

std::string history_to_jsonl(const TrainHistory& history) {
  std::ostringstream out;
  char buf[64];
  for (const EpochRecord& r : history.records) {
    out << "{\"epoch\":" << r.epoch;
    std::snprintf(buf, sizeof(buf), "%.17g", r.train_loss);
    out << ",\"train_loss\":" << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", r.val_auc);
    out << ",\"val_auc\":" << buf << "}\n";
  }
  return out.str();
}

Method model_method(const AnyModel& model) {
  if (std::holds_alternative<GatModel>(model)) return Method::crimegat;
  if (std::holds_alternative<GcnModel>(model)) return Method::gcn;
  return Method::sage;
}

namespace {

void visit_scorer(LinkScorer& scorer,
                  const std::function<void(std::span<double>, std::span<double>)>& fn) {
  if (scorer.kind == ScorerKind::hadamard_linear) {
    fn(std::span<double>(scorer.w), std::span<double>(scorer.grad_w));
    fn(std::span<double>(&scorer.b, 1), std::span<double>(&scorer.grad_b, 1));
  }
}

}  // namespace

void for_each_param(AnyModel& model,
                    const std::function<void(std::span<double>, std::span<double>)>& fn) {
  if (auto* gat = std::get_if<GatModel>(&model)) {
    for (GatLayer& layer : gat->layers) {
      for (GatLayerParams& head : layer.heads) {
        fn(std::span<double>(head.W.data()), std::span<double>(head.grad_W.data()));
        fn(std::span<double>(head.a), std::span<double>(head.grad_a));
      }
    }
    visit_scorer(gat->scorer, fn);
  } else if (auto* gcn = std::get_if<GcnModel>(&model)) {
    for (GcnLayerParams& layer : gcn->layers) {
      fn(std::span<double>(layer.W.data()), std::span<double>(layer.grad_W.data()));
    }
    visit_scorer(gcn->scorer, fn);
  } else if (auto* sage = std::get_if<SageModel>(&model)) {
    for (SageLayerParams& layer : sage->layers) {
      fn(std::span<double>(layer.W_self.data()),
         std::span<double>(layer.grad_W_self.data()));
      fn(std::span<double>(layer.W_neigh.data()),
         std::span<double>(layer.grad_W_neigh.data()));
    }
    visit_scorer(sage->scorer, fn);
  }
}

void zero_grads(AnyModel& model) {
  std::visit([](auto& m) { zero_grads(m); }, model);
}

ForwardPass model_forward_cached(const AnyModel& model, const Graph& g, const Matrix& x) {
  ForwardPass pass;
  if (const auto* gat = std::get_if<GatModel>(&model)) {
    auto [h, caches] = encoder_forward(*gat, g, x);
    pass.embeddings = std::move(h);
    pass.caches = std::move(caches);
  } else if (const auto* gcn = std::get_if<GcnModel>(&model)) {
    auto [h, caches] = gcn_encoder_forward(*gcn, g, x);
    pass.embeddings = std::move(h);
    pass.caches = std::move(caches);
  } else {
    const auto* sage = std::get_if<SageModel>(&model);
    auto [h, caches] = sage_encoder_forward(*sage, g, x);
    pass.embeddings = std::move(h);
    pass.caches = std::move(caches);
  }
  return pass;
}

Matrix model_forward(const AnyModel& model, const Graph& g, const Matrix& x) {
  return model_forward_cached(model, g, x).embeddings;
}

Matrix model_backward(AnyModel& model, const ForwardPass& pass, const Graph& g,
                      const Matrix& d_embeddings) {
  if (auto* gat = std::get_if<GatModel>(&model)) {
    return encoder_backward(*gat, std::get<std::vector<LayerCache>>(pass.caches), g,
                            d_embeddings);
  }
  if (auto* gcn = std::get_if<GcnModel>(&model)) {
    return gcn_encoder_backward(*gcn, std::get<std::vector<GcnCache>>(pass.caches), g,
                                d_embeddings);
  }
  auto* sage = std::get_if<SageModel>(&model);
  return sage_encoder_backward(*sage, std::get<std::vector<SageCache>>(pass.caches), g,
                               d_embeddings);
}

AnyModel init_model(const TrainConfig& cfg, std::size_t in_dim) {
  switch (cfg.method) {
    case Method::crimegat: {
      GatArch arch;
      arch.in_dim = in_dim;
      arch.hidden_dim = cfg.hidden_dim;
      arch.output_dim = cfg.output_dim;
      arch.num_layers = cfg.num_layers;
      arch.heads = cfg.heads;
      arch.scorer = cfg.scorer;
      arch.leaky_slope = cfg.leaky_slope;
      return init_gat_model(arch, cfg.seed);
    }
    case Method::gcn:
    case Method::sage: {
      GnnArch arch;
      arch.in_dim = in_dim;
      arch.hidden_dim = cfg.hidden_dim;
      arch.output_dim = cfg.output_dim;
      arch.num_layers = cfg.num_layers;
      arch.scorer = cfg.scorer;
      arch.leaky_slope = cfg.leaky_slope;
      return cfg.method == Method::gcn ? AnyModel(init_gcn_model(arch, cfg.seed))
                                       : AnyModel(init_sage_model(arch, cfg.seed));
    }
    default:
      throw ContractError("init_model: method has no trainable encoder");
  }
}

namespace {

const LinkScorer& model_scorer(const AnyModel& model) {
  return std::visit([](const auto& m) -> const LinkScorer& { return m.scorer; }, model);
}

LinkScorer& model_scorer(AnyModel& model) {
  return std::visit([](auto& m) -> LinkScorer& { return m.scorer; }, model);
}

std::pair<std::vector<Edge>, std::vector<int>> eval_pairs(const EdgeSplit& split,
                                                          EvalSplit which) {
  const auto& pos = which == EvalSplit::val ? split.val_pos : split.test_pos;
  const auto& neg = which == EvalSplit::val ? split.val_neg : split.test_neg;
  std::vector<Edge> pairs;
  pairs.reserve(pos.size() + neg.size());
  pairs.insert(pairs.end(), pos.begin(), pos.end());
  pairs.insert(pairs.end(), neg.begin(), neg.end());
  std::vector<int> labels(pos.size(), 1);
  labels.resize(pos.size() + neg.size(), 0);
  return {std::move(pairs), std::move(labels)};
}

void require_populated(const EdgeSplit& split, EvalSplit which) {
  const auto& pos = which == EvalSplit::val ? split.val_pos : split.test_pos;
  const auto& neg = which == EvalSplit::val ? split.val_neg : split.test_neg;
  if (pos.empty() || neg.empty()) {
    throw ContractError(std::string("evaluate: ") + to_string(which) +
                        " split has no positives or no negatives");
  }
}

// Scores of one split as link probabilities.
std::vector<double> probability_scores(const AnyModel& model, const Matrix& embeddings,
                                       std::span<const Edge> pairs) {
  std::vector<double> logits = score_pairs(model_scorer(model), embeddings, pairs);
  for (double& z : logits) z = sigmoid(z);
  return logits;
}

MetricsReport build_report(const std::string& method, EvalSplit which,
                           std::span<const double> val_scores,
                           std::span<const int> val_labels,
                           std::span<const double> which_scores,
                           std::span<const int> which_labels) {
  const double threshold = select_threshold(val_scores, val_labels);
  const ThresholdMetrics tm = confusion_at_threshold(which_scores, which_labels, threshold);
  MetricsReport report;
  report.method = method;
  report.split = to_string(which);
  report.precision = tm.precision;
  report.recall = tm.recall;
  report.f1 = tm.f1;
  report.auc_roc = auc_roc(which_scores, which_labels);
  report.threshold = threshold;
  report.counts = tm.counts;
  return report;
}

}  // namespace

TrainResult train_model(const Graph& g, const EdgeSplit& split, const TrainConfig& cfg) {
  if (cfg.learning_rate < 0.0) throw ContractError("train: learning rate must be >= 0");
  if (cfg.epochs == 0 || cfg.patience == 0) {
    throw ContractError("train: epochs and patience must be at least 1");
  }
  if (!(cfg.negative_ratio > 0.0)) {
    throw ContractError("train: negative ratio must be positive");
  }
  if (split.train_pos.empty()) throw ContractError("train: no training positives");
  require_populated(split, EvalSplit::val);

  const Graph mp = message_passing_graph(g, split.train_pos);
  const Matrix& x = mp.features();
  AnyModel model = init_model(cfg, x.cols());

  auto [val_pairs, val_labels] = eval_pairs(split, EvalSplit::val);
  const std::size_t negatives_per_epoch = static_cast<std::size_t>(
      std::llround(cfg.negative_ratio * static_cast<double>(split.train_pos.size())));

  std::vector<AdamState> states;
  AdamConfig adam;
  adam.lr = cfg.learning_rate;

  TrainHistory history;
  AnyModel best_model = model;
  double best_auc = -1.0;
  std::size_t epochs_since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fresh negatives every epoch; validation/test negatives stay fixed in
    // the split.
    Rng neg_rng(derive_seed(cfg.seed, streams::kEpochNegativesBase + epoch));
    const std::vector<Edge> negatives = sample_nonedges(g, negatives_per_epoch, neg_rng);

    std::vector<Edge> pairs = split.train_pos;
    pairs.insert(pairs.end(), negatives.begin(), negatives.end());
    std::vector<int> labels(split.train_pos.size(), 1);
    labels.resize(pairs.size(), 0);

    double loss = 0.0;
    double val_auc = 0.0;
    try {
      const ForwardPass pass = model_forward_cached(model, mp, x);
      const std::vector<double> logits =
          score_pairs(model_scorer(model), pass.embeddings, pairs);
      BceResult bce = bce_loss(logits, labels);
      loss = bce.loss;

      zero_grads(model);
      Matrix d_embeddings(pass.embeddings.rows(), pass.embeddings.cols());
      score_pairs_backward(model_scorer(model), pass.embeddings, pairs, bce.d_logits,
                           d_embeddings);
      model_backward(model, pass, mp, d_embeddings);

      std::size_t tensor_index = 0;
      for_each_param(model, [&](std::span<double> values, std::span<double> grads) {
        if (tensor_index >= states.size()) states.emplace_back();
        adam_step(values, grads, states[tensor_index], adam, epoch);
        for (double p : values) {
          if (!std::isfinite(p)) {
            throw NumericError("parameters diverged (non-finite)");
          }
        }
        ++tensor_index;
      });

      const Matrix h = model_forward(model, mp, x);
      const std::vector<double> val_scores = probability_scores(model, h, val_pairs);
      val_auc = auc_roc(val_scores, val_labels);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ": training diverged (" +
                         e.what() + ")");
    }
    history.records.push_back(EpochRecord{epoch, loss, val_auc});

    if (val_auc > best_auc) {
      best_auc = val_auc;
      history.best_epoch = epoch;
      best_model = model;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.patience) break;
    }
  }

  return TrainResult{std::move(best_model), std::move(history)};
}

MetricsReport evaluate_model(const AnyModel& model, const Graph& g, const EdgeSplit& split,
                             EvalSplit which) {
  require_populated(split, EvalSplit::val);
  require_populated(split, which);
  const Graph mp = message_passing_graph(g, split.train_pos);
  const Matrix h = model_forward(model, mp, mp.features());

  auto [val_pairs, val_labels] = eval_pairs(split, EvalSplit::val);
  auto [pairs, labels] = eval_pairs(split, which);
  const std::vector<double> val_scores = probability_scores(model, h, val_pairs);
  const std::vector<double> scores = probability_scores(model, h, pairs);
  return build_report(to_string(model_method(model)), which, val_scores, val_labels,
                      scores, labels);
}

namespace {

// Training graph for the non-parametric and feature-based baselines: train
// positives only, no self-loops, so degrees and neighbor sets match what the
// encoders were allowed to see.
Graph baseline_train_graph(const Graph& g, const EdgeSplit& split) {
  std::vector<Edge> edges = split.train_pos;
  return Graph::from_edges(g.num_nodes(), std::move(edges), g.features(), g.labels());
}

std::vector<double> pa_scores(const Graph& train_graph, std::span<const Edge> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const Edge& e : pairs) out.push_back(pa_score(train_graph, e.u, e.v));
  return out;
}

Matrix pair_feature_matrix(const Graph& train_graph, std::span<const Edge> pairs) {
  Matrix m(pairs.size(), PairFeatures::kDim);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto fv = pair_features(train_graph, pairs[i].u, pairs[i].v).to_vector();
    for (std::size_t j = 0; j < PairFeatures::kDim; ++j) m(i, j) = fv[j];
  }
  return m;
}

}  // namespace

MetricsReport evaluate_pa(const Graph& g, const EdgeSplit& split, EvalSplit which) {
  require_populated(split, EvalSplit::val);
  require_populated(split, which);
  const Graph train_graph = baseline_train_graph(g, split);
  auto [val_pairs, val_labels] = eval_pairs(split, EvalSplit::val);
  auto [pairs, labels] = eval_pairs(split, which);
  const std::vector<double> val_scores = pa_scores(train_graph, val_pairs);
  const std::vector<double> scores = pa_scores(train_graph, pairs);
  return build_report("pa", which, val_scores, val_labels, scores, labels);
}

SvmLinkModel train_svm_link_model(const Graph& g, const EdgeSplit& split,
                                  const TrainConfig& cfg) {
  if (split.train_pos.empty() || split.train_neg.empty()) {
    throw ContractError("svm: train split needs positives and negatives");
  }
  const Graph train_graph = baseline_train_graph(g, split);
  std::vector<Edge> pairs = split.train_pos;
  pairs.insert(pairs.end(), split.train_neg.begin(), split.train_neg.end());
  std::vector<int> labels(split.train_pos.size(), 1);
  labels.resize(pairs.size(), 0);

  const Matrix raw = pair_feature_matrix(train_graph, pairs);
  SvmLinkModel model;
  model.standardizer = Standardizer::fit(raw);
  const Matrix standardized = model.standardizer.apply(raw);
  const SvmTrainResult result =
      svm_train(standardized, labels, cfg.svm_lambda, cfg.svm_epochs, cfg.seed);
  model.w = result.w;
  model.b = result.b;
  return model;
}

MetricsReport evaluate_svm(const SvmLinkModel& model, const Graph& g,
                           const EdgeSplit& split, EvalSplit which) {
  require_populated(split, EvalSplit::val);
  require_populated(split, which);
  const Graph train_graph = baseline_train_graph(g, split);
  const auto score_all = [&](std::span<const Edge> pairs) {
    const Matrix features = model.standardizer.apply(pair_feature_matrix(train_graph, pairs));
    std::vector<double> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < features.rows(); ++i) {
      out.push_back(svm_decision(model.w, model.b, features.row(i)));
    }
    return out;
  };
  auto [val_pairs, val_labels] = eval_pairs(split, EvalSplit::val);
  auto [pairs, labels] = eval_pairs(split, which);
  const std::vector<double> val_scores = score_all(val_pairs);
  const std::vector<double> scores = score_all(pairs);
  return build_report("svm", which, val_scores, val_labels, scores, labels);
}

MethodRun run_method(const Graph& g, const EdgeSplit& split, const TrainConfig& cfg) {
  MethodRun run;
  switch (cfg.method) {
    case Method::crimegat:
    case Method::gcn:
    case Method::sage: {
      run.trained = train_model(g, split, cfg);
      run.val = evaluate_model(run.trained->model, g, split, EvalSplit::val);
      run.test = evaluate_model(run.trained->model, g, split, EvalSplit::test);
      break;
    }
    case Method::svm: {
      run.svm = train_svm_link_model(g, split, cfg);
      run.val = evaluate_svm(*run.svm, g, split, EvalSplit::val);
      run.test = evaluate_svm(*run.svm, g, split, EvalSplit::test);
      break;
    }
    case Method::pa: {
      run.val = evaluate_pa(g, split, EvalSplit::val);
      run.test = evaluate_pa(g, split, EvalSplit::test);
      break;
    }
  }
  return run;
}

}  // namespace crimegat
