#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "crimegat/baselines.hpp"
#include "crimegat/gat.hpp"
#include "crimegat/graph.hpp"
#include "crimegat/metrics.hpp"

namespace crimegat {

enum class Method { crimegat, gcn, sage, svm, pa };

const char* to_string(Method m);
Method parse_method(const std::string& name);

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

// Standard bias-corrected first/second-moment update, applied elementwise.
// t is the 1-based step count.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg, std::size_t t);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 300;
  std::size_t patience = 30;
  double negative_ratio = 1.0;
  std::uint64_t seed = 7;
  std::size_t num_layers = 2;
  std::size_t hidden_dim = 16;
  std::size_t output_dim = 16;
  std::size_t heads = 1;
  ScorerKind scorer = ScorerKind::dot;
  double leaky_slope = kDefaultLeakySlope;
  Method method = Method::crimegat;
  double svm_lambda = 0.01;
  std::size_t svm_epochs = 200;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  std::size_t best_epoch = 0;  // 1-based; earliest epoch with the max val AUC
};

std::string history_to_jsonl(const TrainHistory& history);

// One of the three trainable encoders, each carrying its link scorer.
using AnyModel = std::variant<GatModel, GcnModel, SageModel>;

Method model_method(const AnyModel& model);

// Enumerates every parameter tensor as aligned (values, grads) spans in a
// fixed order; the optimizer and the persistence format share it.
void for_each_param(AnyModel& model,
                    const std::function<void(std::span<double>, std::span<double>)>& fn);
void zero_grads(AnyModel& model);

Matrix model_forward(const AnyModel& model, const Graph& g, const Matrix& x);
// Forward that retains caches inside the returned closure state for one
// matching backward call.
struct ForwardPass {
  Matrix embeddings;
  std::variant<std::vector<LayerCache>, std::vector<GcnCache>, std::vector<SageCache>>
      caches;
};
ForwardPass model_forward_cached(const AnyModel& model, const Graph& g, const Matrix& x);
Matrix model_backward(AnyModel& model, const ForwardPass& pass, const Graph& g,
                      const Matrix& d_embeddings);

AnyModel init_model(const TrainConfig& cfg, std::size_t in_dim);

struct TrainResult {
  AnyModel model;
  TrainHistory history;
};

// Full-batch training of the configured encoder on the split's train
// positives plus fresh per-epoch negatives, with early stopping on validation
// AUC. Message passing uses only train positives plus self-loops.
TrainResult train_model(const Graph& g, const EdgeSplit& split, const TrainConfig& cfg);

enum class EvalSplit { val, test };
const char* to_string(EvalSplit s);

// Scores the chosen split's positives and negatives; the decision threshold
// always comes from select_threshold on the validation split.
MetricsReport evaluate_model(const AnyModel& model, const Graph& g, const EdgeSplit& split,
                             EvalSplit which);

MetricsReport evaluate_pa(const Graph& g, const EdgeSplit& split, EvalSplit which);

// Linear SVM on standardized pair features computed from the training graph.
struct SvmLinkModel {
  std::vector<double> w;
  double b = 0.0;
  Standardizer standardizer;
};

SvmLinkModel train_svm_link_model(const Graph& g, const EdgeSplit& split,
                                  const TrainConfig& cfg);
MetricsReport evaluate_svm(const SvmLinkModel& model, const Graph& g,
                           const EdgeSplit& split, EvalSplit which);

// Trains (if the method needs it) and evaluates on both splits.
struct MethodRun {
  std::optional<TrainResult> trained;
  std::optional<SvmLinkModel> svm;
  MetricsReport val;
  MetricsReport test;
};

MethodRun run_method(const Graph& g, const EdgeSplit& split, const TrainConfig& cfg);

}  // namespace crimegat
