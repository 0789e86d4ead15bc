#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "crimegat/graph.hpp"
#include "crimegat/train.hpp"

namespace crimegat {

// Resolved run configuration. Parsed from a plain-text key=value file with
// `#` comments; every key has a default and unknown keys are errors. CLI flag
// overrides are applied on top via apply_override.
struct RunConfig {
  std::string dataset = "florentine";  // florentine | sbm | <path>
  std::string format = "auto";         // auto | edgelist | csv (file datasets)
  std::string features;                // optional feature file (file datasets)
  std::string data_dir;                // where the shipped datasets live
  std::string out_dir;                 // default: runs/<dataset>-seed<seed>
  Method method = Method::crimegat;
  std::uint64_t seed = 7;
  std::optional<std::uint64_t> split_seed;  // defaults to seed

  double learning_rate = 0.01;
  std::size_t epochs = 300;
  std::size_t patience = 30;
  double negative_ratio = 1.0;
  std::size_t layers = 2;
  std::size_t hidden_dim = 16;
  std::size_t output_dim = 16;
  std::size_t heads = 1;
  ScorerKind scorer = ScorerKind::dot;
  double leaky_slope = kDefaultLeakySlope;
  bool standardize_features = true;

  double train_ratio = 0.70;
  double val_ratio = 0.15;
  double test_ratio = 0.15;

  std::size_t sbm_blocks = 2;
  std::size_t sbm_nodes_per_block = 50;
  double sbm_p_in = 0.5;
  double sbm_p_out = 0.05;
  std::size_t sbm_feature_dim = 8;
  double sbm_feature_signal = 1.0;

  double svm_lambda = 0.01;
  std::size_t svm_epochs = 200;

  std::size_t top_k = 5;

  std::uint64_t effective_split_seed() const { return split_seed.value_or(seed); }
  std::string resolved_out_dir() const;
  std::string dataset_tag() const;
  SplitRatios ratios() const { return SplitRatios{train_ratio, val_ratio, test_ratio}; }
  SbmParams sbm_params() const;
  TrainConfig train_config() const;
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Sorted key=value lines of the resolved configuration; used for the run
// summary so runs stay diffable.
std::string config_to_text(const RunConfig& cfg);


}  // namespace crimegat
