#include "crimegat/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "crimegat/errors.hpp"

#ifndef CRIMEGAT_DATA_DIR
#define CRIMEGAT_DATA_DIR "data"
#endif

namespace crimegat {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw ConfigError("config: invalid number '" + value + "' for key '" + key + "'");
  }
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw ConfigError("config: invalid integer '" + value + "' for key '" + key + "'");
  }
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: invalid boolean '" + value + "' for key '" + key + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset = v; }},
      {"format",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "auto" && v != "edgelist" && v != "csv") {
           throw ConfigError("config: invalid value '" + v + "' for key '" + k + "'");
         }
         c.format = v;
       }},
      {"features", [](RunConfig& c, const std::string&, const std::string& v) { c.features = v; }},
      {"data_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; }},
      {"out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
      {"method",
       [](RunConfig& c, const std::string&, const std::string& v) { c.method = parse_method(v); }},
      {"seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(parse_size(k, v));
       }},
      {"split_seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.split_seed = static_cast<std::uint64_t>(parse_size(k, v));
       }},
      {"learning_rate",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.learning_rate = parse_double(k, v);
       }},
      {"epochs",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.epochs = parse_size(k, v); }},
      {"patience",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.patience = parse_size(k, v); }},
      {"negative_ratio",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.negative_ratio = parse_double(k, v);
       }},
      {"layers",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.layers = parse_size(k, v); }},
      {"hidden_dim",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.hidden_dim = parse_size(k, v);
       }},
      {"output_dim",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.output_dim = parse_size(k, v);
       }},
      {"heads",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.heads = parse_size(k, v); }},
      {"scorer",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.scorer = parse_scorer_kind(v);
       }},
      {"leaky_slope",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.leaky_slope = parse_double(k, v);
       }},
      {"standardize_features",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.standardize_features = parse_bool(k, v);
       }},
      {"train_ratio",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train_ratio = parse_double(k, v);
       }},
      {"val_ratio",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.val_ratio = parse_double(k, v);
       }},
      {"test_ratio",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.test_ratio = parse_double(k, v);
       }},
      {"sbm_blocks",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sbm_blocks = parse_size(k, v);
       }},
      {"sbm_nodes_per_block",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sbm_nodes_per_block = parse_size(k, v);
       }},
      {"sbm_p_in",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sbm_p_in = parse_double(k, v);
       }},
      {"sbm_p_out",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sbm_p_out = parse_double(k, v);
       }},
      {"sbm_feature_dim",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sbm_feature_dim = parse_size(k, v);
       }},
      {"sbm_feature_signal",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sbm_feature_signal = parse_double(k, v);
       }},
      {"svm_lambda",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.svm_lambda = parse_double(k, v);
       }},
      {"svm_epochs",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.svm_epochs = parse_size(k, v);
       }},
      {"top_k",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.top_k = parse_size(k, v); }},
  };
  return table;
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second(cfg, key, value);
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  cfg.data_dir = CRIMEGAT_DATA_DIR;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    apply_override(cfg, key, value);
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string RunConfig::dataset_tag() const {
  if (dataset == "florentine" || dataset == "sbm") return dataset;
  std::string base = dataset;
  if (const auto slash = base.find_last_of('/'); slash != std::string::npos) {
    base = base.substr(slash + 1);
  }
  if (const auto dot = base.find_last_of('.'); dot != std::string::npos && dot > 0) {
    base = base.substr(0, dot);
  }
  return base.empty() ? "dataset" : base;
}

std::string RunConfig::resolved_out_dir() const {
  if (!out_dir.empty()) return out_dir;
  return "runs/" + dataset_tag() + "-seed" + std::to_string(seed);
}

SbmParams RunConfig::sbm_params() const {
  SbmParams p;
  p.blocks = sbm_blocks;
  p.nodes_per_block = sbm_nodes_per_block;
  p.p_in = sbm_p_in;
  p.p_out = sbm_p_out;
  p.feature_dim = sbm_feature_dim;
  p.feature_signal = sbm_feature_signal;
  return p;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.learning_rate = learning_rate;
  t.epochs = epochs;
  t.patience = patience;
  t.negative_ratio = negative_ratio;
  t.seed = seed;
  t.num_layers = layers;
  t.hidden_dim = hidden_dim;
  t.output_dim = output_dim;
  t.heads = heads;
  t.scorer = scorer;
  t.leaky_slope = leaky_slope;
  t.method = method;
  t.svm_lambda = svm_lambda;
  t.svm_epochs = svm_epochs;
  return t;
}

std::string config_to_text(const RunConfig& cfg) {
  const auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::map<std::string, std::string> kv = {
      {"dataset", cfg.dataset},
      {"format", cfg.format},
      {"features", cfg.features},
      {"data_dir", cfg.data_dir},
      {"out_dir", cfg.resolved_out_dir()},
      {"method", to_string(cfg.method)},
      {"seed", std::to_string(cfg.seed)},
      {"split_seed", std::to_string(cfg.effective_split_seed())},
      {"learning_rate", num(cfg.learning_rate)},
      {"epochs", std::to_string(cfg.epochs)},
      {"patience", std::to_string(cfg.patience)},
      {"negative_ratio", num(cfg.negative_ratio)},
      {"layers", std::to_string(cfg.layers)},
      {"hidden_dim", std::to_string(cfg.hidden_dim)},
      {"output_dim", std::to_string(cfg.output_dim)},
      {"heads", std::to_string(cfg.heads)},
      {"scorer", to_string(cfg.scorer)},
      {"leaky_slope", num(cfg.leaky_slope)},
      {"standardize_features", cfg.standardize_features ? "true" : "false"},
      {"train_ratio", num(cfg.train_ratio)},
      {"val_ratio", num(cfg.val_ratio)},
      {"test_ratio", num(cfg.test_ratio)},
      {"sbm_blocks", std::to_string(cfg.sbm_blocks)},
      {"sbm_nodes_per_block", std::to_string(cfg.sbm_nodes_per_block)},
      {"sbm_p_in", num(cfg.sbm_p_in)},
      {"sbm_p_out", num(cfg.sbm_p_out)},
      {"sbm_feature_dim", std::to_string(cfg.sbm_feature_dim)},
      {"sbm_feature_signal", num(cfg.sbm_feature_signal)},
      {"svm_lambda", num(cfg.svm_lambda)},
      {"svm_epochs", std::to_string(cfg.svm_epochs)},
      {"top_k", std::to_string(cfg.top_k)},
  };
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
  return out.str();
}


}  // namespace crimegat
