#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "crimegat/config.hpp"
#include "crimegat/graph.hpp"
#include "crimegat/metrics.hpp"
#include "crimegat/train.hpp"

namespace crimegat {

// Artifact locations inside one run's output directory.
struct RunPaths {
  std::filesystem::path out_dir;
  explicit RunPaths(const RunConfig& cfg) : out_dir(cfg.resolved_out_dir()) {}
  std::filesystem::path manifest() const { return out_dir / "split_manifest.txt"; }
  std::filesystem::path model(Method m) const {
    return out_dir / (std::string("model_") + to_string(m) + ".txt");
  }
  std::filesystem::path history(Method m) const {
    return out_dir / (std::string("history_") + to_string(m) + ".jsonl");
  }
  std::filesystem::path summary(Method m) const {
    return out_dir / (std::string("summary_") + to_string(m) + ".txt");
  }
  std::filesystem::path metrics() const { return out_dir / "metrics_test.txt"; }
  std::filesystem::path attention() const { return out_dir / "attention.txt"; }
};

// Resolves florentine/sbm/file datasets and applies feature standardization
// when configured.
Graph load_dataset(const RunConfig& cfg);

void write_split_manifest(std::ostream& out, const EdgeSplit& split);
void write_split_manifest_file(const std::string& path, const EdgeSplit& split);
EdgeSplit read_split_manifest(std::istream& in);
EdgeSplit read_split_manifest_file(const std::string& path);

// train: split + negatives + configured method; writes the split manifest,
// the model file, the history export and a run summary.
void run_train(const RunConfig& cfg, std::ostream& log);

// evaluate: Table-style comparison rows on the test split for the requested
// methods, read back from the run directory's artifacts.
std::vector<MetricsReport> run_evaluate(const RunConfig& cfg,
                                        const std::vector<Method>& methods,
                                        const std::string& model_override,
                                        std::ostream& out, bool jsonl);

// explain: per-edge attention export plus a top-k ranking of nodes by total
// received attention mass (self-loop terms excluded from the ranking).
void run_explain(const RunConfig& cfg, const std::string& model_override,
                 std::size_t top_k, std::ostream& out);

// synth: materialize the configured SBM graph as edge/feature files.
void run_synth(const RunConfig& cfg, std::ostream& log);

// split: write the split manifest without training.
void run_split(const RunConfig& cfg, std::ostream& log);

}  // namespace crimegat
