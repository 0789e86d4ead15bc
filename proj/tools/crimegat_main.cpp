// crimegat command-line interface: train, evaluate, explain, synth, split.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
// failure.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crimegat/config.hpp"
#include "crimegat/errors.hpp"
#include "crimegat/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value, applied after the file
  std::optional<std::string> dataset;
  std::optional<std::string> method;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "configuration file (key=value lines)");
  cmd->add_option("--set", args.overrides,
                  "override any config key, e.g. --set epochs=50 (repeatable)");
  cmd->add_option("--dataset", args.dataset, "dataset: florentine, sbm, or a file path");
  cmd->add_option("--method", args.method, "method: crimegat, gcn, sage, svm, pa");
  cmd->add_option("--out-dir", args.out_dir, "run output directory");
  cmd->add_option("--seed", args.seed, "global seed");
}

crimegat::RunConfig build_config(const CommonArgs& args) {
  crimegat::RunConfig cfg = args.config_path.empty()
                                ? crimegat::parse_config_text("")
                                : crimegat::parse_config_file(args.config_path);
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw crimegat::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    crimegat::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.dataset) crimegat::apply_override(cfg, "dataset", *args.dataset);
  if (args.method) crimegat::apply_override(cfg, "method", *args.method);
  if (args.out_dir) crimegat::apply_override(cfg, "out_dir", *args.out_dir);
  if (args.seed) crimegat::apply_override(cfg, "seed", std::to_string(*args.seed));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crimegat: graph-attention link prediction on small networks"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, explain_args, synth_args, split_args;

  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write run artifacts");
  add_common_options(train_cmd, train_args);

  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "evaluate trained methods on the test split");
  add_common_options(eval_cmd, eval_args);
  std::string eval_model;
  std::string eval_methods;
  bool eval_all = false;
  bool eval_jsonl = false;
  eval_cmd->add_option("--model", eval_model, "model file (single-method evaluation)");
  eval_cmd->add_option("--methods", eval_methods, "comma-separated method list");
  eval_cmd->add_flag("--all", eval_all,
                     "evaluate every method with a model file present, plus pa");
  eval_cmd->add_flag("--jsonl", eval_jsonl, "emit machine-readable JSON lines");

  CLI::App* explain_cmd =
      app.add_subcommand("explain", "export attention coefficients and key-node ranking");
  add_common_options(explain_cmd, explain_args);
  std::string explain_model;
  std::optional<std::size_t> explain_top_k;
  explain_cmd->add_option("--model", explain_model, "crimegat model file");
  explain_cmd->add_option("--top-k", explain_top_k, "number of ranked nodes to print");

  CLI::App* synth_cmd =
      app.add_subcommand("synth", "materialize the configured SBM dataset to files");
  add_common_options(synth_cmd, synth_args);

  CLI::App* split_cmd =
      app.add_subcommand("split", "write a split manifest without training");
  add_common_options(split_cmd, split_args);

  try {
    app.parse(argc, argv);

    if (train_cmd->parsed()) {
      crimegat::run_train(build_config(train_args), std::cout);
    } else if (eval_cmd->parsed()) {
      const crimegat::RunConfig cfg = build_config(eval_args);
      std::vector<crimegat::Method> methods;
      if (!eval_methods.empty()) {
        std::istringstream iss(eval_methods);
        std::string name;
        while (std::getline(iss, name, ',')) {
          if (!name.empty()) methods.push_back(crimegat::parse_method(name));
        }
      } else if (eval_all) {
        const crimegat::RunPaths paths(cfg);
        for (crimegat::Method m : {crimegat::Method::crimegat, crimegat::Method::gcn,
                                   crimegat::Method::sage, crimegat::Method::svm}) {
          if (std::filesystem::exists(paths.model(m))) methods.push_back(m);
        }
        methods.push_back(crimegat::Method::pa);
      } else {
        methods.push_back(cfg.method);
      }
      if (methods.empty()) throw crimegat::ConfigError("evaluate: no methods selected");
      crimegat::run_evaluate(cfg, methods, eval_model, std::cout, eval_jsonl);
    } else if (explain_cmd->parsed()) {
      const crimegat::RunConfig cfg = build_config(explain_args);
      crimegat::run_explain(cfg, explain_model, explain_top_k.value_or(cfg.top_k),
                            std::cout);
    } else if (synth_cmd->parsed()) {
      crimegat::run_synth(build_config(synth_args), std::cout);
    } else if (split_cmd->parsed()) {
      crimegat::run_split(build_config(split_args), std::cout);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const crimegat::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const crimegat::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const crimegat::Error& e) {
    // DataError, ContractError and any other library failure tied to inputs.
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
