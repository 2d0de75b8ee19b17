// Command-line front end for the crash-density pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 input/validation error,
// 3 improvement hypothesis failed (evaluate/grid with assert_improvement).

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "rcx/errors.hpp"
#include "rcx/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

rcx::PipelineConfig make_config(const CommonArgs& args) {
  if (args.config_path.empty()) {
    return rcx::config_from_overrides(args.overrides);
  }
  return rcx::load_config(args.config_path, args.overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Roadway-complexity crash-density pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  app.add_option("-c,--config", args.config_path,
                 "Pipeline config JSON (defaults apply when omitted)");
  app.add_option("--set", args.overrides,
                 "Override a config field: key.path=json_value");

  using Runner = std::function<int(const rcx::PipelineConfig&)>;
  const std::vector<std::pair<std::string, Runner>> commands = {
      {"synth", rcx::cmd_synth},
      {"ingest", rcx::cmd_ingest},
      {"featurize", rcx::cmd_featurize},
      {"kde", rcx::cmd_kde},
      {"train-encoder", rcx::cmd_train_encoder},
      {"extract", rcx::cmd_extract},
      {"train-predictor", rcx::cmd_train_predictor},
      {"evaluate", rcx::cmd_evaluate},
      {"grid", rcx::cmd_grid},
      {"report", rcx::cmd_report},
  };
  const std::vector<std::pair<std::string, std::string>> descriptions = {
      {"synth", "Generate the synthetic world files"},
      {"ingest", "Parse and validate all world inputs"},
      {"featurize", "Sample frames and compute the feature columns"},
      {"kde", "Label frames by crash density and write the dataset"},
      {"train-encoder", "Train the complexity-infused encoder"},
      {"extract", "Append complexity-infused features to the dataset"},
      {"train-predictor", "Train one crash-density predictor"},
      {"evaluate", "Compare baseline vs +infused and attribute features"},
      {"grid", "Run the full experiment grid and write the reports"},
      {"report", "Re-render reports from report.json (hash-checked)"},
  };

  Runner selected;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    CLI::App* sub =
        app.add_subcommand(commands[i].first, descriptions[i].second);
    sub->fallthrough();  // -c/--set may follow the subcommand name
    const Runner runner = commands[i].second;
    sub->callback([&selected, runner]() { selected = runner; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const rcx::PipelineConfig cfg = make_config(args);
    return selected(cfg);
  } catch (const rcx::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
