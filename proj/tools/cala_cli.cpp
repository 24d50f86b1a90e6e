// Command-line entry point: synth, train, eval, gradcheck.
//
// Log verbosity comes from CALA_LOG_LEVEL (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cala/commands.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("cala");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("CALA_LOG_LEVEL")) spdlog::cfg::helpers::load_levels(level);
}

cala::RunConfig build_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  cala::RunConfig cfg = config_path.empty() ? cala::RunConfig{} : cala::load_config(config_path);
  for (const auto& o : overrides) cala::apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Complementary-association training for composed image retrieval"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config key, key=value (repeatable)");

  auto* synth = app.add_subcommand("synth", "Generate the synthetic triplet dataset");
  auto* train = app.add_subcommand("train", "Train on the joint objective and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the validation set");
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  auto* show = app.add_subcommand("config", "Print the effective configuration as JSON");
  std::string corrupt_group;
  gradcheck->add_option("--corrupt-group", corrupt_group, "Perturb one group's analytic gradient (test hook)");

  CLI11_PARSE(app, argc, argv);

  try {
    const cala::RunConfig cfg = build_config(config_path, overrides);

    if (*synth) {
      const auto s = cala::cmd_synth(cfg);
      fmt::print("train records: {}\nval records: {}\n", s.n_train, s.n_val);
    } else if (*train) {
      const auto logs = cala::cmd_train(cfg);
      fmt::print("initial total loss: {:.6f}\nfinal total loss: {:.6f}\n", logs.front().total,
                 logs.back().total);
    } else if (*eval) {
      const auto report = cala::cmd_eval(cfg);
      fmt::print("{}", cala::format_report_table(report));
    } else if (*gradcheck) {
      cala::GradcheckOptions opts;
      if (!corrupt_group.empty()) opts.corrupt_group = corrupt_group;
      const auto report = cala::cmd_gradcheck(cfg, opts);
      fmt::print("{}", report.format());
      return report.passed ? 0 : 1;
    } else if (*show) {
      fmt::print("{}\n", cala::to_json(cfg).dump(2));
    }
  } catch (const cala::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  } catch (const cala::TrainingDiverged& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
