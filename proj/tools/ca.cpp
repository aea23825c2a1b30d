// ca: command-line driver for the neural correspondence analysis pipeline.

#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nca/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Neural correspondence analysis pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> sets;

  const std::map<std::string, std::pair<std::string, std::function<int(const nca::RunConfig&)>>> commands = {
      {"ingest", {"Parse, filter, encode and split the expense CSV", nca::cmd_ingest}},
      {"train", {"Train the two encoders on the encoded dataset", nca::cmd_train}},
      {"analyze", {"Build the factor plane, outlier rankings and plots", nca::cmd_analyze}},
      {"synth", {"Sample a discrete joint distribution with its exact CA", nca::cmd_synth}},
      {"compare-oracle", {"Compare trained factor scores with classical CA", nca::cmd_compare_oracle}},
  };
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--seed", seed, "Top-level seed (overrides run.seed)");
    sub->add_option("--out", out, "Output directory (overrides paths.out)");
    sub->add_option("--set", sets, "Override a config key: section.key=value")->take_all();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? nca::kExitOk : nca::kExitConfig;
  }

  if (seed) sets.push_back("run.seed=" + std::to_string(*seed));
  if (out) sets.push_back("paths.out=" + *out);

  nca::RunConfig cfg;
  try {
    cfg = nca::load_config(config_path, sets);
  } catch (const nca::Error& e) {
    nca::log(nca::LogLevel::Error, e.what());
    return nca::kExitConfig;
  }

  for (const auto& [name, entry] : commands)
    if (app.got_subcommand(name)) {
      try {
        return entry.second(cfg);
      } catch (const std::exception& e) {
        nca::log(nca::LogLevel::Error, std::string(name) + ": unexpected failure: " + e.what());
        return name == "ingest" ? nca::kExitIngest : name == "train" ? nca::kExitTrain : nca::kExitAnalysis;
      }
    }
  return nca::kExitConfig;
}
