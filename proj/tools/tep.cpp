#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tep/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> sets;
};

// Registers a flag that overrides config key `key` when given.
void add_override(CLI::App* app, Flags& flags, const std::string& flag, const std::string& key,
                  const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&flags, key](const std::string& v) { flags.overrides[key] = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermodynamic equilibrium-propagation toolkit"};
  app.require_subcommand(1);
  Flags flags;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"verify", "Check the exact identities on random enumerable instances"},
      {"train", "Train the layered network with backprop, EP or path-integral EP"},
      {"sweep", "Alignment and SNR sweep over the nudging strength"},
      {"diagnose", "Gradient and sampler correctness checks"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "Flat key = value config file");
    sub->add_option("--set", flags.sets, "Extra key=value override (repeatable)");
    add_override(sub, flags, "--seed", "seed", "Master seed");
    add_override(sub, flags, "--out", "out", "Output directory");
    add_override(sub, flags, "--threads", "threads", "OpenMP thread count (0 keeps the default)");
    if (name == "verify") add_override(sub, flags, "--n-instances", "n_instances", "Random instances");
    if (name == "train" || name == "sweep") {
      add_override(sub, flags, "--images", "images", "IDX training images");
      add_override(sub, flags, "--labels", "labels", "IDX training labels");
      add_override(sub, flags, "--limit", "limit", "Use only the first N training examples");
    }
    if (name == "train") {
      add_override(sub, flags, "--method", "method", "backprop, ep or path");
      add_override(sub, flags, "--beta", "beta", "EP nudging strength");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tep::cli::kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  tep::config::RunConfig cfg;
  try {
    if (!flags.config.empty()) cfg = tep::config::RunConfig::from_file(flags.config);
    for (const auto& kv : flags.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
        return tep::cli::kUsage;
      }
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : flags.overrides) cfg.set(key, value);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return tep::cli::kUsage;
  }
  return tep::cli::run_command(command, cfg, std::cerr);
}
