#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hedgebench/experiments.hpp"
#include "hedgebench/harness.hpp"

namespace hb = hedgebench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// an id resolves through the registry, anything else is read as a config file
hb::ExperimentConfig resolve_config(const std::string& target) {
  if (hb::is_registered_experiment(target)) return hb::registry_config(target);
  return hb::load_experiment_config(target);
}

void apply_overrides(hb::ExperimentConfig& cfg, std::optional<double> scale,
                     std::optional<int> cycles, std::optional<std::uint64_t> seed,
                     std::optional<std::string> out) {
  if (scale) cfg.scale = *scale;
  if (cycles) cfg.n_cycles = *cycles;
  if (seed) cfg.seed = *seed;
  if (out) cfg.out_dir = *out;
  hb::validate_config(cfg);
}

hb::MdpState parse_state(const hb::Env& env, const std::string& text) {
  std::istringstream in(text);
  std::vector<double> f;
  std::string tok;
  while (std::getline(in, tok, ',')) f.push_back(std::stod(tok));
  if (f.size() != 4)
    throw hb::ConfigError("--state", "expected \"k,cash,holdings,price\"");
  hb::MdpState s = env.initial_state();
  s.k = static_cast<int>(f[0]);
  s.cash = f[1];
  s.holdings = f[2];
  s.price = f[3];
  if (s.k < 0 || s.k > env.horizon())
    throw hb::ConfigError("--state", "k outside [0, horizon]");
  return s;
}

std::vector<double> parse_sweep(const std::string& text) {
  double lo = 0, step = 0;
  int n = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%d", &lo, &step, &n) != 3 || n < 1 || step <= 0)
    throw hb::ConfigError("--heatmap", "expected \"lo:step:count\" with count >= 1");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + step * i);
  return out;
}

int cmd_list() {
  for (const std::string& id : hb::experiment_ids())
    std::cout << id << "  " << hb::experiment_description(id) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hedgebench: planning and hedging experiments on small market MDPs"};
  app.require_subcommand(1);

  std::string target, state_text, sweep_text;
  std::optional<double> scale;
  std::optional<int> cycles;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  CLI::App* run = app.add_subcommand("run", "run an experiment and write its artifacts");
  run->add_option("target", target, "registered experiment id or config file path")
      ->required();
  run->add_option("--scale", scale, "episode/path count multiplier in (0, 1]");
  run->add_option("--cycles", cycles, "independent training cycles");
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out_dir, "output directory root");

  CLI::App* list = app.add_subcommand("list", "list registered experiments");

  CLI::App* dp = app.add_subcommand("dp", "solve the exact DP and export Q slices");
  dp->add_option("target", target, "registered experiment id or config file path")
      ->required();
  dp->add_option("--state", state_text, "slice state as \"k,cash,holdings,price\"");
  dp->add_option("--heatmap", sweep_text, "cash sweep \"lo:step:count\" for a Q heatmap");
  dp->add_option("--out", out_dir, "output directory root");

  CLI::App* check = app.add_subcommand("check", "validate a config and print its hash");
  check->add_option("target", target, "registered experiment id or config file path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (list->parsed()) return cmd_list();

    hb::ExperimentConfig cfg = resolve_config(target);

    if (check->parsed()) {
      hb::validate_config(cfg);
      std::cout << "ok " << cfg.id << " config_hash=" << hb::config_hash(cfg) << '\n';
      return kExitOk;
    }

    if (dp->parsed()) {
      apply_overrides(cfg, std::nullopt, std::nullopt, std::nullopt, out_dir);
      hb::Env env(cfg.mdp, cfg.market);
      hb::DpExportRequest req;
      if (!state_text.empty()) req.state = parse_state(env, state_text);
      if (!sweep_text.empty()) req.heatmap_cash = parse_sweep(sweep_text);
      hb::ExperimentOutcome out = hb::dp_export(cfg, req, &std::cout);
      std::cout << "wrote " << out.dir << " (config " << out.hash << ")\n";
      return kExitOk;
    }

    apply_overrides(cfg, scale, cycles, seed, out_dir);
    hb::ExperimentOutcome out = hb::run_experiment(cfg, &std::cout);
    std::cout << "wrote " << out.dir << " (config " << out.hash << ")\n";
    return kExitOk;
  } catch (const hb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
