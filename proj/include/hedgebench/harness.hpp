#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hedgebench/deephedge.hpp"
#include "hedgebench/dp.hpp"
#include "hedgebench/env.hpp"
#include "hedgebench/mcts.hpp"
#include "hedgebench/muzero.hpp"

namespace hedgebench {

// Configuration problems carry the dotted field path they were found at, so
// the CLI can point at the offending line of a hand-edited file.
struct ConfigError : std::runtime_error {
  std::string path;
  ConfigError(std::string p, const std::string& what)
      : std::runtime_error(p + ": " + what), path(std::move(p)) {}
};

struct DhAgentConfig {
  DeepHedgeConfig core;
  bool local_trap_init = false;  // shift head biases by atanh(1/2) after init
  int eval_paths = 100;
};

struct AzAgentConfig {
  AzConfig core;  // net spec is derived from hidden_layers/width at run time
  int hidden_layers = 4;
  int hidden_width = 256;
  int eval_paths = 100;
  bool eval_with_search = true;
};

struct MzAgentConfig {
  MzConfig core;
  int hidden_layers = 4;  // policy/value net
  int hidden_width = 512;
  std::vector<int> reservoir_sizes{10, 50, 200, 500};
};

// One experiment: the MDP and market blocks plus whichever agents run on
// them. scale multiplies every episode/path count (the sanctioned knob for
// running below paper scale); n_cycles is the number of independent seeded
// runs.
struct ExperimentConfig {
  std::string id;
  MdpConfig mdp;
  Market market{DummyConst(0.0), "dummy_const"};
  double scale = 1.0;
  int n_cycles = 1;
  std::uint64_t seed = 1;
  std::string out_dir = "runs";
  std::optional<DhAgentConfig> dh;
  std::optional<AzAgentConfig> az;
  std::optional<MzAgentConfig> mz;
  bool dp_oracle = false;
};

// Registered experiment with its table defaults; throws std::invalid_argument
// on unknown ids. The ids are the ones listed by experiment_ids().
ExperimentConfig registry_config(const std::string& id);

// JSON round trip. parse_experiment_config throws ConfigError with the field
// path on schema violations; experiment_config_json emits the full expanded
// document (the same schema registry configs are written with).
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& filename);
std::string experiment_config_json(const ExperimentConfig& cfg);

// Structural validation beyond parsing (ranges, block consistency). Throws
// ConfigError; parse_experiment_config calls this itself.
void validate_config(const ExperimentConfig& cfg);

// FNV-1a over the canonical config document with seed and out_dir stripped:
// two runs with equal hashes and equal seeds produce identical outputs.
std::string config_hash(const ExperimentConfig& cfg);

// counts scale as max(1, round(n * scale))
long long scaled_count(long long n, double scale);

// ---- run records and aggregates ----

struct RunRecord {
  std::string agent;  // "dh" | "alphazero" | "muzero"
  int cycle = 0;
  std::uint64_t seed = 0;
  double mean_loss = 0.0;         // raw loss units
  double mean_correct = 0.0;      // counting tasks
  double success_fraction = 0.0;  // fraction of eval paths with every action correct
  bool success = false;           // counting tasks: success_fraction == 1
  int modal_t0 = -1;              // grid index of the modal first action
  std::vector<int> t0_histogram;
};

struct AgentStats {
  std::string agent;
  int n_runs = 0;
  std::string metric;  // the field mean/p5/p95 summarize
  double mean = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
  double success_fraction = 0.0;       // counting tasks: successful runs / runs
  std::vector<long long> histogram;    // counting: rounded correct counts 0..n;
                                       // replication: modal first action per run
};

struct RunStats {
  std::vector<RunRecord> records;
  std::vector<AgentStats> agents;
};

// Aggregates are a pure fold over the records (percentiles by linear
// interpolation), so anything written to disk can be recomputed from the
// per-run records stored alongside.
RunStats aggregate(const std::vector<RunRecord>& records, const Env& env);

// ---- running ----

struct ExperimentOutcome {
  std::string dir;          // directory the artifacts landed in
  std::string hash;         // config hash, also stamped into every file
  RunStats stats;           // per-cycle agent runs (empty for dp-only)
  SampleEfficiencyResult sample_eff;  // sample_efficiency runs only
  ModalityReport modality{0, 0};      // dp_oracle runs
  double root_value = 0.0;            // dp_oracle runs
  int greedy_action = -1;
  std::vector<std::string> files;  // artifact names relative to dir
};

// Validates, creates out_dir/<id>/, runs every configured agent for n_cycles
// independent seeded runs (sample_efficiency runs its shared-reservoir
// protocol instead), and writes config.json, per-run records, aggregate CSVs
// and SVG plots. Fully deterministic given the seed.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// DP export used by the CLI `dp` subcommand: Q slice at a state (the
// config's initial state unless overridden) plus an optional Q(cash, action)
// heatmap sweep.
struct DpExportRequest {
  std::optional<MdpState> state;
  std::vector<double> heatmap_cash;  // empty: no heatmap
};

ExperimentOutcome dp_export(const ExperimentConfig& cfg, const DpExportRequest& req,
                            std::ostream* log = nullptr);

}  // namespace hedgebench
