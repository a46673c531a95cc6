#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hedgebench/deephedge.hpp"
#include "hedgebench/env.hpp"
#include "hedgebench/market.hpp"
#include "hedgebench/mcts.hpp"
#include "hedgebench/neural.hpp"

namespace hedgebench {

struct DynamicsConfig {
  int hidden_layers = 5;
  int hidden_width = 512;
  int epochs = 5000;  // the loss flattens far earlier; runs may dial this down
  int batch_size = 32;
  double lr = 1e-3;
};

// one observed (step, price) lattice cell with its empirical move frequencies
struct DynamicsCell {
  int k = 0;
  double price = 0.0;
  int count = 0;
  std::array<double, 3> freq{};  // (up, mid, down)
};

// Learned market kernel: (time step, price) -> distribution over one-tick
// moves. Frozen after fitting; anything the reservoir never visited is still
// answered (the network extrapolates) but reported as uncovered.
class DynamicsModel {
 public:
  DynamicsModel(Mlp net, int horizon, double start_price, std::vector<DynamicsCell> cells,
                double kl_initial, double kl_final);

  std::array<double, 3> probs(int k, double price) const;  // (up, mid, down)
  bool covered(int k, double price) const;
  int observed(int k, double price) const;  // transitions seen in that cell

  const std::vector<DynamicsCell>& cells() const { return cells_; }
  const Mlp& net() const { return net_; }
  int horizon() const { return horizon_; }
  double kl_initial() const { return kl_initial_; }
  double kl_final() const { return kl_final_; }
  int n_transitions() const { return n_transitions_; }

 private:
  Mlp net_;
  int horizon_;
  double start_price_;
  std::vector<DynamicsCell> cells_;
  std::map<std::pair<int, long long>, int> index_;  // (k, price key) -> cell
  double kl_initial_, kl_final_;
  int n_transitions_ = 0;
};

// Fits the move distribution to the reservoir's empirical frequencies by
// minimizing their KL divergence against the network output; cells enter each
// batch in proportion to how often the reservoir visited them.
DynamicsModel fit_dynamics(const PathReservoir& reservoir, const DynamicsConfig& cfg,
                           std::uint64_t seed);

// Search-time market half-step that rolls the learned model on the chain's
// price lattice. The model and counter must outlive the sampler; queries at
// cells the reservoir never covered bump `uncovered` when given.
TransitionSampler make_model_sampler(const Env& env, const DynamicsModel& model,
                                     long long* uncovered = nullptr);

// the true kernel as a sampler (ablation baseline); queries are counted
TransitionSampler make_kernel_sampler(const Env& env);

struct MzConfig {
  DynamicsConfig dynamics;
  AzConfig az;             // search score is forced to Mz; empty net spec
                           // defaults to az_net_spec(env, 4, 512)
  int eval_paths = 1000;   // eval-split paths scored after training
  bool use_true_kernel = false;  // ablation: plan with the market kernel
  std::ostream* log = nullptr;   // reshuffle and cycle progress lines
};

struct MzTrainResult {
  AzTrainResult core;
  DynamicsModel dynamics;
  AzEvalReport eval;                 // search-free play over the eval split
  std::uint64_t kernel_queries = 0;  // audit counter; 0 unless use_true_kernel
  int reshuffles = 0;                // times the episode dealer wrapped around
  long long uncovered_queries = 0;   // sampler hits outside reservoir coverage
};

// Full MuZero run on frozen data: fit the dynamics model on the train split,
// run the self-play/train/gate loop with searches simulating inside that model
// while episodes and validation consume train-split paths only, then score the
// final policy head on the eval split without search. Throws std::logic_error
// if the true kernel was queried during a pure-reservoir run.
MzTrainResult train_on_reservoir(const Env& env, const PathReservoir& train_split,
                                 const PathReservoir& eval_split, const MzConfig& cfg,
                                 std::uint64_t seed);

// p-th percentile (p in [0, 100]) with linear interpolation between order
// statistics, matching the usual numpy default
double percentile_linear(std::vector<double> xs, double p);

struct SampleEfficiencyConfig {
  std::vector<int> sizes{10, 50, 200, 500};
  int n_runs = 100;
  int eval_paths = 1000;
  DeepHedgeConfig dh;
  MzConfig mz;
  std::uint64_t seed = 1;
  std::ostream* log = nullptr;
};

struct SampleEfficiencyRow {
  std::string agent;
  int reservoir_size = 0;
  int run = 0;
  double eval_mean_loss = 0.0;
};

struct SampleEfficiencyStat {
  std::string agent;
  int reservoir_size = 0;
  double mean = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
};

struct SampleEfficiencyResult {
  std::vector<SampleEfficiencyRow> rows;
  std::vector<SampleEfficiencyStat> stats;
};

// For each reservoir size and run: draw a fresh reservoir, train deep hedging
// and MuZero on the identical train split, and score both on the identical
// held-out split. Aggregates mean/p5/p95 of the eval losses per agent & size.
SampleEfficiencyResult sample_efficiency_experiment(const Env& env,
                                                    const SampleEfficiencyConfig& cfg);

void write_rows_csv(std::ostream& out, const std::vector<SampleEfficiencyRow>& rows);
void write_stats_csv(std::ostream& out, const std::vector<SampleEfficiencyStat>& stats);

}  // namespace hedgebench
