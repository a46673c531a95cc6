#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hedgebench/env.hpp"
#include "hedgebench/neural.hpp"

namespace hedgebench {

// TargetDistance scores each action against the step's correct action with
// the two-mode distance (global minimum at the target, a slightly worse local
// minimum at its mirror image); Utility scores the terminal P&L through the
// configured utility.
enum class HedgeLoss { TargetDistance, Utility };

struct HedgeInputSpec {
  bool prev_action = true;
  bool price = true;  // divided by the initial price when it is nonzero
  bool time = false;  // k / horizon
  int dim() const { return (prev_action ? 1 : 0) + (price ? 1 : 0) + (time ? 1 : 0); }
};

struct DeepHedgeConfig {
  int hidden_layers = 2;
  int hidden_width = 64;
  Activation activation = Activation::Relu;
  HedgeInputSpec inputs;
  HedgeLoss loss = HedgeLoss::TargetDistance;
  double bimodal_gap = 0.05;  // penalty of the wrong mode in TargetDistance
  int epochs = 50;
  int batch_size = 32;
  long long total_episodes = 150000;
  double lr = 1e-3;
  double init_scale = 1.0;  // multiplier on the default weight init
};

// One tanh-headed network per decision step; outputs are mapped affinely from
// (-1, 1) onto [grid.front(), grid.back()].
class PolicyStack {
 public:
  PolicyStack(DeepHedgeConfig cfg, const MdpConfig& mdp, std::uint64_t seed);

  const DeepHedgeConfig& config() const { return cfg_; }
  int horizon() const { return static_cast<int>(nets_.size()); }
  Mlp& net(int k) { return nets_[k]; }
  const Mlp& net(int k) const { return nets_[k]; }
  double action_low() const { return lo_; }
  double action_high() const { return hi_; }

  double map_output(double raw) const { return lo_ + 0.5 * (raw + 1.0) * (hi_ - lo_); }

  // adds delta to each network's output-head bias; used to steer the initial
  // outputs into a chosen region without touching trainability
  void shift_head_bias(double delta);

 private:
  DeepHedgeConfig cfg_;
  std::vector<Mlp> nets_;
  double lo_, hi_;
};

// everything one batched pass produces; workspaces are kept only when taped
struct HedgeRollout {
  Matrix actions;   // batch x horizon, already in action units
  Vector path_loss; // per-path loss
  double mean_loss = 0.0;
  std::vector<Mlp::Workspace> ws;
  std::vector<Matrix> raw;  // tanh outputs per step
};

// paths: batch x (horizon+1) price rows
HedgeRollout rollout(PolicyStack& stack, const Matrix& paths, const Env& env,
                     bool tape);

// gradient of the mean rollout loss w.r.t. every network's parameters,
// backpropagated through the action chain (and the wealth recursion for
// Utility mode); grads must hold one zeroed vector per step
void accumulate_gradients(PolicyStack& stack, const HedgeRollout& ro,
                          const Matrix& paths, const Env& env,
                          std::vector<Vector>& grads);

struct HedgeTrainResult {
  std::vector<double> loss_curve;  // per-epoch mean training loss
};

HedgeTrainResult train(PolicyStack& stack, const PathSource& source, const Env& env,
                       std::uint64_t seed);

struct HedgeEvalReport {
  double mean_loss = 0.0;
  std::vector<int> t0_histogram;  // snapped first actions over the eval paths
  double success_rate = 0.0;      // counting tasks: every step correct
  double mean_correct = 0.0;      // counting tasks: correct steps per path
};

HedgeEvalReport evaluate(PolicyStack& stack, const Matrix& paths, const Env& env);

// nearest grid action, ties to the lower index
int snap_to_grid(double action, const std::vector<double>& grid);

Matrix paths_matrix(const std::vector<std::vector<double>>& paths);

// canonical fingerprint of a training setup, for run artifacts
std::string hedge_config_fingerprint(const DeepHedgeConfig& cfg, const MdpConfig& mdp);

void save_run_artifact(const std::string& filename, const std::string& config_hash,
                       std::uint64_t seed, const std::vector<double>& loss_curve,
                       const std::vector<int>& histogram,
                       const std::map<std::string, bool>& flags);

}  // namespace hedgebench
