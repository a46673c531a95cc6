#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <vector>

#include "hedgebench/dp.hpp"
#include "hedgebench/env.hpp"
#include "hedgebench/neural.hpp"

namespace hedgebench {

// Upper-confidence selection scores. The engine takes the argmax over feasible
// edges with lowest-index tie breaking, so only relative values matter.

// classic UCB1: mean + w sqrt(ln N / N_a); an unvisited edge scores +infinity
double ucb1(double mean, double n, double n_a, double w);

// AlphaZero variant: qhat + w * prior * sqrt(ln n_s) / (n_sa + 1)
double az_score(double qhat, double prior, double n_s, double n_sa, double w);

// MuZero variant: the prior bonus picks up the slowly growing factor
// w1 + ln((n_s + w2 + 1) / w2)
double mz_score(double qhat, double prior, double n_s, double n_sa, double w1, double w2);

// Leaf evaluation: value in scaled units [-1, 1] plus priors over the full
// action grid (the engine masks and renormalises over the feasible subset).
struct PolicyValue {
  double value = 0.0;
  std::vector<double> priors;
};

using NetEvaluator = std::function<PolicyValue(const MdpState&)>;

// Market half-step used inside the tree: (decision index, price) -> next
// price. Search defaults to the true kernel; MuZero swaps in its learned model.
using TransitionSampler = std::function<double(int k, double price, Rng& rng)>;

struct SearchConfig {
  enum class Score { Uct, Az, Mz };
  Score score = Score::Az;
  int n_sims = 25;
  double w = 1.0;      // exploration weight for Uct / Az
  double mz_w1 = 1.25;  // MuZero log-bonus constants
  double mz_w2 = 19652.0;
  double price_quantum = 0.01;  // chance outcomes aggregate on this grid

  static SearchConfig uct(int n_sims);  // w = sqrt(2)
  static SearchConfig az(int n_sims, double w = 1.0);
  static SearchConfig mz(int n_sims, double w1 = 1.25, double w2 = 19652.0);
};

// The search tree, exposed for invariant checks. Decision nodes alternate with
// implicit chance nodes: every edge holds its sampled outcomes in `children`,
// keyed by llround(price / price_quantum), so repeat draws of the same move
// aggregate into one child.
struct SearchTree {
  struct Edge {
    int action = -1;  // grid index
    int n = 0;
    double w_sum = 0.0;  // total backed-up return
    std::map<long long, int> children;

    double q() const { return n > 0 ? w_sum / n : 0.0; }
  };
  struct Node {
    MdpState state;
    bool closed = false;        // terminal or dead end: no edges, fixed value
    double closed_value = 0.0;  // what a closed node backs up
    int n_s = 0;
    std::vector<double> priors;  // per edge, simplex over the feasible set
    std::vector<Edge> edges;     // one per feasible action
  };

  std::vector<Node> nodes;  // nodes[0] is the root

  const Node& root() const { return nodes.front(); }
};

// Optional extras threaded through a search call.
struct SearchHooks {
  TransitionSampler sampler;       // empty: sample the env's true kernel
  SearchTree* tree_out = nullptr;  // receives the final tree
  std::ostream* trace = nullptr;   // JSON-lines simulation log + edge dump
};

struct SearchResult {
  std::vector<int> actions;  // feasible grid indices at the root
  std::vector<int> visits;   // per slot; sums to n_sims
  std::vector<double> q;     // per-slot mean backed-up return
  int best_slot = 0;         // visit argmax, lowest index on ties

  int best_action() const { return actions[best_slot]; }
  // visit distribution aligned with the full grid, zeros off the feasible set
  std::vector<double> full_dist(int n_actions) const;
};

// Runs n_sims simulations from `root`. The root is expanded structurally
// before the first simulation (no simulation is consumed by it), so root
// visits sum exactly to n_sims. Uct evaluates leaves by uniform random
// rollout; Az/Mz require an evaluator. Throws std::invalid_argument for a
// terminal root or missing evaluator, std::runtime_error for a dead-end root.
SearchResult search(const Env& env, const MdpState& root, const SearchConfig& cfg,
                    const NetEvaluator& net, Rng& rng, const SearchHooks* hooks = nullptr);

// ---- AlphaZero nets ----

// network inputs: (k / horizon, holdings, price scaled by the start price
// when that is nonzero, accumulated gains slot)
Vector az_features(const Env& env, const MdpState& s);
inline constexpr int kAzFeatureDim = 4;
inline constexpr int kAzPolicyHead = 0;
inline constexpr int kAzValueHead = 1;

// dual-head policy/value spec: softmax over the grid plus a tanh scalar
MlpSpec az_net_spec(const Env& env, int hidden_layers = 4, int hidden_width = 256);

// wraps a dual-head net; the net must outlive the evaluator
NetEvaluator make_net_evaluator(const Env& env, const Mlp& net);

// DP-backed oracle: value = scaled V*(s), priors = softmax(Q*(s, .) / tau)
// over the feasible set
NetEvaluator make_oracle_evaluator(const Env& env, const DpSolution& dp, double tau = 0.1);

// ---- self-play and replay ----

struct ReplayEntry {
  Vector features;
  std::vector<double> policy_target;  // full-grid visit distribution
  double z = 0.0;                     // scaled terminal return of the episode
};

// Fixed-capacity ring: once full, pushes overwrite the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  const ReplayEntry& operator[](std::size_t i) const { return entries_[i]; }

  void push(ReplayEntry entry);
  // uniform without replacement; a batch larger than the buffer returns
  // every index once
  std::vector<int> sample_indices(int batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<ReplayEntry> entries_;
};

// One episode against the fixed price path: a fresh search per decision, the
// move sampled from the visit distribution, and every entry stamped with the
// episode's scaled terminal return.
struct EpisodeResult {
  std::vector<ReplayEntry> entries;  // one per decision step
  std::vector<int> actions;          // grid indices taken
  MdpState terminal;
  double z = 0.0;
  bool dead_end = false;
};

EpisodeResult self_play_episode(const Env& env, const SearchConfig& cfg,
                                const NetEvaluator& net, const std::vector<double>& path,
                                Rng& rng, const SearchHooks* hooks = nullptr);

// ---- training ----

struct AzConfig {
  MlpSpec net;          // az_net_spec(...) unless overridden
  SearchConfig search;  // Az score, 25 sims unless overridden
  int cycles = 30;
  int episodes_per_cycle = 5000;
  int epochs = 10;
  int batch_size = 64;
  double lr = 1e-3;
  int validation_paths = 10000;
  // gate on the raw policy head (cheap) or on full searches per move
  bool validate_with_search = false;
  // read "simulations per episode" literally: split the budget across moves
  bool divide_sims_across_moves = false;
  std::size_t replay_capacity = 0;  // 0: one cycle's worth of entries
};

struct AzCycleRecord {
  int cycle = 0;
  double selfplay_mean_z = 0.0;
  double train_loss_first = 0.0;
  double train_loss_last = 0.0;
  double incumbent_score = 0.0;
  double candidate_score = 0.0;
  bool accepted = false;
};

// callable supplying the next training or validation path
using PathFn = std::function<std::vector<double>(Rng& rng)>;

// One self-play / train / validate round. The candidate is trained on the
// replay buffer and replaces `net` only if its mean validation return strictly
// improves on the incumbent's over the same fresh paths.
AzCycleRecord train_cycle(Mlp& net, ReplayBuffer& replay, const Env& env, const AzConfig& cfg,
                          const PathFn& episode_paths, const PathFn& val_paths, Rng& rng,
                          const SearchHooks* hooks = nullptr);
AzCycleRecord train_cycle(Mlp& net, ReplayBuffer& replay, const Env& env, const AzConfig& cfg,
                          const PathSource& episode_source, const PathSource& val_source,
                          Rng& rng, const SearchHooks* hooks = nullptr);

// Same round against a fixed validation deck: only the candidate is re-scored
// each cycle, the incumbent's deck score is carried in `incumbent_score` and
// refreshed on acceptance. (With validate_with_search both nets still play the
// deck every cycle on identically seeded simulation streams.)
AzCycleRecord train_cycle(Mlp& net, double& incumbent_score, ReplayBuffer& replay,
                          const Env& env, const AzConfig& cfg, const PathFn& episode_paths,
                          const std::vector<std::vector<double>>& val_deck, Rng& rng,
                          const SearchHooks* hooks = nullptr);

// Greedy policy-head rollouts over the given paths, advanced in lockstep so
// each step costs one batched forward (eval mode; running stats untouched).
// Dead ends score env.dead_end_scaled(), everything else env.scaled_return.
std::vector<double> policy_argmax_returns(const Env& env, Mlp& net,
                                          const std::vector<std::vector<double>>& paths);

// mean of policy_argmax_returns, 0 for an empty deck
double policy_deck_score(const Env& env, Mlp& net,
                         const std::vector<std::vector<double>>& deck);

struct AzTrainResult {
  Mlp net;
  std::vector<AzCycleRecord> cycles;
};

// Full run from a fresh net, with episodes sampled from the true market and
// gating against a validation deck drawn once per run.
AzTrainResult az_train(const Env& env, const AzConfig& cfg, std::uint64_t seed);

// ---- evaluation ----

struct AzEvalReport {
  int n_paths = 0;
  double mean_z = 0.0;
  double mean_loss = 0.0;  // raw loss units
  double mean_correct = 0.0;
  double success_fraction = 0.0;  // counting tasks: every action correct
  std::vector<int> t0_histogram;  // first-move counts over the full grid
};

// Greedy play over fresh paths: per-move search with visit-argmax acting when
// `with_search`, otherwise the evaluator's feasible prior argmax.
AzEvalReport az_evaluate(const Env& env, const NetEvaluator& policy, const SearchConfig& cfg,
                         const PathSource& source, int n_paths, Rng& rng,
                         bool with_search = true, const SearchHooks* hooks = nullptr);

// same playout, but scoring each provided path exactly once
AzEvalReport az_evaluate_paths(const Env& env, const NetEvaluator& policy,
                               const SearchConfig& cfg,
                               const std::vector<std::vector<double>>& paths, Rng& rng,
                               bool with_search = true, const SearchHooks* hooks = nullptr);

}  // namespace hedgebench
