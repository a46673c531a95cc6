#pragma once

#include <optional>
#include <vector>

#include "hedgebench/market.hpp"
#include "hedgebench/replication.hpp"
#include "hedgebench/rng.hpp"

namespace hedgebench {

// What the episode is scored on. Replication scores the terminal P&L through
// the utility; the two sequence tasks score the count of per-step correct
// actions (TargetSequence against a fixed target list, SignMatch against the
// current market signal).
struct TaskSpec {
  enum class Kind { Replication, TargetSequence, SignMatch };
  Kind kind = Kind::Replication;
  std::vector<double> targets;

  static TaskSpec replication() { return {}; }
  static TaskSpec target_sequence(std::vector<double> targets) {
    return {Kind::TargetSequence, std::move(targets)};
  }
  static TaskSpec sign_match() { return {Kind::SignMatch, {}}; }

  bool is_counting() const { return kind != Kind::Replication; }
  bool action_correct(int k, double price, double action) const;
  // the action the counting tasks score as correct; throws for Replication
  double target_action(int k, double price) const;
};

struct MdpConfig {
  int horizon = 5;
  double p0 = 0.0;
  double initial_cash = 0.0;
  double initial_holdings = 0.0;
  std::vector<double> action_grid;
  CostSpec cost;
  UtilitySpec utility;
  PayoffSpec payoff;
  std::optional<double> cash_min;
  std::optional<double> cash_max;
  TaskSpec task;
  RewardScale scale;
};

// Episode mechanics over MdpState, split into the decision half-step (trade)
// and the chance half-step (market move) so tree search can hang chance nodes
// off decision edges. The environment itself is stateless and cheap to share.
class Env {
 public:
  Env(MdpConfig config, Market market);

  const MdpConfig& config() const { return config_; }
  const Market& market() const { return market_; }
  int horizon() const { return config_.horizon; }
  int n_actions() const { return static_cast<int>(config_.action_grid.size()); }
  double action_value(int index) const { return config_.action_grid[index]; }

  MdpState initial_state() const;
  std::vector<int> feasible(const MdpState& s) const;
  bool is_terminal(const MdpState& s) const { return s.k >= config_.horizon; }

  // trade into grid index `a`; price and k unchanged
  MdpState apply_action(const MdpState& s, int a) const;
  // market outcome: k advances, wealth is marked to the new price
  MdpState advance(const MdpState& after_trade, double next_price) const;
  // both half-steps with a sampled market move
  MdpState step(const MdpState& s, int a, Rng& rng) const;

  double terminal_pl_of(const MdpState& terminal) const;
  // raw units: E-target for the exact DP figures (utility for replication,
  // already-scaled count reward for the sequence tasks)
  double raw_return(const MdpState& terminal) const;
  double loss_of(const MdpState& terminal) const;  // non-negative
  double scaled_return(const MdpState& terminal) const;

  // dead ends (empty feasible set) terminate with the worst scaled reward
  double dead_end_scaled() const { return -1.0; }
  double dead_end_raw() const;

 private:
  MdpConfig config_;
  Market market_;
};

}  // namespace hedgebench
