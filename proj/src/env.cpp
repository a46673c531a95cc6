#include "hedgebench/env.hpp"

#include <cmath>
#include <stdexcept>

namespace hedgebench {

bool TaskSpec::action_correct(int k, double price, double action) const {
  switch (kind) {
    case Kind::Replication: return false;
    case Kind::TargetSequence:
      if (k < 0 || k >= static_cast<int>(targets.size()))
        throw std::out_of_range("TaskSpec: step outside target list");
      return std::abs(action - targets[k]) <= 1e-9;
    case Kind::SignMatch: return std::abs(action - price) <= 1e-9;
  }
  return false;
}

double TaskSpec::target_action(int k, double price) const {
  switch (kind) {
    case Kind::Replication:
      throw std::logic_error("TaskSpec: replication has no target action");
    case Kind::TargetSequence:
      if (k < 0 || k >= static_cast<int>(targets.size()))
        throw std::out_of_range("TaskSpec: step outside target list");
      return targets[k];
    case Kind::SignMatch:
      return price;
  }
  throw std::logic_error("TaskSpec: unknown kind");
}

Env::Env(MdpConfig config, Market market)
    : config_(std::move(config)), market_(std::move(market)) {
  if (config_.horizon <= 0) throw std::invalid_argument("Env: horizon must be positive");
  if (config_.action_grid.empty()) throw std::invalid_argument("Env: empty action grid");
  if (config_.task.kind == TaskSpec::Kind::TargetSequence &&
      static_cast<int>(config_.task.targets.size()) != config_.horizon)
    throw std::invalid_argument("Env: target list length must equal horizon");
}

MdpState Env::initial_state() const {
  MdpState s;
  s.k = 0;
  s.cash = config_.initial_cash;
  s.holdings = config_.initial_holdings;
  s.price = market_.start_price();
  s.wealth = 0.0;  // gains process starts flat (count for sequence tasks)
  return s;
}

std::vector<int> Env::feasible(const MdpState& s) const {
  return feasible_actions(s, config_.action_grid, config_.cost, config_.cash_min,
                          config_.cash_max);
}

MdpState Env::apply_action(const MdpState& s, int a) const {
  MdpState t = s;
  double new_holdings = config_.action_grid[a];
  double d = new_holdings - s.holdings;
  double fee = config_.cost(d, s.price);
  t.cash = s.cash - d * s.price - fee;
  t.holdings = new_holdings;
  if (config_.task.is_counting()) {
    if (config_.task.action_correct(s.k, s.price, new_holdings)) t.wealth = s.wealth + 1.0;
  } else {
    t.wealth = s.wealth - fee;  // trading itself only moves wealth by the friction
  }
  return t;
}

MdpState Env::advance(const MdpState& after_trade, double next_price) const {
  MdpState t = after_trade;
  t.k = after_trade.k + 1;
  t.price = next_price;
  if (!config_.task.is_counting())
    t.wealth = after_trade.wealth + after_trade.holdings * (next_price - after_trade.price);
  return t;
}

MdpState Env::step(const MdpState& s, int a, Rng& rng) const {
  MdpState traded = apply_action(s, a);
  return advance(traded, market_.step(s.price, rng));
}

double Env::terminal_pl_of(const MdpState& terminal) const {
  // cash is folded (costs already deducted), so the P&L is state-local
  return config_.p0 + terminal.cash + terminal.holdings * terminal.price +
         config_.payoff(terminal.price);
}

double Env::raw_return(const MdpState& terminal) const {
  if (config_.task.is_counting()) return config_.scale.from_count(terminal.wealth);
  return config_.utility(terminal_pl_of(terminal));
}

double Env::loss_of(const MdpState& terminal) const {
  if (config_.task.is_counting())
    return static_cast<double>(config_.horizon) - terminal.wealth;
  // both utility families are non-positive, so the loss is just the negation
  return -config_.utility(terminal_pl_of(terminal));
}

double Env::scaled_return(const MdpState& terminal) const {
  if (config_.task.is_counting()) return config_.scale.from_count(terminal.wealth);
  return config_.scale.from_loss(loss_of(terminal));
}

double Env::dead_end_raw() const {
  if (config_.task.is_counting()) return -1.0;
  return -config_.scale.loss_scale;
}

}  // namespace hedgebench
