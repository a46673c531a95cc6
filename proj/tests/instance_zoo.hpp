// Random small MDP instances for oracle comparisons: tiny enough that a naive
// exponential recursion is exact, varied enough to cover cost kinds, utility
// kinds, payoffs, bounds and dead ends. Shared by the unit tests and the
// acceptance suite.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hedgebench/dp.hpp"
#include "hedgebench/env.hpp"
#include "hedgebench/rng.hpp"

namespace hedgebench::testing {

inline Env random_small_env(Rng& rng) {
  // market: 2..5 price states, random row-stochastic matrix (last entry takes
  // the exact remainder so rows sum to 1 bit-exactly)
  int n_prices = 2 + rng.next_index(4);
  std::vector<double> states(n_prices);
  double p = 1.0 + rng.next_double() * 2.0;
  for (int i = 0; i < n_prices; ++i) {
    states[i] = p;
    p += 0.5 + rng.next_double() * 2.0;
  }
  std::vector<std::vector<double>> rows(n_prices, std::vector<double>(n_prices));
  for (auto& row : rows) {
    double total = 0.0;
    for (double& v : row) {
      v = 0.05 + rng.next_double();
      total += v;
    }
    double acc = 0.0;
    for (int j = 0; j + 1 < n_prices; ++j) {
      row[j] /= total;
      acc += row[j];
    }
    row[n_prices - 1] = 1.0 - acc;
  }
  TrinomialChain chain(states, rows, rng.next_index(n_prices));

  MdpConfig cfg;
  cfg.horizon = 1 + rng.next_index(4);  // <= 4 decision steps

  int n_actions = 3 + rng.next_index(5);  // <= 7 actions
  double lo = -1.0 + rng.next_double();
  double step = 0.1 + rng.next_double() * 0.4;
  cfg.action_grid.resize(n_actions);
  for (int i = 0; i < n_actions; ++i) cfg.action_grid[i] = lo + step * i;

  switch (rng.next_index(3)) {
    case 0: cfg.cost = CostSpec::zero(); break;
    case 1:
      cfg.cost = CostSpec::capped_proportional(0.1 + rng.next_double() * 0.4,
                                               0.02 + rng.next_double() * 0.1);
      break;
    default: cfg.cost = CostSpec::quadratic(0.05 + rng.next_double() * 0.5); break;
  }
  cfg.utility = rng.next_index(2) == 0 ? UtilitySpec::mse_loss()
                                       : UtilitySpec::exponential(2.0, 0.5);
  if (rng.next_index(2) == 0)
    cfg.payoff = PayoffSpec::short_call(states[rng.next_index(n_prices)]);
  if (rng.next_index(3) == 0) {
    // occasionally bound cash tightly enough that dead ends appear
    cfg.cash_min = -2.0 - rng.next_double() * 2.0;
    cfg.cash_max = 2.0 + rng.next_double() * 2.0;
  }
  cfg.p0 = rng.next_double() - 0.5;
  cfg.initial_cash = rng.next_double() - 0.5;
  cfg.initial_holdings = cfg.action_grid[rng.next_index(n_actions)];
  cfg.scale = RewardScale::loss_linear(1.0 + rng.next_double() * 4.0);
  return Env(cfg, Market(chain, "random_chain"));
}

// Exact value by naive recursion: no interning, no lattice, no rounding.
inline double brute_force_value(const Env& env, const MdpState& s, bool scaled) {
  if (env.is_terminal(s)) return scaled ? env.scaled_return(s) : env.raw_return(s);
  auto feas = env.feasible(s);
  if (feas.empty()) return scaled ? env.dead_end_scaled() : env.dead_end_raw();
  double best = -std::numeric_limits<double>::infinity();
  for (int a : feas) {
    MdpState traded = env.apply_action(s, a);
    double q = 0.0;
    for (const auto& pp : env.market().transitions(s.price))
      q += pp.prob * brute_force_value(env, env.advance(traded, pp.price), scaled);
    best = std::max(best, q);
  }
  return best;
}

inline int brute_force_argmax(const Env& env, const MdpState& s, bool scaled) {
  auto feas = env.feasible(s);
  double best = -std::numeric_limits<double>::infinity();
  int best_a = -1;
  for (int a : feas) {
    MdpState traded = env.apply_action(s, a);
    double q = 0.0;
    for (const auto& pp : env.market().transitions(s.price))
      q += pp.prob * brute_force_value(env, env.advance(traded, pp.price), scaled);
    if (q > best) {
      best = q;
      best_a = a;
    }
  }
  return best_a;
}

}  // namespace hedgebench::testing
