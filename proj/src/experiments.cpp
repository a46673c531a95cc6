#include "hedgebench/experiments.hpp"

#include <stdexcept>

namespace hedgebench {

std::vector<double> uniform_grid(double lo, double step, int count) {
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = lo + step * i;
  return g;
}

namespace {

// nine-state unit-price band used by the cost/bounds hedging tasks
TrinomialChain nine_state_chain() {
  return TrinomialChain::band(uniform_grid(1.0, 1.0, 9), /*start=*/4, 0.2, 0.6, 0.2);
}

// fine tick band for the 20-step sample-efficiency task
TrinomialChain tick_chain() {
  return TrinomialChain::band(uniform_grid(0.05, 0.05, 41), /*start=*/19, 0.253, 0.5,
                              0.247);
}

// two-state switching market from the one-step counterexamples
TrinomialChain two_state_chain(int start) {
  return TrinomialChain({1.0, 2.0}, {{0.8, 0.2}, {0.2, 0.8}}, start);
}

struct Entry {
  const char* id;
  const char* description;
};

const Entry kEntries[] = {
    {"seq5", "five-step fixed target sequence, dummy market"},
    {"sign5", "five-step sign-matching task on a +-0.5 coin signal"},
    {"trinomial_cost", "short call on the nine-state chain with capped "
                       "proportional cost (bimodal Q at the start state)"},
    {"gbm_cost", "short call on tick-rounded GBM with capped proportional cost"},
    {"trinomial_bounds", "short call on the nine-state chain with heavy "
                         "frictions, exponential utility and cash bounds"},
    {"sample_efficiency", "20-step short call on the fine tick chain, learned "
                          "from frozen path reservoirs"},
    {"counterexample_c1", "one-step slice: quadratic utility + quadratic cost, "
                          "two local maxima"},
    {"counterexample_c2", "one-step slice: exponential utility + capped cost, "
                          "two local maxima"},
    {"counterexample_c3_quadratic", "one-step slice: cash bounds + quadratic "
                                    "cost, disconnected feasible set"},
    {"counterexample_c3_nonconvex", "one-step slice: cash bounds + capped cost, "
                                    "disconnected feasible set"},
};

}  // namespace

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& e : kEntries) v.push_back(e.id);
    return v;
  }();
  return ids;
}

bool is_registered_experiment(const std::string& id) {
  for (const auto& e : kEntries)
    if (id == e.id) return true;
  return false;
}

std::string experiment_description(const std::string& id) {
  for (const auto& e : kEntries)
    if (id == e.id) return e.description;
  throw std::invalid_argument("unknown experiment id: " + id);
}

Env make_env(const std::string& id) {
  MdpConfig cfg;
  if (id == "seq5") {
    cfg.horizon = 5;
    cfg.action_grid = uniform_grid(-1.0, 0.1, 21);
    cfg.task = TaskSpec::target_sequence({-0.5, 0.5, -0.5, 0.5, -0.5});
    cfg.scale = RewardScale::counting(5);
    return Env(cfg, Market(DummyConst(0.0), "dummy_const"));
  }
  if (id == "sign5") {
    cfg.horizon = 5;
    cfg.action_grid = uniform_grid(-1.0, 0.1, 21);
    cfg.task = TaskSpec::sign_match();
    cfg.scale = RewardScale::counting(5);
    return Env(cfg, Market(SignProcess(), "sign_coin"));
  }
  if (id == "trinomial_cost") {
    cfg.horizon = 5;
    cfg.p0 = 0.4;
    cfg.initial_cash = 0.0;
    cfg.initial_holdings = 0.4;
    cfg.action_grid = uniform_grid(0.0, 0.05, 20);
    cfg.cost = CostSpec::capped_proportional(0.25, 0.05);
    cfg.utility = UtilitySpec::mse_loss();
    cfg.payoff = PayoffSpec::short_call(5.0);
    cfg.scale = RewardScale::loss_linear(10.0);
    return Env(cfg, Market(nine_state_chain(), "nine_state_chain"));
  }
  if (id == "gbm_cost") {
    cfg.horizon = 5;
    cfg.p0 = 0.4;
    cfg.initial_cash = 0.0;
    cfg.initial_holdings = 0.4;
    cfg.action_grid = uniform_grid(0.0, 0.05, 20);
    cfg.cost = CostSpec::capped_proportional(0.25, 0.05);
    cfg.utility = UtilitySpec::mse_loss();
    cfg.payoff = PayoffSpec::short_call(5.0);
    cfg.scale = RewardScale::loss_linear(10.0);
    return Env(cfg, Market(GbmGrid(5.0, 0.03125, 0.25, 0.01, 0.01), "gbm_grid"));
  }
  if (id == "trinomial_bounds") {
    cfg.horizon = 5;
    cfg.p0 = 0.0;
    cfg.initial_cash = 0.8125;
    cfg.initial_holdings = 1.5;
    cfg.action_grid = uniform_grid(0.0, 0.05, 40);
    cfg.cost = CostSpec::capped_proportional(12.5, 2.5);
    cfg.utility = UtilitySpec::exponential(2.0, 0.5);
    cfg.payoff = PayoffSpec::short_call(5.0);
    cfg.cash_min = 0.0;
    cfg.cash_max = 8.0;
    cfg.scale = RewardScale::loss_linear(4.0);
    return Env(cfg, Market(nine_state_chain(), "nine_state_chain"));
  }
  if (id == "sample_efficiency") {
    cfg.horizon = 20;
    cfg.p0 = 0.0;
    cfg.initial_cash = 0.02783;  // banked premium
    cfg.initial_holdings = 0.0;
    cfg.action_grid = uniform_grid(0.0, 0.05, 21);
    cfg.cost = CostSpec::zero();
    cfg.utility = UtilitySpec::mse_loss();
    cfg.payoff = PayoffSpec::short_call(1.0);
    cfg.scale = RewardScale::loss_linear(0.5);
    return Env(cfg, Market(tick_chain(), "tick_chain"));
  }
  if (id == "counterexample_c1") {
    cfg.horizon = 1;
    cfg.initial_cash = -0.6;
    cfg.initial_holdings = 0.55;
    cfg.action_grid = uniform_grid(0.0, 0.05, 20);
    cfg.cost = CostSpec::quadratic(0.5);
    cfg.utility = UtilitySpec::quadratic_utility();
    cfg.payoff = PayoffSpec::short_call(2.0);
    cfg.scale = RewardScale::loss_linear(2.0);
    return Env(cfg, Market(two_state_chain(1), "two_state_chain"));
  }
  if (id == "counterexample_c2") {
    cfg.horizon = 1;
    cfg.initial_cash = 0.0;
    cfg.initial_holdings = 0.4;
    cfg.action_grid = uniform_grid(0.0, 0.05, 20);
    cfg.cost = CostSpec::capped_proportional(0.25, 0.05);
    cfg.utility = UtilitySpec::exponential(2.0, 0.5);
    cfg.payoff = PayoffSpec::short_call(2.0);
    cfg.scale = RewardScale::loss_linear(8.0);
    return Env(cfg, Market(two_state_chain(0), "two_state_chain"));
  }
  if (id == "counterexample_c3_quadratic") {
    cfg.horizon = 1;
    cfg.initial_cash = 3.8;
    cfg.initial_holdings = 1.5;
    cfg.action_grid = uniform_grid(0.0, 0.05, 40);
    cfg.cost = CostSpec::quadratic(0.5);
    cfg.utility = UtilitySpec::exponential(2.0, 0.5);
    cfg.payoff = PayoffSpec::short_call(2.0);
    cfg.cash_min = 0.0;
    cfg.cash_max = 4.0;
    cfg.scale = RewardScale::loss_linear(8.0);
    return Env(cfg, Market(two_state_chain(1), "two_state_chain"));
  }
  if (id == "counterexample_c3_nonconvex") {
    cfg.horizon = 1;
    cfg.initial_cash = 0.25;
    cfg.initial_holdings = 1.5;
    cfg.action_grid = uniform_grid(0.0, 0.05, 40);
    cfg.cost = CostSpec::capped_proportional(2.5, 0.5);
    cfg.utility = UtilitySpec::exponential(2.0, 0.5);
    cfg.payoff = PayoffSpec::short_call(2.0);
    cfg.cash_min = 0.0;
    cfg.cash_max = 4.0;
    cfg.scale = RewardScale::loss_linear(8.0);
    return Env(cfg, Market(two_state_chain(0), "two_state_chain"));
  }
  throw std::invalid_argument("unknown experiment id: " + id);
}

}  // namespace hedgebench
