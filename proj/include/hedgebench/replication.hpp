#pragma once

#include <cmath>
#include <optional>
#include <vector>

namespace hedgebench {

// Trade friction c(d_holdings, price) >= 0. Derivatives are the subgradients
// used by the policy-gradient trainer: 0 at d = 0 and at the cap boundary of
// the capped schedule (the flat branch wins at kinks).
struct CostSpec {
  enum class Kind { Zero, CappedProportional, Quadratic };
  Kind kind = Kind::Zero;
  double rate = 0.0;  // capped_proportional: cost = min(rate * |d|, cap)
  double cap = 0.0;
  double coef = 0.0;  // quadratic: cost = coef * (d * price)^2

  static CostSpec zero() { return {}; }
  static CostSpec capped_proportional(double rate, double cap) {
    return {Kind::CappedProportional, rate, cap, 0.0};
  }
  static CostSpec quadratic(double coef) { return {Kind::Quadratic, 0.0, 0.0, coef}; }

  double operator()(double d_holdings, double price) const {
    switch (kind) {
      case Kind::Zero: return 0.0;
      case Kind::CappedProportional: return std::min(rate * std::abs(d_holdings), cap);
      case Kind::Quadratic: {
        double v = d_holdings * price;
        return coef * v * v;
      }
    }
    return 0.0;
  }

  // d cost / d d_holdings
  double derivative(double d_holdings, double price) const {
    switch (kind) {
      case Kind::Zero: return 0.0;
      case Kind::CappedProportional: {
        double lin = rate * std::abs(d_holdings);
        if (d_holdings == 0.0 || lin >= cap) return 0.0;
        return d_holdings > 0.0 ? rate : -rate;
      }
      case Kind::Quadratic: return 2.0 * coef * d_holdings * price * price;
    }
    return 0.0;
  }
};

// Terminal reward u(PL). mse_loss and quadratic_utility share the formula
// -x^2; they differ only in intent (squared-error loss vs the risk-averse
// utility of the counterexample configs). exponential is u(x) = -a e^{-b x}.
struct UtilitySpec {
  enum class Kind { MseLoss, QuadraticUtility, Exponential };
  Kind kind = Kind::MseLoss;
  double a = 2.0;
  double b = 0.5;

  static UtilitySpec mse_loss() { return {Kind::MseLoss, 0.0, 0.0}; }
  static UtilitySpec quadratic_utility() { return {Kind::QuadraticUtility, 0.0, 0.0}; }
  static UtilitySpec exponential(double a, double b) { return {Kind::Exponential, a, b}; }

  double operator()(double pl) const {
    switch (kind) {
      case Kind::MseLoss:
      case Kind::QuadraticUtility: return -pl * pl;
      case Kind::Exponential: return -a * std::exp(-b * pl);
    }
    return 0.0;
  }

  double derivative(double pl) const {
    switch (kind) {
      case Kind::MseLoss:
      case Kind::QuadraticUtility: return -2.0 * pl;
      case Kind::Exponential: return a * b * std::exp(-b * pl);
    }
    return 0.0;
  }
};

// Liability settled at maturity. short_call holds -max(X - K, 0).
struct PayoffSpec {
  enum class Kind { None, ShortCall };
  Kind kind = Kind::None;
  double strike = 0.0;

  static PayoffSpec none() { return {}; }
  static PayoffSpec short_call(double strike) { return {Kind::ShortCall, strike}; }

  double operator()(double price) const {
    if (kind == Kind::ShortCall) return -std::max(price - strike, 0.0);
    return 0.0;
  }
};

// Portfolio state between decisions: k decisions taken so far, cash = riskless
// position, holdings = risky position, price = current X_k. wealth is the
// accumulated-gains process (starts at 0, marks holdings to market after each
// move); the sequence tasks reuse the slot as their running correct-action
// count, which is why it lives in the state at all.
struct MdpState {
  int k = 0;
  double cash = 0.0;
  double holdings = 0.0;
  double price = 0.0;
  double wealth = 0.0;
};

// Self-financing cash update: the trade is paid out of cash and the friction
// is deducted immediately.
inline double self_finance_cash(double cash, double holdings, double price,
                                double new_holdings, const CostSpec& cost) {
  double d = new_holdings - holdings;
  return cash - d * price - cost(d, price);
}

// Terminal P&L evaluated the flat way: cost-free cash account plus holdings
// value plus payoff, minus the accumulated frictions. Used as the independent
// cross-check against the folded-cash episode stepping.
double terminal_pl(const std::vector<double>& path, const std::vector<double>& actions,
                   double initial_cash, double initial_holdings, double p0,
                   const CostSpec& cost, const PayoffSpec& payoff);

// Map raw outcomes into [-1, 1] for the learning agents. LossLinear sends a
// non-negative loss through clamp(1 - 2 loss / L, -1, 1), so zero loss is a
// perfect 1. Counting sends k correct out of n to 2k/n - 1.
struct RewardScale {
  enum class Scheme { LossLinear, Counting };
  Scheme scheme = Scheme::LossLinear;
  double loss_scale = 1.0;  // L
  int count_n = 1;

  static RewardScale loss_linear(double L) { return {Scheme::LossLinear, L, 1}; }
  static RewardScale counting(int n) { return {Scheme::Counting, 1.0, n}; }

  double from_loss(double loss) const {
    double r = 1.0 - 2.0 * loss / loss_scale;
    return r < -1.0 ? -1.0 : (r > 1.0 ? 1.0 : r);
  }
  double from_count(double n_correct) const { return 2.0 * n_correct / count_n - 1.0; }
};

// Feasible subset of the action grid at a state: new holdings whose
// self-financed cash stays inside the (optional) bounds. An empty result is a
// dead-end state; callers decide whether that is an error or an episode end.
std::vector<int> feasible_actions(const MdpState& s, const std::vector<double>& grid,
                                  const CostSpec& cost, std::optional<double> cash_min,
                                  std::optional<double> cash_max);

}  // namespace hedgebench
