#include "hedgebench/replication.hpp"

#include <stdexcept>

namespace hedgebench {

double terminal_pl(const std::vector<double>& path, const std::vector<double>& actions,
                   double initial_cash, double initial_holdings, double p0,
                   const CostSpec& cost, const PayoffSpec& payoff) {
  if (path.size() != actions.size() + 1)
    throw std::invalid_argument("terminal_pl: need one more price than actions");
  double cash = initial_cash;
  double holdings = initial_holdings;
  double cost_sum = 0.0;
  for (std::size_t k = 0; k < actions.size(); ++k) {
    double d = actions[k] - holdings;
    cash -= d * path[k];
    cost_sum += cost(d, path[k]);
    holdings = actions[k];
  }
  double xn = path.back();
  return p0 + payoff(xn) + cash + holdings * xn - cost_sum;
}

std::vector<int> feasible_actions(const MdpState& s, const std::vector<double>& grid,
                                  const CostSpec& cost, std::optional<double> cash_min,
                                  std::optional<double> cash_max) {
  std::vector<int> out;
  out.reserve(grid.size());
  for (int i = 0; i < static_cast<int>(grid.size()); ++i) {
    double cash = self_finance_cash(s.cash, s.holdings, s.price, grid[i], cost);
    if (cash_min && cash < *cash_min - 1e-9) continue;
    if (cash_max && cash > *cash_max + 1e-9) continue;
    out.push_back(i);
  }
  return out;
}

}  // namespace hedgebench
