#include "hedgebench/dp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "hedgebench/numeric.hpp"

namespace hedgebench {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Key {
  long long cash, holdings, price, wealth;
  bool operator==(const Key&) const = default;
};

struct KeyHash {
  std::size_t operator()(const Key& k) const {
    auto mix = [](std::uint64_t z) {
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      return z ^ (z >> 31);
    };
    std::uint64_t h = mix(static_cast<std::uint64_t>(k.cash) + 0x9e3779b97f4a7c15ULL);
    h = mix(h ^ static_cast<std::uint64_t>(k.holdings));
    h = mix(h ^ static_cast<std::uint64_t>(k.price));
    h = mix(h ^ static_cast<std::uint64_t>(k.wealth));
    return static_cast<std::size_t>(h);
  }
};

Key make_key(const MdpState& s, double quantum) {
  auto q = [quantum](double x) { return std::llround(x / quantum); };
  return {q(s.cash), q(s.holdings), q(s.price), q(s.wealth)};
}

// one action subset per state: everything feasible (solve) or a single pick
// (policy evaluation)
using ActionSelector =
    std::function<std::vector<int>(const MdpState&, const std::vector<int>&)>;

}  // namespace

struct DpSolutionImpl {
  struct Level {
    std::unordered_map<Key, int, KeyHash> index;
    std::vector<MdpState> states;
    std::vector<double> value;
    std::vector<double> q;  // states x n_actions, NaN where infeasible
    std::vector<int> greedy;
  };
  std::vector<Level> levels;  // indexed by k - root_k
  int root_k = 0;
  int n_actions = 0;
  double quantum = 1e-6;
  std::size_t n_states = 0;
  std::size_t n_state_actions = 0;
};

namespace {

int intern(DpSolutionImpl::Level& level, const MdpState& s, double quantum,
           std::size_t* counter = nullptr) {
  auto [it, inserted] = level.index.try_emplace(make_key(s, quantum),
                                                static_cast<int>(level.states.size()));
  if (inserted) {
    level.states.push_back(s);
    if (counter) ++*counter;
  }
  return it->second;
}

std::shared_ptr<DpSolutionImpl> solve_impl(const Env& env, const MdpState& root,
                                           const DpOptions& opt,
                                           const ActionSelector& select) {
  const int n = env.horizon();
  const int A = env.n_actions();
  if (root.k < 0 || root.k > n) throw std::invalid_argument("dp: root step out of range");

  auto impl = std::make_shared<DpSolutionImpl>();
  impl->root_k = root.k;
  impl->n_actions = A;
  impl->quantum = opt.intern_quantum;
  impl->levels.resize(n - root.k + 1);
  intern(impl->levels[0], root, opt.intern_quantum);

  // market rows recur across states; cache them by quantized price
  std::unordered_map<long long, std::vector<PriceProb>> trans_cache;
  auto transitions_of = [&](double price) -> const std::vector<PriceProb>& {
    long long key = std::llround(price / opt.intern_quantum);
    auto it = trans_cache.find(key);
    if (it == trans_cache.end())
      it = trans_cache.emplace(key, env.market().transitions(price)).first;
    return it->second;
  };

  // forward reachability; both pairs and interned states count against the
  // budget (children outnumber pairs by the branching factor, so the state
  // count is what actually bounds memory)
  std::size_t pairs = 0;
  std::size_t states = 1;
  for (std::size_t lk = 0; lk + 1 < impl->levels.size(); ++lk) {
    auto& level = impl->levels[lk];
    auto& next = impl->levels[lk + 1];
    for (std::size_t i = 0; i < level.states.size(); ++i) {
      const MdpState s = level.states[i];
      std::vector<int> chosen = select(s, env.feasible(s));
      pairs += chosen.size();
      if (pairs > opt.max_state_actions || states > opt.max_state_actions)
        throw DpSizingError(
            "dp: lattice exceeds budget of " + std::to_string(opt.max_state_actions) +
            " (" + std::to_string(pairs) + " state-action pairs, " +
            std::to_string(states) + " states, step " + std::to_string(impl->root_k + (int)lk) +
            " of " + std::to_string(n) + ", " + std::to_string(A) + " actions)");
      for (int a : chosen) {
        MdpState traded = env.apply_action(s, a);
        for (const auto& pp : transitions_of(s.price))
          intern(next, env.advance(traded, pp.price), opt.intern_quantum, &states);
      }
    }
  }
  impl->n_state_actions = pairs;
  impl->n_states = states;

  // terminal values
  {
    auto& last = impl->levels.back();
    last.value.resize(last.states.size());
    for (std::size_t i = 0; i < last.states.size(); ++i)
      last.value[i] = opt.scaled_rewards ? env.scaled_return(last.states[i])
                                         : env.raw_return(last.states[i]);
  }

  const double dead_end = opt.scaled_rewards ? env.dead_end_scaled() : env.dead_end_raw();

  // backward sweep
  std::vector<double> terms;
  for (int lk = static_cast<int>(impl->levels.size()) - 2; lk >= 0; --lk) {
    auto& level = impl->levels[lk];
    const auto& next = impl->levels[lk + 1];
    const std::size_t ns = level.states.size();
    level.value.assign(ns, dead_end);
    level.greedy.assign(ns, -1);
    level.q.assign(ns * A, kNaN);
    for (std::size_t i = 0; i < ns; ++i) {
      const MdpState& s = level.states[i];
      std::vector<int> chosen = select(s, env.feasible(s));
      if (chosen.empty()) continue;  // dead end keeps the sentinel value
      double best = -std::numeric_limits<double>::infinity();
      int best_a = -1;
      for (int a : chosen) {
        MdpState traded = env.apply_action(s, a);
        terms.clear();
        for (const auto& pp : transitions_of(s.price)) {
          MdpState child = env.advance(traded, pp.price);
          auto it = next.index.find(make_key(child, opt.intern_quantum));
          if (it == next.index.end())
            throw std::logic_error("dp: child state missing from forward pass");
          terms.push_back(pp.prob * next.value[it->second]);
        }
        double q = pairwise_sum(terms.data(), terms.size());
        level.q[i * A + a] = q;
        if (q > best) {  // strict: ties stay with the lowest index
          best = q;
          best_a = a;
        }
      }
      level.value[i] = best;
      level.greedy[i] = best_a;
    }
  }
  return impl;
}

const DpSolutionImpl::Level& locate(const DpSolutionImpl& impl, const MdpState& s,
                                    int& out_index) {
  int lk = s.k - impl.root_k;
  if (lk < 0 || lk >= static_cast<int>(impl.levels.size()))
    throw std::out_of_range("dp: step outside solved range");
  const auto& level = impl.levels[lk];
  auto it = level.index.find(make_key(s, impl.quantum));
  if (it == level.index.end()) throw std::out_of_range("dp: state not in lattice");
  out_index = it->second;
  return level;
}

std::vector<QSlicePoint> slice_from_row(const Env& env, const DpSolutionImpl& impl,
                                        const DpSolutionImpl::Level& level, int state_idx) {
  std::vector<QSlicePoint> out;
  out.reserve(impl.n_actions);
  for (int a = 0; a < impl.n_actions; ++a) {
    double v = level.q.empty() ? kNaN : level.q[state_idx * impl.n_actions + a];
    out.push_back({a, env.action_value(a), v, !std::isnan(v)});
  }
  return out;
}

}  // namespace

std::size_t DpSolution::n_states() const { return impl_->n_states; }
std::size_t DpSolution::n_state_actions() const { return impl_->n_state_actions; }

double DpSolution::value_of(const MdpState& s) const {
  int idx;
  const auto& level = locate(*impl_, s, idx);
  return level.value[idx];
}

int DpSolution::greedy_action(const MdpState& s) const {
  int idx;
  const auto& level = locate(*impl_, s, idx);
  if (level.greedy.empty()) throw std::out_of_range("dp: no decision at a terminal step");
  return level.greedy[idx];
}

std::vector<QSlicePoint> DpSolution::slice_of(const Env& env, const MdpState& s) const {
  int idx;
  const auto& level = locate(*impl_, s, idx);
  return slice_from_row(env, *impl_, level, idx);
}

DpSolution solve_dp(const Env& env, const DpOptions& options) {
  return solve_dp_from(env, env.initial_state(), options);
}

DpSolution solve_dp_from(const Env& env, const MdpState& root, const DpOptions& options) {
  ActionSelector all = [](const MdpState&, const std::vector<int>& feas) { return feas; };
  auto impl = solve_impl(env, root, options, all);
  DpSolution out;
  out.impl_ = impl;
  out.root_value_ = impl->levels[0].value[0];
  if (impl->levels.size() > 1) {
    out.root_greedy_ = impl->levels[0].greedy[0];
    out.root_slice_ = slice_from_row(env, *impl, impl->levels[0], 0);
  }
  return out;
}

std::vector<QSlicePoint> q_slice(const Env& env, const MdpState& root,
                                 const DpOptions& options) {
  return solve_dp_from(env, root, options).root_slice();
}

double policy_value(const Env& env, const PolicyFn& policy, const DpOptions& options) {
  ActionSelector pick = [&policy](const MdpState& s,
                                  const std::vector<int>& feas) -> std::vector<int> {
    if (feas.empty()) return {};
    int a = policy(s, feas);
    for (int f : feas)
      if (f == a) return {a};
    throw std::invalid_argument("policy_value: policy chose an infeasible action");
  };
  auto impl = solve_impl(env, env.initial_state(), options, pick);
  return impl->levels[0].value[0];
}

ModalityReport modality_scan(const std::vector<QSlicePoint>& slice, double eps) {
  ModalityReport rep{0, 0};
  const int n = static_cast<int>(slice.size());
  int i = 0;
  while (i < n) {
    if (!slice[i].feasible) {
      ++i;
      continue;
    }
    int run_end = i;  // inclusive end of this feasible component
    while (run_end + 1 < n && slice[run_end + 1].feasible) ++run_end;
    ++rep.n_components;

    // collapse the run into plateau blocks, then count blocks that dominate
    // both existing neighbours
    std::vector<double> blocks;
    for (int j = i; j <= run_end; ++j)
      if (blocks.empty() || std::abs(slice[j].value - blocks.back()) > eps)
        blocks.push_back(slice[j].value);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      bool left_ok = (b == 0) || blocks[b] > blocks[b - 1] + eps;
      bool right_ok = (b + 1 == blocks.size()) || blocks[b] > blocks[b + 1] + eps;
      if (left_ok && right_ok) ++rep.n_local_maxima;
    }
    i = run_end + 1;
  }
  return rep;
}

void write_q_slice_csv(const std::string& filename, const std::vector<QSlicePoint>& slice) {
  std::ofstream out(filename);
  if (!out) throw std::runtime_error("write_q_slice_csv: cannot open " + filename);
  out << "action,value,feasible\n";
  char buf[80];
  for (const auto& p : slice) {
    if (p.feasible)
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,1", p.action, p.value);
    else
      std::snprintf(buf, sizeof buf, "%.17g,nan,0", p.action);
    out << buf << '\n';
  }
}

void write_heatmap_csv(const std::string& filename, const Env& env, int k, double holdings,
                       double price, const std::vector<double>& cash_values,
                       const DpOptions& options) {
  std::ofstream out(filename);
  if (!out) throw std::runtime_error("write_heatmap_csv: cannot open " + filename);
  out << "cash_index,action_index,value_or_nan\n";
  char buf[80];
  for (std::size_t ci = 0; ci < cash_values.size(); ++ci) {
    MdpState s;
    s.k = k;
    s.cash = cash_values[ci];
    s.holdings = holdings;
    s.price = price;
    s.wealth = 0.0;  // gains slot never feeds the terminal reward
    for (const auto& p : q_slice(env, s, options)) {
      if (p.feasible)
        std::snprintf(buf, sizeof buf, "%zu,%d,%.17g", ci, p.action_index, p.value);
      else
        std::snprintf(buf, sizeof buf, "%zu,%d,nan", ci, p.action_index);
      out << buf << '\n';
    }
  }
}

}  // namespace hedgebench
