#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hedgebench/env.hpp"

namespace hedgebench {

// Raised when the reachable lattice would exceed the state-action budget.
struct DpSizingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DpOptions {
  bool scaled_rewards = false;       // default: raw utility units
  double intern_quantum = 1e-6;      // rounding quantum for state interning
  std::size_t max_state_actions = 10'000'000;
};

struct QSlicePoint {
  int action_index;
  double action;
  double value;  // NaN when infeasible
  bool feasible;
};

struct ModalityReport {
  int n_local_maxima;  // plateau-merged, summed over feasible components
  int n_components;    // maximal contiguous feasible runs
};

struct DpSolutionImpl;

// Exact value/Q tables over the reachable lattice from a root state. Cheap to
// copy (shared immutable tables).
class DpSolution {
 public:
  double root_value() const { return root_value_; }
  int root_greedy_action() const { return root_greedy_; }
  const std::vector<QSlicePoint>& root_slice() const { return root_slice_; }

  std::size_t n_states() const;
  std::size_t n_state_actions() const;

  // lookups for arbitrary states on the lattice; throw std::out_of_range if
  // the state was never reached
  double value_of(const MdpState& s) const;
  int greedy_action(const MdpState& s) const;
  // per-action Q values at a lattice state (all NaN at the terminal step)
  std::vector<QSlicePoint> slice_of(const Env& env, const MdpState& s) const;

 private:
  friend DpSolution solve_dp_from(const Env&, const MdpState&, const DpOptions&);
  std::shared_ptr<const DpSolutionImpl> impl_;
  double root_value_ = 0.0;
  int root_greedy_ = -1;
  std::vector<QSlicePoint> root_slice_;
};

// Full backward solve from the environment's initial state.
DpSolution solve_dp(const Env& env, const DpOptions& options = {});

// Solve from an arbitrary root (the counterexample figure states need not be
// reachable from the initial state).
DpSolution solve_dp_from(const Env& env, const MdpState& root, const DpOptions& options = {});

// One-call Q slice at a state (root of its own sub-lattice).
std::vector<QSlicePoint> q_slice(const Env& env, const MdpState& root,
                                 const DpOptions& options = {});

// Expected return of a fixed policy from the initial state, over the same
// lattice/units as solve_dp. The policy sees the state and the feasible set.
using PolicyFn = std::function<int(const MdpState&, const std::vector<int>& feasible)>;
double policy_value(const Env& env, const PolicyFn& policy, const DpOptions& options = {});

// Local maxima / feasible components of a Q slice. Values closer than eps are
// one plateau; a plateau is a maximum when no strictly higher neighbour exists
// on either side within its component.
ModalityReport modality_scan(const std::vector<QSlicePoint>& slice, double eps = 1e-12);

void write_q_slice_csv(const std::string& filename, const std::vector<QSlicePoint>& slice);

// Q(action) sweep across a cash grid at fixed (k, holdings, price); rows are
// "cash_index,action_index,value_or_nan".
void write_heatmap_csv(const std::string& filename, const Env& env, int k, double holdings,
                       double price, const std::vector<double>& cash_values,
                       const DpOptions& options = {});

}  // namespace hedgebench
