#pragma once

#include <string>
#include <vector>

#include "hedgebench/env.hpp"

namespace hedgebench {

// Uniform grid lo, lo+step, ..., lo+(count-1)*step
std::vector<double> uniform_grid(double lo, double step, int count);

// The ten registered experiment ids, in registry order.
const std::vector<std::string>& experiment_ids();

bool is_registered_experiment(const std::string& id);

// Environment for a registered experiment id; throws std::invalid_argument on
// unknown ids. Agent settings live in the harness registry; this layer only
// fixes the MDP and market.
Env make_env(const std::string& id);

std::string experiment_description(const std::string& id);

}  // namespace hedgebench
