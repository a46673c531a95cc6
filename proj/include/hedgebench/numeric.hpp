#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hedgebench {

// Pairwise (cascade) summation; error grows O(log n) instead of O(n).
double pairwise_sum(const double* data, std::size_t n);
inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

double mean(const std::vector<double>& v);

// Percentile in [0, 100] with linear interpolation between order statistics
// (the numpy "linear" rule). Sorts a copy.
double percentile(std::vector<double> v, double pct);

// FNV-1a; used to fingerprint serialized configs in run artifacts
std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

}  // namespace hedgebench
