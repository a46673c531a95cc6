#pragma once

#include <cstdint>

namespace hedgebench {

// Counter-based generator (splitmix64 over an incrementing counter). Every
// consumer receives an explicit Rng; there is no global generator state, so a
// run is reproducible from its master seed alone and streams can be split
// without coordination.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : counter_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (counter_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform index in [0, n)
  int next_index(int n);

  // standard normal via inverse CDF, so one draw consumes one counter step
  double next_normal();

  // weights need not be normalised; returns an index
  int next_categorical(const double* weights, int n);

  // independent child stream: mixes the current seed with a stream tag
  Rng split(std::uint64_t stream) const;

  std::uint64_t state() const { return counter_; }

 private:
  std::uint64_t counter_;
};

// Acklam's rational approximation to the standard normal quantile,
// |relative error| < 1.2e-9. Exposed for the grid quantile enumeration.
double normal_quantile(double p);

}  // namespace hedgebench
