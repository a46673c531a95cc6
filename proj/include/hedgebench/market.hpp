#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hedgebench/rng.hpp"

namespace hedgebench {

struct PriceProb {
  double price;
  double prob;
};

// Finite price chain driven by an explicit row-stochastic matrix. Immutable
// after construction; row sums are validated to 1 within 1e-12.
class TrinomialChain {
 public:
  TrinomialChain(std::vector<double> states, std::vector<std::vector<double>> rows,
                 int start_index);

  // Band matrix over the state list: interior rows (p_down, p_stay, p_up) on
  // the sub/main/super diagonal; at the ends the out-of-range move's mass is
  // folded into "stay", so the boundary rows become e.g. (p_stay + p_down, p_up).
  static TrinomialChain band(std::vector<double> states, int start_index, double p_down,
                             double p_stay, double p_up);

  int n_states() const { return static_cast<int>(states_.size()); }
  const std::vector<double>& states() const { return states_; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  int start_index() const { return start_index_; }
  int index_of(double price) const;

  double start_price() const { return states_[start_index_]; }
  double step(double price, Rng& rng) const;
  std::vector<PriceProb> transitions(double price) const;

 private:
  std::vector<double> states_;
  std::vector<std::vector<double>> rows_;
  int start_index_;
};

// Geometric Brownian motion snapped to a price grid: one step multiplies by
// exp(mu - sigma^2/2 + sigma Z), rounds to the tick and clamps at the floor.
// Enumeration replaces Z by equiprobable quantile-bin midpoints.
class GbmGrid {
 public:
  GbmGrid(double start, double mu, double sigma, double tick, double floor,
          int quantile_bins = 21);

  double start_price() const { return start_; }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  double tick() const { return tick_; }
  double floor_price() const { return floor_; }
  int quantile_bins() const { return bins_; }
  double snap(double price) const;

  double step(double price, Rng& rng) const;
  std::vector<PriceProb> transitions(double price) const;

 private:
  double start_, mu_, sigma_, tick_, floor_;
  int bins_;
};

// iid signal in {-0.5, +0.5}, fair coin
class SignProcess {
 public:
  double start_price() const { return 0.5; }
  double step(double, Rng& rng) const { return rng.next_double() < 0.5 ? -0.5 : 0.5; }
  std::vector<PriceProb> transitions(double) const {
    return {{-0.5, 0.5}, {0.5, 0.5}};
  }
};

// price pinned to a constant; keeps sequence tasks inside the same machinery
class DummyConst {
 public:
  explicit DummyConst(double value = 0.0) : value_(value) {}
  double start_price() const { return value_; }
  double step(double, Rng&) const { return value_; }
  std::vector<PriceProb> transitions(double) const { return {{value_, 1.0}}; }

 private:
  double value_;
};

using MarketModel = std::variant<TrinomialChain, GbmGrid, SignProcess, DummyConst>;

// Value-type wrapper so the rest of the code can hold markets by value and
// stay ignorant of the concrete model.
class Market {
 public:
  Market(MarketModel model, std::string model_id)
      : model_(std::move(model)), model_id_(std::move(model_id)) {}

  const std::string& model_id() const { return model_id_; }
  double start_price() const;
  double step(double price, Rng& rng) const;
  std::vector<PriceProb> transitions(double price) const;

  const MarketModel& model() const { return model_; }

  // how often the true kernel has been consulted (step or transitions); lets
  // reservoir-only training prove it never touched the real dynamics
  std::uint64_t kernel_queries() const { return kernel_queries_; }

 private:
  MarketModel model_;
  std::string model_id_;
  mutable std::uint64_t kernel_queries_ = 0;
};

// Where training episodes come from: fresh draws from a market model, or
// rows resampled (with replacement) from a frozen reservoir.
class PathSource {
 public:
  static PathSource sampled(Market market, int horizon);
  static PathSource from_reservoir(std::shared_ptr<const struct PathReservoir> r);

  int horizon() const { return horizon_; }
  std::vector<double> next(Rng& rng) const;

 private:
  PathSource() = default;
  std::optional<Market> market_;
  std::shared_ptr<const struct PathReservoir> reservoir_;
  int horizon_ = 0;
};

// Frozen bank of sampled paths (each path has horizon+1 prices). The file
// format is a header line "horizon,n_paths,seed,model_id" followed by one
// comma-separated path per line, fixed 6-decimal.
struct PathReservoir {
  int horizon = 0;
  std::uint64_t seed = 0;
  std::string model_id;
  std::vector<std::vector<double>> paths;

  int n_paths() const { return static_cast<int>(paths.size()); }

  static PathReservoir generate(const Market& market, int n_paths, int horizon,
                                std::uint64_t seed);
  void save(const std::string& filename) const;
  static PathReservoir load(const std::string& filename);

  // Disjoint index split (train first, eval second); throws if the reservoir
  // is too small to keep them disjoint.
  std::pair<std::vector<int>, std::vector<int>> split_indices(int n_train, int n_eval,
                                                              Rng& rng) const;
};

}  // namespace hedgebench
