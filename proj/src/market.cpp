#include "hedgebench/market.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hedgebench {

TrinomialChain::TrinomialChain(std::vector<double> states,
                               std::vector<std::vector<double>> rows, int start_index)
    : states_(std::move(states)), rows_(std::move(rows)), start_index_(start_index) {
  if (states_.empty()) throw std::invalid_argument("TrinomialChain: empty state list");
  if (rows_.size() != states_.size())
    throw std::invalid_argument("TrinomialChain: matrix/state size mismatch");
  if (start_index_ < 0 || start_index_ >= n_states())
    throw std::invalid_argument("TrinomialChain: start index out of range");
  for (const auto& row : rows_) {
    if (row.size() != states_.size())
      throw std::invalid_argument("TrinomialChain: ragged matrix row");
    double sum = 0.0;
    for (double p : row) {
      if (p < 0.0) throw std::invalid_argument("TrinomialChain: negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("TrinomialChain: row sum off by more than 1e-12");
  }
}

TrinomialChain TrinomialChain::band(std::vector<double> states, int start_index,
                                    double p_down, double p_stay, double p_up) {
  const int n = static_cast<int>(states.size());
  std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    double stay = p_stay;
    if (i - 1 >= 0)
      rows[i][i - 1] = p_down;
    else
      stay += p_down;
    if (i + 1 < n)
      rows[i][i + 1] = p_up;
    else
      stay += p_up;
    rows[i][i] = stay;
  }
  return TrinomialChain(std::move(states), std::move(rows), start_index);
}

int TrinomialChain::index_of(double price) const {
  for (int i = 0; i < n_states(); ++i)
    if (std::abs(states_[i] - price) <= 1e-9) return i;
  throw std::invalid_argument("TrinomialChain: price is not a chain state");
}

double TrinomialChain::step(double price, Rng& rng) const {
  const auto& row = rows_[index_of(price)];
  return states_[rng.next_categorical(row.data(), n_states())];
}

std::vector<PriceProb> TrinomialChain::transitions(double price) const {
  const auto& row = rows_[index_of(price)];
  std::vector<PriceProb> out;
  for (int j = 0; j < n_states(); ++j)
    if (row[j] > 0.0) out.push_back({states_[j], row[j]});
  return out;
}

GbmGrid::GbmGrid(double start, double mu, double sigma, double tick, double floor,
                 int quantile_bins)
    : start_(start), mu_(mu), sigma_(sigma), tick_(tick), floor_(floor),
      bins_(quantile_bins) {
  if (tick_ <= 0.0) throw std::invalid_argument("GbmGrid: tick must be positive");
  if (sigma_ < 0.0) throw std::invalid_argument("GbmGrid: sigma must be non-negative");
  if (bins_ < 1) throw std::invalid_argument("GbmGrid: need at least one quantile bin");
  start_ = snap(start_);
}

double GbmGrid::snap(double price) const {
  double snapped = std::round(price / tick_) * tick_;
  return std::max(snapped, floor_);
}

double GbmGrid::step(double price, Rng& rng) const {
  double z = rng.next_normal();
  return snap(price * std::exp(mu_ - 0.5 * sigma_ * sigma_ + sigma_ * z));
}

std::vector<PriceProb> GbmGrid::transitions(double price) const {
  // midpoint of each equiprobable bin in probability space
  std::vector<PriceProb> raw;
  raw.reserve(bins_);
  const double w = 1.0 / bins_;
  for (int i = 0; i < bins_; ++i) {
    double z = normal_quantile((i + 0.5) * w);
    raw.push_back({snap(price * std::exp(mu_ - 0.5 * sigma_ * sigma_ + sigma_ * z)), w});
  }
  // rounding can land two bins on the same tick; merge them
  std::sort(raw.begin(), raw.end(),
            [](const PriceProb& a, const PriceProb& b) { return a.price < b.price; });
  std::vector<PriceProb> out;
  for (const auto& pp : raw) {
    if (!out.empty() && std::abs(out.back().price - pp.price) < 1e-12)
      out.back().prob += pp.prob;
    else
      out.push_back(pp);
  }
  return out;
}

double Market::start_price() const {
  return std::visit([](const auto& m) { return m.start_price(); }, model_);
}

double Market::step(double price, Rng& rng) const {
  ++kernel_queries_;
  return std::visit([&](const auto& m) { return m.step(price, rng); }, model_);
}

std::vector<PriceProb> Market::transitions(double price) const {
  ++kernel_queries_;
  return std::visit([&](const auto& m) { return m.transitions(price); }, model_);
}

PathSource PathSource::sampled(Market market, int horizon) {
  PathSource src;
  src.market_ = std::move(market);
  src.horizon_ = horizon;
  return src;
}

PathSource PathSource::from_reservoir(std::shared_ptr<const PathReservoir> r) {
  if (!r || r->paths.empty())
    throw std::invalid_argument("PathSource: empty reservoir");
  PathSource src;
  src.horizon_ = r->horizon;
  src.reservoir_ = std::move(r);
  return src;
}

std::vector<double> PathSource::next(Rng& rng) const {
  if (market_) {
    std::vector<double> path(horizon_ + 1);
    path[0] = market_->start_price();
    for (int k = 0; k < horizon_; ++k) path[k + 1] = market_->step(path[k], rng);
    return path;
  }
  return reservoir_->paths[rng.next_index(reservoir_->paths.size())];
}

PathReservoir PathReservoir::generate(const Market& market, int n_paths, int horizon,
                                      std::uint64_t seed) {
  PathReservoir res;
  res.horizon = horizon;
  res.seed = seed;
  res.model_id = market.model_id();
  res.paths.reserve(n_paths);
  Rng root(seed);
  for (int i = 0; i < n_paths; ++i) {
    Rng rng = root.split(i);
    std::vector<double> path(horizon + 1);
    path[0] = market.start_price();
    for (int k = 0; k < horizon; ++k) path[k + 1] = market.step(path[k], rng);
    res.paths.push_back(std::move(path));
  }
  return res;
}

void PathReservoir::save(const std::string& filename) const {
  std::ofstream out(filename);
  if (!out) throw std::runtime_error("PathReservoir: cannot open " + filename);
  out << horizon << ',' << n_paths() << ',' << seed << ',' << model_id << '\n';
  char buf[32];
  for (const auto& path : paths) {
    for (std::size_t j = 0; j < path.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.6f", path[j]);
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("PathReservoir: write failed for " + filename);
}

PathReservoir PathReservoir::load(const std::string& filename) {
  std::ifstream in(filename);
  if (!in) throw std::runtime_error("PathReservoir: cannot open " + filename);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("PathReservoir: missing header");
  PathReservoir res;
  int declared_paths = 0;
  {
    std::istringstream hs(line);
    std::string field;
    if (!std::getline(hs, field, ',')) throw std::runtime_error("PathReservoir: bad header");
    res.horizon = std::stoi(field);
    if (!std::getline(hs, field, ',')) throw std::runtime_error("PathReservoir: bad header");
    declared_paths = std::stoi(field);
    if (!std::getline(hs, field, ',')) throw std::runtime_error("PathReservoir: bad header");
    res.seed = std::stoull(field);
    std::getline(hs, res.model_id);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> path;
    path.reserve(res.horizon + 1);
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) path.push_back(std::stod(field));
    if (static_cast<int>(path.size()) != res.horizon + 1)
      throw std::runtime_error("PathReservoir: path length does not match header horizon");
    res.paths.push_back(std::move(path));
  }
  if (res.n_paths() != declared_paths)
    throw std::runtime_error("PathReservoir: path count does not match header");
  return res;
}

std::pair<std::vector<int>, std::vector<int>> PathReservoir::split_indices(
    int n_train, int n_eval, Rng& rng) const {
  if (n_train + n_eval > n_paths())
    throw std::invalid_argument("PathReservoir: split larger than reservoir");
  std::vector<int> perm(n_paths());
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n_paths() - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.next_index(i + 1)]);
  std::vector<int> train(perm.begin(), perm.begin() + n_train);
  std::vector<int> eval(perm.begin() + n_train, perm.begin() + n_train + n_eval);
  return {std::move(train), std::move(eval)};
}

}  // namespace hedgebench
