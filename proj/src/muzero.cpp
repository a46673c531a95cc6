#include "hedgebench/muzero.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace hedgebench {

namespace {

// lattice prices arrive as exact doubles or 6-decimal file round-trips; a
// nano-quantum separates distinct ticks while absorbing that wobble
long long price_key(double price) { return std::llround(price * 1e9); }

Vector dyn_input(int k, double price, int horizon, double start_price) {
  Vector x(2);
  x(0) = horizon > 0 ? static_cast<double>(k) / horizon : 0.0;
  x(1) = std::abs(start_price) > 1e-12 ? price / start_price : price;
  return x;
}

// transition-count-weighted KL(empirical || model) over every observed cell
double weighted_kl(Mlp& net, const Matrix& x, const Matrix& target, const Vector& weight) {
  Matrix p = net.forward(x)[0];
  double total = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (int c = 0; c < 3; ++c)
      if (target(r, c) > 0.0)
        total += weight(r) * target(r, c) *
                 (std::log(target(r, c)) - std::log(std::max(p(r, c), 1e-300)));
  return total / weight.sum();
}

void shuffle(std::vector<int>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
    std::swap(v[i], v[rng.next_index(i + 1)]);
}

int nearest_index(const std::vector<double>& states, double price) {
  auto it = std::lower_bound(states.begin(), states.end(), price);
  if (it == states.begin()) return 0;
  if (it == states.end()) return static_cast<int>(states.size()) - 1;
  int hi = static_cast<int>(it - states.begin());
  return price - states[hi - 1] <= states[hi] - price ? hi - 1 : hi;
}

}  // namespace

DynamicsModel::DynamicsModel(Mlp net, int horizon, double start_price,
                             std::vector<DynamicsCell> cells, double kl_initial,
                             double kl_final)
    : net_(std::move(net)),
      horizon_(horizon),
      start_price_(start_price),
      cells_(std::move(cells)),
      kl_initial_(kl_initial),
      kl_final_(kl_final) {
  for (int i = 0; i < static_cast<int>(cells_.size()); ++i) {
    index_[{cells_[i].k, price_key(cells_[i].price)}] = i;
    n_transitions_ += cells_[i].count;
  }
}

std::array<double, 3> DynamicsModel::probs(int k, double price) const {
  std::vector<Vector> out = net_.forward_one(dyn_input(k, price, horizon_, start_price_));
  return {out[0](0), out[0](1), out[0](2)};
}

bool DynamicsModel::covered(int k, double price) const {
  return index_.count({k, price_key(price)}) > 0;
}

int DynamicsModel::observed(int k, double price) const {
  auto it = index_.find({k, price_key(price)});
  return it == index_.end() ? 0 : cells_[it->second].count;
}

DynamicsModel fit_dynamics(const PathReservoir& reservoir, const DynamicsConfig& cfg,
                           std::uint64_t seed) {
  if (reservoir.n_paths() < 1)
    throw std::invalid_argument("fit_dynamics: empty reservoir");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.hidden_layers < 1)
    throw std::invalid_argument("fit_dynamics: bad config");

  const int horizon = reservoir.horizon;
  const double start_price = reservoir.paths.at(0).at(0);

  // empirical move counts per (step, price) cell; moves are one-tick, so the
  // sign of the increment classifies them
  std::map<std::pair<int, long long>, std::array<long long, 3>> counts;
  std::map<std::pair<int, long long>, double> cell_price;
  for (const std::vector<double>& path : reservoir.paths) {
    for (int k = 0; k + 1 < static_cast<int>(path.size()); ++k) {
      double d = path[k + 1] - path[k];
      int move = d > 1e-12 ? 0 : (d < -1e-12 ? 2 : 1);
      auto key = std::make_pair(k, price_key(path[k]));
      counts[key][move] += 1;
      cell_price[key] = path[k];
    }
  }

  std::vector<DynamicsCell> cells;
  cells.reserve(counts.size());
  for (const auto& [key, c] : counts) {
    DynamicsCell cell;
    cell.k = key.first;
    cell.price = cell_price[key];
    cell.count = static_cast<int>(c[0] + c[1] + c[2]);
    for (int m = 0; m < 3; ++m)
      cell.freq[m] = static_cast<double>(c[m]) / cell.count;
    cells.push_back(cell);
  }

  const int n_cells = static_cast<int>(cells.size());
  Matrix x(n_cells, 2), target(n_cells, 3);
  Vector weight(n_cells);
  for (int i = 0; i < n_cells; ++i) {
    x.row(i) = dyn_input(cells[i].k, cells[i].price, horizon, start_price).transpose();
    for (int m = 0; m < 3; ++m) target(i, m) = cells[i].freq[m];
    weight(i) = cells[i].count;
  }

  MlpSpec ms;
  ms.input_dim = 2;
  ms.hidden_layers = cfg.hidden_layers;
  ms.hidden_width = cfg.hidden_width;
  ms.activation = Activation::LeakyRelu;
  ms.norm = Norm::LayerNorm;
  ms.heads = {{HeadKind::Softmax, 3}};

  Rng master(seed);
  Mlp net(ms, master.split(0).next_u64());
  double kl_initial = weighted_kl(net, x, target, weight);

  // cells are drawn into batches in proportion to their transition counts, so
  // the objective is the reservoir-frequency-weighted KL
  Rng batch_rng = master.split(1);
  AdamState adam(cfg.lr);
  std::vector<double> draw_w(weight.data(), weight.data() + n_cells);
  int per_epoch = std::max(1, (n_cells + cfg.batch_size - 1) / cfg.batch_size);
  Matrix xb(cfg.batch_size, 2), tb(cfg.batch_size, 3);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int b = 0; b < per_epoch; ++b) {
      for (int r = 0; r < cfg.batch_size; ++r) {
        int i = batch_rng.next_categorical(draw_w.data(), n_cells);
        xb.row(r) = x.row(i);
        tb.row(r) = target.row(i);
      }
      Mlp::Workspace ws;
      Matrix p = net.forward(xb, &ws, true)[0];
      Matrix dp;
      kl_divergence_loss(p, tb, cfg.batch_size, dp);
      Vector grad = Vector::Zero(net.n_params());
      net.backward(ws, {dp}, grad);
      adam.step(net.params(), grad);
    }
  }

  double kl_final = weighted_kl(net, x, target, weight);
  return DynamicsModel(std::move(net), horizon, start_price, std::move(cells), kl_initial,
                       kl_final);
}

TransitionSampler make_model_sampler(const Env& env, const DynamicsModel& model,
                                     long long* uncovered) {
  const TrinomialChain* chain = std::get_if<TrinomialChain>(&env.market().model());
  if (!chain)
    throw std::invalid_argument("make_model_sampler: market is not a price lattice");
  std::vector<double> states = chain->states();
  const DynamicsModel* m = &model;
  return [states = std::move(states), m, uncovered](int k, double price, Rng& rng) {
    if (uncovered && !m->covered(k, price)) ++*uncovered;
    std::array<double, 3> p = m->probs(k, price);
    int move = rng.next_categorical(p.data(), 3);
    int i = nearest_index(states, price);
    int n = static_cast<int>(states.size());
    int j = move == 0 ? std::min(i + 1, n - 1) : (move == 1 ? i : std::max(i - 1, 0));
    return states[j];
  };
}

TransitionSampler make_kernel_sampler(const Env& env) {
  const Market* market = &env.market();
  return [market](int, double price, Rng& rng) { return market->step(price, rng); };
}

MzTrainResult train_on_reservoir(const Env& env, const PathReservoir& train_split,
                                 const PathReservoir& eval_split, const MzConfig& cfg,
                                 std::uint64_t seed) {
  if (train_split.n_paths() < 1 || eval_split.n_paths() < 1)
    throw std::invalid_argument("train_on_reservoir: empty reservoir split");
  if (train_split.horizon != env.horizon() || eval_split.horizon != env.horizon())
    throw std::invalid_argument("train_on_reservoir: reservoir horizon mismatch");

  Rng master(seed);
  DynamicsModel dynamics =
      fit_dynamics(train_split, cfg.dynamics, master.split(0).next_u64());
  if (cfg.log)
    *cfg.log << "dynamics: cells=" << dynamics.cells().size()
             << " kl0=" << dynamics.kl_initial() << " kl1=" << dynamics.kl_final() << "\n";

  AzConfig az = cfg.az;
  az.search.score = SearchConfig::Score::Mz;
  if (az.net.heads.empty()) az.net = az_net_spec(env, 4, 512);

  long long uncovered = 0;
  SearchHooks hooks;
  hooks.sampler = cfg.use_true_kernel ? make_kernel_sampler(env)
                                      : make_model_sampler(env, dynamics, &uncovered);

  // episodes deal the train split in a shuffled order, reshuffling when the
  // deck runs out; validation resamples the same split
  std::vector<int> order(train_split.n_paths());
  std::iota(order.begin(), order.end(), 0);
  Rng deal_rng = master.split(2);
  shuffle(order, deal_rng);
  int pos = 0, reshuffles = 0, episode = 0;
  PathFn episodes = [&](Rng&) -> std::vector<double> {
    if (pos == static_cast<int>(order.size())) {
      shuffle(order, deal_rng);
      pos = 0;
      ++reshuffles;
      if (cfg.log) *cfg.log << "reservoir reshuffle " << reshuffles << " before episode "
                            << episode << "\n";
    }
    ++episode;
    return train_split.paths[order[pos++]];
  };
  auto val_reservoir = std::make_shared<const PathReservoir>(train_split);
  PathSource val_source = PathSource::from_reservoir(val_reservoir);
  PathFn vals = [val_source](Rng& r) { return val_source.next(r); };

  std::size_t cap = az.replay_capacity
                        ? az.replay_capacity
                        : static_cast<std::size_t>(std::max(1, az.episodes_per_cycle)) *
                              env.horizon();
  Mlp net(az.net, master.split(1).next_u64());
  ReplayBuffer replay(cap);

  std::uint64_t queries_before = env.market().kernel_queries();
  std::vector<AzCycleRecord> records;
  for (int c = 0; c < az.cycles; ++c) {
    Rng cycle_rng = master.split(100 + static_cast<std::uint64_t>(c));
    AzCycleRecord rec = train_cycle(net, replay, env, az, episodes, vals, cycle_rng, &hooks);
    rec.cycle = c;
    if (cfg.log)
      *cfg.log << "cycle " << c << " selfplay_z=" << rec.selfplay_mean_z
               << " cand=" << rec.candidate_score << " inc=" << rec.incumbent_score
               << (rec.accepted ? " accepted" : " rejected") << "\n";
    records.push_back(rec);
  }
  std::uint64_t kernel_queries = env.market().kernel_queries() - queries_before;
  if (!cfg.use_true_kernel && kernel_queries != 0)
    throw std::logic_error("train_on_reservoir: true kernel queried during training");

  Rng eval_rng = master.split(3);
  int n_eval = std::min<int>(cfg.eval_paths, eval_split.n_paths());
  std::vector<std::vector<double>> eval_paths(eval_split.paths.begin(),
                                              eval_split.paths.begin() + n_eval);
  AzEvalReport eval = az_evaluate_paths(env, make_net_evaluator(env, net), az.search,
                                        eval_paths, eval_rng, /*with_search=*/false);

  return MzTrainResult{AzTrainResult{std::move(net), std::move(records)},
                       std::move(dynamics),
                       eval,
                       kernel_queries,
                       reshuffles,
                       uncovered};
}

double percentile_linear(std::vector<double> xs, double p) {
  if (xs.empty()) throw std::invalid_argument("percentile_linear: empty sample");
  if (p < 0.0 || p > 100.0) throw std::invalid_argument("percentile_linear: p outside [0, 100]");
  std::sort(xs.begin(), xs.end());
  double rank = p / 100.0 * (static_cast<double>(xs.size()) - 1.0);
  int lo = static_cast<int>(std::floor(rank));
  if (lo >= static_cast<int>(xs.size()) - 1) return xs.back();
  double frac = rank - lo;
  return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

SampleEfficiencyResult sample_efficiency_experiment(const Env& env,
                                                    const SampleEfficiencyConfig& cfg) {
  if (cfg.sizes.empty() || cfg.n_runs < 1 || cfg.eval_paths < 1)
    throw std::invalid_argument("sample_efficiency_experiment: bad config");

  SampleEfficiencyResult out;
  Rng master(cfg.seed);
  for (int size : cfg.sizes) {
    for (int run = 0; run < cfg.n_runs; ++run) {
      Rng run_rng =
          master.split((static_cast<std::uint64_t>(size) << 32) | static_cast<std::uint64_t>(run));
      // both agents train on the identical fresh draw and are scored on the
      // identical held-out paths
      PathReservoir pool = PathReservoir::generate(env.market(), size + cfg.eval_paths,
                                                   env.horizon(), run_rng.split(0).next_u64());
      PathReservoir train{pool.horizon, pool.seed, pool.model_id,
                          {pool.paths.begin(), pool.paths.begin() + size}};
      PathReservoir eval{pool.horizon, pool.seed, pool.model_id,
                         {pool.paths.begin() + size, pool.paths.end()}};

      PolicyStack stack(cfg.dh, env.config(), run_rng.split(1).next_u64());
      auto train_ptr = std::make_shared<const PathReservoir>(train);
      hedgebench::train(stack, PathSource::from_reservoir(train_ptr), env,
                        run_rng.split(2).next_u64());
      HedgeEvalReport dh_rep = evaluate(stack, paths_matrix(eval.paths), env);
      out.rows.push_back({"deep_hedging", size, run, dh_rep.mean_loss});

      MzTrainResult mz =
          train_on_reservoir(env, train, eval, cfg.mz, run_rng.split(3).next_u64());
      out.rows.push_back({"muzero", size, run, mz.eval.mean_loss});

      if (cfg.log)
        *cfg.log << "size " << size << " run " << run << " dh=" << dh_rep.mean_loss
                 << " mz=" << mz.eval.mean_loss << "\n";
    }
  }

  for (const char* agent : {"deep_hedging", "muzero"}) {
    for (int size : cfg.sizes) {
      std::vector<double> losses;
      for (const SampleEfficiencyRow& r : out.rows)
        if (r.agent == agent && r.reservoir_size == size) losses.push_back(r.eval_mean_loss);
      out.stats.push_back({agent, size, std::accumulate(losses.begin(), losses.end(), 0.0) /
                                            static_cast<double>(losses.size()),
                           percentile_linear(losses, 5.0), percentile_linear(losses, 95.0)});
    }
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_rows_csv(std::ostream& out, const std::vector<SampleEfficiencyRow>& rows) {
  out << "agent,reservoir_size,run,eval_mean_loss\n";
  for (const SampleEfficiencyRow& r : rows)
    out << r.agent << ',' << r.reservoir_size << ',' << r.run << ','
        << fmt_double(r.eval_mean_loss) << '\n';
}

void write_stats_csv(std::ostream& out, const std::vector<SampleEfficiencyStat>& stats) {
  out << "agent,reservoir_size,mean,p5,p95\n";
  for (const SampleEfficiencyStat& s : stats)
    out << s.agent << ',' << s.reservoir_size << ',' << fmt_double(s.mean) << ','
        << fmt_double(s.p5) << ',' << fmt_double(s.p95) << '\n';
}

}  // namespace hedgebench
