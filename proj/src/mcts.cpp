#include "hedgebench/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace hedgebench {

double ucb1(double mean, double n, double n_a, double w) {
  if (n_a <= 0.0) return std::numeric_limits<double>::infinity();
  return mean + w * std::sqrt(std::log(n) / n_a);
}

double az_score(double qhat, double prior, double n_s, double n_sa, double w) {
  return qhat + w * prior * std::sqrt(std::log(n_s)) / (n_sa + 1.0);
}

double mz_score(double qhat, double prior, double n_s, double n_sa, double w1, double w2) {
  double grow = w1 + std::log((n_s + w2 + 1.0) / w2);
  return qhat + prior * std::sqrt(std::log(n_s)) / (n_sa + 1.0) * grow;
}

SearchConfig SearchConfig::uct(int n_sims) {
  SearchConfig c;
  c.score = Score::Uct;
  c.n_sims = n_sims;
  c.w = std::sqrt(2.0);
  return c;
}

SearchConfig SearchConfig::az(int n_sims, double w) {
  SearchConfig c;
  c.score = Score::Az;
  c.n_sims = n_sims;
  c.w = w;
  return c;
}

SearchConfig SearchConfig::mz(int n_sims, double w1, double w2) {
  SearchConfig c;
  c.score = Score::Mz;
  c.n_sims = n_sims;
  c.mz_w1 = w1;
  c.mz_w2 = w2;
  return c;
}

namespace {

double sample_next(const Env& env, const SearchHooks* hooks, int k, double price, Rng& rng) {
  if (hooks && hooks->sampler) return hooks->sampler(k, price, rng);
  return env.market().step(price, rng);
}

// uniform random play-out to the end of the episode
double uct_rollout(const Env& env, const SearchConfig& cfg, const SearchHooks* hooks,
                   MdpState s, Rng& rng) {
  (void)cfg;
  while (!env.is_terminal(s)) {
    std::vector<int> feas = env.feasible(s);
    if (feas.empty()) return env.dead_end_scaled();
    int a = feas[rng.next_index(static_cast<int>(feas.size()))];
    MdpState traded = env.apply_action(s, a);
    double next_price = sample_next(env, hooks, s.k, traded.price, rng);
    s = env.advance(traded, next_price);
  }
  return env.scaled_return(s);
}

// Gives a fresh node its edges and priors, or closes it (terminal/dead end).
// Returns the value to back up from it: the fixed value for closed nodes, the
// net's value for Az/Mz, a random rollout for Uct. The root expansion is
// structural, so its rollout is skipped and the returned value is unused.
double expand_and_evaluate(const Env& env, const SearchConfig& cfg, const NetEvaluator& net,
                           const SearchHooks* hooks, SearchTree::Node& node, Rng& rng,
                           bool root_expansion) {
  if (env.is_terminal(node.state)) {
    node.closed = true;
    node.closed_value = env.scaled_return(node.state);
    return node.closed_value;
  }
  std::vector<int> feas = env.feasible(node.state);
  if (feas.empty()) {
    node.closed = true;
    node.closed_value = env.dead_end_scaled();
    return node.closed_value;
  }
  node.edges.resize(feas.size());
  for (std::size_t i = 0; i < feas.size(); ++i) node.edges[i].action = feas[i];
  node.priors.assign(feas.size(), 1.0 / static_cast<double>(feas.size()));
  if (cfg.score == SearchConfig::Score::Uct)
    return root_expansion ? 0.0 : uct_rollout(env, cfg, hooks, node.state, rng);

  PolicyValue pv = net(node.state);
  double total = 0.0;
  for (int a : feas) total += pv.priors[a];
  if (total > 1e-12)
    for (std::size_t i = 0; i < feas.size(); ++i) node.priors[i] = pv.priors[feas[i]] / total;
  return pv.value;
}

int select_slot(const SearchTree::Node& node, const SearchConfig& cfg) {
  // ln(N_s) needs N_s >= 1; a node with zero settled visits gets a flat bonus
  // and the lowest-index tie break picks the first edge
  double ns = std::max(1, node.n_s);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < node.edges.size(); ++i) {
    const SearchTree::Edge& e = node.edges[i];
    double q = e.q();
    double s = 0.0;
    switch (cfg.score) {
      case SearchConfig::Score::Uct: s = ucb1(q, ns, e.n, cfg.w); break;
      case SearchConfig::Score::Az: s = az_score(q, node.priors[i], ns, e.n, cfg.w); break;
      case SearchConfig::Score::Mz:
        s = mz_score(q, node.priors[i], ns, e.n, cfg.mz_w1, cfg.mz_w2);
        break;
    }
    if (s > best_score) {
      best_score = s;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// One selection / expansion / backup pass; returns the backed-up value and
// records the traversed (action, outcome key) hops for the trace.
double simulate(SearchTree& tree, const Env& env, const SearchConfig& cfg,
                const NetEvaluator& net, const SearchHooks* hooks, Rng& rng,
                std::vector<std::pair<int, long long>>& hops) {
  std::vector<std::pair<int, int>> visited;  // (node index, edge slot)
  int cur = 0;
  double g = 0.0;
  for (;;) {
    if (tree.nodes[cur].closed) {
      g = tree.nodes[cur].closed_value;
      break;
    }
    int slot = select_slot(tree.nodes[cur], cfg);
    visited.emplace_back(cur, slot);
    const MdpState& s = tree.nodes[cur].state;
    int action = tree.nodes[cur].edges[slot].action;
    MdpState traded = env.apply_action(s, action);
    double next_price = sample_next(env, hooks, s.k, traded.price, rng);
    long long key = std::llround(next_price / cfg.price_quantum);
    hops.emplace_back(action, key);
    auto& children = tree.nodes[cur].edges[slot].children;
    auto it = children.find(key);
    if (it != children.end()) {
      cur = it->second;
      continue;
    }
    // unseen outcome: grow the tree by one node, evaluate it, stop descending
    int child = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[child].state = env.advance(traded, next_price);
    tree.nodes[cur].edges[slot].children.emplace(key, child);
    g = expand_and_evaluate(env, cfg, net, hooks, tree.nodes[child], rng, false);
    break;
  }
  for (auto [ni, slot] : visited) {
    SearchTree::Node& node = tree.nodes[ni];
    node.n_s += 1;
    node.edges[slot].n += 1;
    node.edges[slot].w_sum += g;
  }
  return g;
}

// every edge with its (action, outcome key) path from the root, for the
// backup-correctness check against the per-simulation lines
void dump_edges(const SearchTree& tree, int idx, nlohmann::json& path, nlohmann::json& out) {
  const SearchTree::Node& node = tree.nodes[idx];
  for (const SearchTree::Edge& e : node.edges) {
    nlohmann::json rec;
    rec["path"] = path;
    rec["a"] = e.action;
    rec["n"] = e.n;
    rec["q"] = e.q();
    out.push_back(std::move(rec));
    for (const auto& [key, child] : e.children) {
      path.push_back(nlohmann::json::array({e.action, key}));
      dump_edges(tree, child, path, out);
      path.erase(path.end() - 1);
    }
  }
}

}  // namespace

std::vector<double> SearchResult::full_dist(int n_actions) const {
  std::vector<double> d(n_actions, 0.0);
  int total = 0;
  for (int v : visits) total += v;
  if (total > 0)
    for (std::size_t i = 0; i < actions.size(); ++i)
      d[actions[i]] = static_cast<double>(visits[i]) / total;
  return d;
}

SearchResult search(const Env& env, const MdpState& root, const SearchConfig& cfg,
                    const NetEvaluator& net, Rng& rng, const SearchHooks* hooks) {
  if (cfg.n_sims < 1) throw std::invalid_argument("search: n_sims must be at least 1");
  if (env.is_terminal(root)) throw std::invalid_argument("search: terminal root");
  if (cfg.score != SearchConfig::Score::Uct && !net)
    throw std::invalid_argument("search: Az/Mz scores need an evaluator");

  SearchTree local;
  SearchTree& tree = (hooks && hooks->tree_out) ? *hooks->tree_out : local;
  tree.nodes.clear();
  tree.nodes.emplace_back();
  tree.nodes[0].state = root;
  expand_and_evaluate(env, cfg, net, hooks, tree.nodes[0], rng, true);
  if (tree.nodes[0].closed) throw std::runtime_error("search: dead-end root");

  std::ostream* trace = hooks ? hooks->trace : nullptr;
  std::vector<std::pair<int, long long>> hops;
  for (int i = 0; i < cfg.n_sims; ++i) {
    hops.clear();
    double g = simulate(tree, env, cfg, net, hooks, rng, hops);
    if (trace) {
      nlohmann::json line;
      line["sim"] = i;
      nlohmann::json path = nlohmann::json::array();
      for (auto [a, key] : hops) path.push_back(nlohmann::json::array({a, key}));
      line["path"] = std::move(path);
      line["leaf"] = g;
      line["backup"] = g;
      *trace << line.dump() << "\n";
    }
  }
  if (trace) {
    nlohmann::json edges = nlohmann::json::array();
    nlohmann::json path = nlohmann::json::array();
    dump_edges(tree, 0, path, edges);
    nlohmann::json line;
    line["edges"] = std::move(edges);
    *trace << line.dump() << "\n";
  }

  const SearchTree::Node& r = tree.root();
  SearchResult out;
  out.actions.reserve(r.edges.size());
  for (const SearchTree::Edge& e : r.edges) {
    out.actions.push_back(e.action);
    out.visits.push_back(e.n);
    out.q.push_back(e.q());
  }
  for (std::size_t i = 1; i < out.visits.size(); ++i)
    if (out.visits[i] > out.visits[out.best_slot]) out.best_slot = static_cast<int>(i);
  return out;
}

Vector az_features(const Env& env, const MdpState& s) {
  double start = env.market().start_price();
  Vector f(kAzFeatureDim);
  f(0) = static_cast<double>(s.k) / env.horizon();
  f(1) = s.holdings;
  f(2) = std::abs(start) > 1e-12 ? s.price / start : s.price;
  f(3) = s.wealth;
  return f;
}

MlpSpec az_net_spec(const Env& env, int hidden_layers, int hidden_width) {
  MlpSpec s;
  s.input_dim = kAzFeatureDim;
  s.hidden_layers = hidden_layers;
  s.hidden_width = hidden_width;
  s.activation = Activation::Relu;
  s.norm = Norm::BatchNorm;
  s.heads = {{HeadKind::Softmax, env.n_actions()}, {HeadKind::ScalarTanh, 1}};
  return s;
}

NetEvaluator make_net_evaluator(const Env& env, const Mlp& net) {
  const MlpSpec& spec = net.spec();
  if (spec.input_dim != kAzFeatureDim || spec.heads.size() != 2 ||
      spec.heads[kAzPolicyHead].kind != HeadKind::Softmax ||
      spec.heads[kAzPolicyHead].dim != env.n_actions() ||
      spec.heads[kAzValueHead].kind != HeadKind::ScalarTanh)
    throw std::invalid_argument("make_net_evaluator: net does not fit the task");
  const Mlp* p = &net;
  return [env, p](const MdpState& s) {
    std::vector<Vector> out = p->forward_one(az_features(env, s));
    PolicyValue pv;
    pv.value = out[kAzValueHead](0);
    const Vector& pol = out[kAzPolicyHead];
    pv.priors.assign(pol.data(), pol.data() + pol.size());
    return pv;
  };
}

NetEvaluator make_oracle_evaluator(const Env& env, const DpSolution& dp, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("make_oracle_evaluator: tau must be positive");
  // expects a solution in raw units (the DpOptions default); for the counting
  // tasks raw and scaled coincide
  return [env, dp, tau](const MdpState& s) {
    PolicyValue pv;
    double v = dp.value_of(s);
    pv.value = env.config().task.is_counting() ? v : env.config().scale.from_loss(-v);
    std::vector<QSlicePoint> slice = dp.slice_of(env, s);
    pv.priors.assign(slice.size(), 0.0);
    double qmax = -std::numeric_limits<double>::infinity();
    for (const QSlicePoint& p : slice)
      if (p.feasible && p.value > qmax) qmax = p.value;
    double total = 0.0;
    for (std::size_t i = 0; i < slice.size(); ++i) {
      if (!slice[i].feasible) continue;
      pv.priors[i] = std::exp((slice[i].value - qmax) / tau);
      total += pv.priors[i];
    }
    for (double& p : pv.priors) p /= total;
    return pv;
  };
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(ReplayEntry entry) {
  if (entries_.size() < capacity_) {
    entries_.push_back(std::move(entry));
    return;
  }
  entries_[head_] = std::move(entry);
  head_ = (head_ + 1) % capacity_;
}

std::vector<int> ReplayBuffer::sample_indices(int batch, Rng& rng) const {
  int n = static_cast<int>(entries_.size());
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  int take = std::min(std::max(batch, 0), n);
  // partial Fisher-Yates: the first `take` slots are a uniform sample
  for (int i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.next_index(n - i)]);
  idx.resize(take);
  return idx;
}

EpisodeResult self_play_episode(const Env& env, const SearchConfig& cfg,
                                const NetEvaluator& net, const std::vector<double>& path,
                                Rng& rng, const SearchHooks* hooks) {
  if (static_cast<int>(path.size()) < env.horizon() + 1)
    throw std::invalid_argument("self_play_episode: path shorter than the horizon");
  EpisodeResult out;
  MdpState s = env.initial_state();
  s.price = path[0];  // the provided path drives every market move
  while (!env.is_terminal(s)) {
    if (env.feasible(s).empty()) {
      out.dead_end = true;
      break;
    }
    SearchResult res = search(env, s, cfg, net, rng, hooks);
    ReplayEntry entry;
    entry.features = az_features(env, s);
    entry.policy_target = res.full_dist(env.n_actions());
    out.entries.push_back(std::move(entry));
    std::vector<double> weights(res.visits.begin(), res.visits.end());
    int slot = rng.next_categorical(weights.data(), static_cast<int>(weights.size()));
    int a = res.actions[slot];
    out.actions.push_back(a);
    s = env.advance(env.apply_action(s, a), path[s.k + 1]);
  }
  out.terminal = s;
  out.z = out.dead_end ? env.dead_end_scaled() : env.scaled_return(s);
  for (ReplayEntry& e : out.entries) e.z = out.z;
  return out;
}

namespace {

struct Batch {
  Matrix x, pi, z;
};

Batch gather(const ReplayBuffer& replay, const std::vector<int>& idx, int n_actions) {
  Batch b;
  int rows = static_cast<int>(idx.size());
  b.x.resize(rows, kAzFeatureDim);
  b.pi.resize(rows, n_actions);
  b.z.resize(rows, 1);
  for (int i = 0; i < rows; ++i) {
    const ReplayEntry& e = replay[idx[i]];
    b.x.row(i) = e.features.transpose();
    for (int a = 0; a < n_actions; ++a) b.pi(i, a) = e.policy_target[a];
    b.z(i, 0) = e.z;
  }
  return b;
}

// joint loss: policy cross entropy plus value squared error, batch-averaged
double train_batch(Mlp& net, AdamState& adam, const Batch& b) {
  Mlp::Workspace ws;
  std::vector<Matrix> out = net.forward(b.x, &ws, true);
  Matrix dpi, dv;
  double denom = static_cast<double>(b.x.rows());
  double loss = cross_entropy_loss(out[kAzPolicyHead], b.pi, denom, dpi) +
                value_mse_loss(out[kAzValueHead], b.z, denom, dv);
  Vector grad = Vector::Zero(net.n_params());
  net.backward(ws, {dpi, dv}, grad);
  adam.step(net.params(), grad);
  return loss;
}

double play_with_search(const Env& env, const NetEvaluator& ev, const SearchConfig& cfg,
                        const std::vector<double>& path, Rng& rng, const SearchHooks* hooks) {
  MdpState s = env.initial_state();
  s.price = path[0];
  while (!env.is_terminal(s)) {
    if (env.feasible(s).empty()) return env.dead_end_scaled();
    SearchResult res = search(env, s, cfg, ev, rng, hooks);
    s = env.advance(env.apply_action(s, res.best_action()), path[s.k + 1]);
  }
  return env.scaled_return(s);
}

SearchConfig per_move_search(const Env& env, const AzConfig& cfg) {
  SearchConfig scfg = cfg.search;
  if (cfg.divide_sims_across_moves)
    scfg.n_sims = std::max(1, cfg.search.n_sims / env.horizon());
  return scfg;
}

// self-play with the incumbent; entries land in the replay buffer
double selfplay_phase(Mlp& net, ReplayBuffer& replay, const Env& env, const AzConfig& cfg,
                      const SearchConfig& scfg, const PathFn& episode_paths, Rng rng,
                      const SearchHooks* hooks) {
  NetEvaluator ev = make_net_evaluator(env, net);
  double zsum = 0.0;
  for (int e = 0; e < cfg.episodes_per_cycle; ++e) {
    std::vector<double> path = episode_paths(rng);
    EpisodeResult epi = self_play_episode(env, scfg, ev, path, rng, hooks);
    zsum += epi.z;
    for (ReplayEntry& en : epi.entries) replay.push(std::move(en));
  }
  return zsum / std::max(1, cfg.episodes_per_cycle);
}

// trains the candidate in place on the buffer; returns {first, last} batch loss
std::pair<double, double> train_phase(Mlp& candidate, const ReplayBuffer& replay,
                                      const Env& env, const AzConfig& cfg, Rng rng) {
  std::pair<double, double> losses{0.0, 0.0};
  if (cfg.epochs <= 0 || replay.size() == 0) return losses;
  AdamState adam(cfg.lr);
  int per_epoch = static_cast<int>((replay.size() + cfg.batch_size - 1) / cfg.batch_size);
  bool first = true;
  for (int ep = 0; ep < cfg.epochs; ++ep) {
    for (int b = 0; b < per_epoch; ++b) {
      std::vector<int> idx = replay.sample_indices(cfg.batch_size, rng);
      double loss = train_batch(candidate, adam, gather(replay, idx, env.n_actions()));
      if (first) {
        losses.first = loss;
        first = false;
      }
      losses.second = loss;
    }
  }
  return losses;
}

// paired search validation on a deck: both nets replay path i on identically
// seeded simulation streams, so equal nets always tie
std::pair<double, double> search_deck_scores(const Env& env, Mlp& net, Mlp& candidate,
                                             const SearchConfig& scfg,
                                             const std::vector<std::vector<double>>& deck,
                                             Rng val_rng, const SearchHooks* hooks) {
  NetEvaluator inc_ev = make_net_evaluator(env, net);
  NetEvaluator cand_ev = make_net_evaluator(env, candidate);
  double inc = 0.0, cand = 0.0;
  for (std::size_t i = 0; i < deck.size(); ++i) {
    Rng ra = val_rng.split(i), rb = val_rng.split(i);
    inc += play_with_search(env, inc_ev, scfg, deck[i], ra, hooks);
    cand += play_with_search(env, cand_ev, scfg, deck[i], rb, hooks);
  }
  double n = static_cast<double>(std::max<std::size_t>(1, deck.size()));
  return {inc / n, cand / n};
}

}  // namespace

std::vector<double> policy_argmax_returns(const Env& env, Mlp& net,
                                          const std::vector<std::vector<double>>& paths) {
  int n = static_cast<int>(paths.size());
  std::vector<double> out(n, 0.0);
  std::vector<MdpState> states(n);
  std::vector<int> alive;
  alive.reserve(n);
  for (int i = 0; i < n; ++i) {
    states[i] = env.initial_state();
    states[i].price = paths[i][0];
    alive.push_back(i);
  }
  std::vector<std::vector<int>> feas;
  for (int k = 0; k < env.horizon() && !alive.empty(); ++k) {
    // settle dead ends first so the batch only carries states that act
    std::vector<int> acting;
    acting.reserve(alive.size());
    feas.clear();
    for (int i : alive) {
      std::vector<int> f = env.feasible(states[i]);
      if (f.empty()) {
        out[i] = env.dead_end_scaled();
      } else {
        acting.push_back(i);
        feas.push_back(std::move(f));
      }
    }
    if (acting.empty()) return out;
    Matrix x(static_cast<Eigen::Index>(acting.size()), kAzFeatureDim);
    for (std::size_t r = 0; r < acting.size(); ++r)
      x.row(static_cast<Eigen::Index>(r)) = az_features(env, states[acting[r]]).transpose();
    Matrix pi = net.forward(x)[kAzPolicyHead];
    for (std::size_t r = 0; r < acting.size(); ++r) {
      int i = acting[r];
      Eigen::Index row = static_cast<Eigen::Index>(r);
      int a = feas[r][0];
      for (int f : feas[r])
        if (pi(row, f) > pi(row, a)) a = f;
      states[i] = env.advance(env.apply_action(states[i], a), paths[i][states[i].k + 1]);
    }
    alive = std::move(acting);
  }
  for (int i : alive) out[i] = env.scaled_return(states[i]);
  return out;
}

double policy_deck_score(const Env& env, Mlp& net,
                         const std::vector<std::vector<double>>& deck) {
  if (deck.empty()) return 0.0;
  std::vector<double> z = policy_argmax_returns(env, net, deck);
  double sum = 0.0;
  for (double v : z) sum += v;
  return sum / static_cast<double>(z.size());
}

AzCycleRecord train_cycle(Mlp& net, ReplayBuffer& replay, const Env& env, const AzConfig& cfg,
                          const PathFn& episode_paths, const PathFn& val_paths, Rng& rng,
                          const SearchHooks* hooks) {
  AzCycleRecord rec;
  SearchConfig scfg = per_move_search(env, cfg);
  rec.selfplay_mean_z =
      selfplay_phase(net, replay, env, cfg, scfg, episode_paths, rng.split(1), hooks);

  Mlp candidate = net;
  std::tie(rec.train_loss_first, rec.train_loss_last) =
      train_phase(candidate, replay, env, cfg, rng.split(2));

  // paired validation: both nets see the same fresh paths
  Rng val_rng = rng.split(3);
  std::vector<std::vector<double>> deck;
  deck.reserve(cfg.validation_paths);
  for (int i = 0; i < cfg.validation_paths; ++i) deck.push_back(val_paths(val_rng));
  if (cfg.validate_with_search) {
    std::tie(rec.incumbent_score, rec.candidate_score) =
        search_deck_scores(env, net, candidate, scfg, deck, val_rng, hooks);
  } else {
    rec.incumbent_score = policy_deck_score(env, net, deck);
    rec.candidate_score = policy_deck_score(env, candidate, deck);
  }

  rec.accepted = rec.candidate_score > rec.incumbent_score;
  if (rec.accepted) net = std::move(candidate);
  return rec;
}

AzCycleRecord train_cycle(Mlp& net, ReplayBuffer& replay, const Env& env, const AzConfig& cfg,
                          const PathSource& episode_source, const PathSource& val_source,
                          Rng& rng, const SearchHooks* hooks) {
  PathFn episodes = [&episode_source](Rng& r) { return episode_source.next(r); };
  PathFn vals = [&val_source](Rng& r) { return val_source.next(r); };
  return train_cycle(net, replay, env, cfg, episodes, vals, rng, hooks);
}

AzCycleRecord train_cycle(Mlp& net, double& incumbent_score, ReplayBuffer& replay,
                          const Env& env, const AzConfig& cfg, const PathFn& episode_paths,
                          const std::vector<std::vector<double>>& val_deck, Rng& rng,
                          const SearchHooks* hooks) {
  AzCycleRecord rec;
  SearchConfig scfg = per_move_search(env, cfg);
  rec.selfplay_mean_z =
      selfplay_phase(net, replay, env, cfg, scfg, episode_paths, rng.split(1), hooks);

  Mlp candidate = net;
  std::tie(rec.train_loss_first, rec.train_loss_last) =
      train_phase(candidate, replay, env, cfg, rng.split(2));

  if (cfg.validate_with_search) {
    std::tie(incumbent_score, rec.candidate_score) =
        search_deck_scores(env, net, candidate, scfg, val_deck, rng.split(3), hooks);
  } else {
    rec.candidate_score = policy_deck_score(env, candidate, val_deck);
  }
  rec.incumbent_score = incumbent_score;

  rec.accepted = rec.candidate_score > rec.incumbent_score;
  if (rec.accepted) {
    net = std::move(candidate);
    incumbent_score = rec.candidate_score;
  }
  return rec;
}

AzTrainResult az_train(const Env& env, const AzConfig& cfg, std::uint64_t seed) {
  Rng master(seed);
  std::size_t cap = cfg.replay_capacity
                        ? cfg.replay_capacity
                        : static_cast<std::size_t>(std::max(1, cfg.episodes_per_cycle)) *
                              env.horizon();
  AzTrainResult out{Mlp(cfg.net, master.split(0).next_u64()), {}};
  ReplayBuffer replay(cap);
  PathSource source = PathSource::sampled(env.market(), env.horizon());
  PathFn episodes = [&source](Rng& r) { return source.next(r); };

  // one validation deck per run; every gate compares against the incumbent's
  // cached score on these same paths
  std::vector<std::vector<double>> deck;
  deck.reserve(cfg.validation_paths);
  Rng deck_rng = master.split(7);
  for (int i = 0; i < cfg.validation_paths; ++i) deck.push_back(source.next(deck_rng));
  double incumbent =
      cfg.validate_with_search ? 0.0 : policy_deck_score(env, out.net, deck);

  for (int c = 0; c < cfg.cycles; ++c) {
    Rng cycle_rng = master.split(100 + static_cast<std::uint64_t>(c));
    AzCycleRecord rec =
        train_cycle(out.net, incumbent, replay, env, cfg, episodes, deck, cycle_rng);
    rec.cycle = c;
    out.cycles.push_back(rec);
  }
  return out;
}

namespace {

AzEvalReport evaluate_core(const Env& env, const NetEvaluator& policy, const SearchConfig& cfg,
                           const PathFn& next_path, int n_paths, Rng& rng, bool with_search,
                           const SearchHooks* hooks) {
  AzEvalReport rep;
  rep.n_paths = n_paths;
  rep.t0_histogram.assign(env.n_actions(), 0);
  bool counting = env.config().task.is_counting();
  int successes = 0;
  double zsum = 0.0, loss_sum = 0.0, correct_sum = 0.0;
  for (int i = 0; i < n_paths; ++i) {
    std::vector<double> path = next_path(rng);
    MdpState s = env.initial_state();
    s.price = path[0];
    bool dead = false;
    while (!env.is_terminal(s)) {
      std::vector<int> feas = env.feasible(s);
      if (feas.empty()) {
        dead = true;
        break;
      }
      int a;
      if (with_search) {
        a = search(env, s, cfg, policy, rng, hooks).best_action();
      } else {
        PolicyValue pv = policy(s);
        a = feas[0];
        for (int f : feas)
          if (pv.priors[f] > pv.priors[a]) a = f;
      }
      if (s.k == 0) rep.t0_histogram[a] += 1;
      s = env.advance(env.apply_action(s, a), path[s.k + 1]);
    }
    if (dead) {
      zsum += env.dead_end_scaled();
      loss_sum += env.config().scale.loss_scale;
      continue;
    }
    zsum += env.scaled_return(s);
    loss_sum += env.loss_of(s);
    if (counting) {
      correct_sum += s.wealth;
      if (s.wealth >= env.horizon() - 0.5) successes += 1;
    }
  }
  int n = std::max(1, n_paths);
  rep.mean_z = zsum / n;
  rep.mean_loss = loss_sum / n;
  rep.mean_correct = correct_sum / n;
  rep.success_fraction = static_cast<double>(successes) / n;
  return rep;
}

}  // namespace

AzEvalReport az_evaluate(const Env& env, const NetEvaluator& policy, const SearchConfig& cfg,
                         const PathSource& source, int n_paths, Rng& rng,
                         bool with_search, const SearchHooks* hooks) {
  PathFn next = [&source](Rng& r) { return source.next(r); };
  return evaluate_core(env, policy, cfg, next, n_paths, rng, with_search, hooks);
}

AzEvalReport az_evaluate_paths(const Env& env, const NetEvaluator& policy,
                               const SearchConfig& cfg,
                               const std::vector<std::vector<double>>& paths, Rng& rng,
                               bool with_search, const SearchHooks* hooks) {
  std::size_t i = 0;
  PathFn next = [&paths, &i](Rng&) { return paths[i++]; };
  return evaluate_core(env, policy, cfg, next, static_cast<int>(paths.size()), rng,
                       with_search, hooks);
}

}  // namespace hedgebench
