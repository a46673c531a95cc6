#include "hedgebench/deephedge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "hedgebench/numeric.hpp"
#include "json.hpp"

namespace hedgebench {

namespace {

// squared distance to the target with a second, slightly worse well at the
// mirrored action; the gap is what makes settling on the wrong side sticky
double two_mode_loss(double a, double t, double gap, double* grad) {
  const double e1 = a - t;
  const double e2 = a + t;
  const double d1 = e1 * e1;
  const double d2 = e2 * e2 + gap;
  if (d1 <= d2) {
    if (grad) *grad = 2.0 * e1;
    return d1;
  }
  if (grad) *grad = 2.0 * e2;
  return d2;
}

double price_feature(double price, double start) {
  return std::abs(start) > 1e-12 ? price / start : price;
}

}  // namespace

PolicyStack::PolicyStack(DeepHedgeConfig cfg, const MdpConfig& mdp, std::uint64_t seed)
    : cfg_(std::move(cfg)) {
  if (mdp.action_grid.empty())
    throw std::invalid_argument("PolicyStack: empty action grid");
  if (cfg_.inputs.dim() == 0)
    throw std::invalid_argument("PolicyStack: input spec selects nothing");
  lo_ = mdp.action_grid.front();
  hi_ = mdp.action_grid.back();

  MlpSpec spec;
  spec.input_dim = cfg_.inputs.dim();
  spec.hidden_layers = cfg_.hidden_layers;
  spec.hidden_width = cfg_.hidden_width;
  spec.activation = cfg_.activation;
  spec.norm = Norm::None;
  spec.heads = {{HeadKind::ScalarTanh, 1}};

  Rng base(seed);
  nets_.reserve(mdp.horizon);
  for (int k = 0; k < mdp.horizon; ++k) {
    Mlp net(spec, base.split(k).next_u64());
    if (cfg_.init_scale != 1.0) net.params() *= cfg_.init_scale;
    nets_.push_back(std::move(net));
  }
}

void PolicyStack::shift_head_bias(double delta) {
  // single scalar head, so its bias is the last parameter of each net
  for (auto& net : nets_) net.params()[net.n_params() - 1] += delta;
}

HedgeRollout rollout(PolicyStack& stack, const Matrix& paths, const Env& env,
                     bool tape) {
  const MdpConfig& mdp = env.config();
  const int n = stack.horizon();
  const auto B = paths.rows();
  if (paths.cols() != n + 1)
    throw std::invalid_argument("rollout: paths must have horizon + 1 prices");
  if (B == 0) throw std::invalid_argument("rollout: no paths");
  const HedgeInputSpec& in = stack.config().inputs;

  HedgeRollout ro;
  ro.actions.resize(B, n);
  if (tape) {
    ro.ws.resize(n);
    ro.raw.resize(n);
  }

  Vector prev = Vector::Constant(B, mdp.initial_holdings);
  Vector cash = Vector::Constant(B, mdp.initial_cash);
  const bool utility_mode = stack.config().loss == HedgeLoss::Utility;

  for (int k = 0; k < n; ++k) {
    Matrix input(B, in.dim());
    int c = 0;
    if (in.prev_action) input.col(c++) = prev;
    if (in.price) {
      for (Eigen::Index b = 0; b < B; ++b)
        input(b, c) = price_feature(paths(b, k), paths(b, 0));
      ++c;
    }
    if (in.time)
      input.col(c++).setConstant(static_cast<double>(k) / static_cast<double>(n));

    auto outs = stack.net(k).forward(input, tape ? &ro.ws[k] : nullptr, tape);
    if (tape) ro.raw[k] = outs[0];
    for (Eigen::Index b = 0; b < B; ++b) {
      const double a = stack.map_output(outs[0](b, 0));
      ro.actions(b, k) = a;
      if (utility_mode) {
        const double d = a - prev[b];
        cash[b] -= d * paths(b, k) + mdp.cost(d, paths(b, k));
      }
      prev[b] = a;
    }
  }

  ro.path_loss.resize(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    if (utility_mode) {
      const double pl = mdp.p0 + cash[b] + ro.actions(b, n - 1) * paths(b, n) +
                        mdp.payoff(paths(b, n));
      ro.path_loss[b] = -mdp.utility(pl);
    } else {
      double loss = 0.0;
      for (int k = 0; k < n; ++k)
        loss += two_mode_loss(ro.actions(b, k),
                              mdp.task.target_action(k, paths(b, k)),
                              stack.config().bimodal_gap, nullptr);
      ro.path_loss[b] = loss;
    }
  }
  ro.mean_loss = ro.path_loss.mean();
  return ro;
}

void accumulate_gradients(PolicyStack& stack, const HedgeRollout& ro,
                          const Matrix& paths, const Env& env,
                          std::vector<Vector>& grads) {
  const MdpConfig& mdp = env.config();
  const int n = stack.horizon();
  const auto B = paths.rows();
  if (ro.ws.empty()) throw std::invalid_argument("accumulate_gradients: rollout not taped");
  if (static_cast<int>(grads.size()) != n)
    throw std::invalid_argument("accumulate_gradients: one gradient vector per step");

  const bool utility_mode = stack.config().loss == HedgeLoss::Utility;
  const double out_span = 0.5 * (stack.action_high() - stack.action_low());
  const double invB = 1.0 / static_cast<double>(B);

  // terminal P&L sensitivities for the utility mode
  Vector dl_dpl(B);
  if (utility_mode) {
    for (Eigen::Index b = 0; b < B; ++b) {
      double cash = mdp.initial_cash;
      double prev = mdp.initial_holdings;
      for (int k = 0; k < n; ++k) {
        const double d = ro.actions(b, k) - prev;
        cash -= d * paths(b, k) + mdp.cost(d, paths(b, k));
        prev = ro.actions(b, k);
      }
      const double pl = mdp.p0 + cash + ro.actions(b, n - 1) * paths(b, n) +
                        mdp.payoff(paths(b, n));
      dl_dpl[b] = -mdp.utility.derivative(pl) * invB;
    }
  }

  Vector carry = Vector::Zero(B);  // dL/da_k arriving from later networks
  for (int k = n - 1; k >= 0; --k) {
    Vector g(B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const double a = ro.actions(b, k);
      if (utility_mode) {
        const double prev = k == 0 ? mdp.initial_holdings : ro.actions(b, k - 1);
        const double d = a - prev;
        double dpl = -paths(b, k) - mdp.cost.derivative(d, paths(b, k));
        if (k == n - 1) {
          dpl += paths(b, n);
        } else {
          const double d_next = ro.actions(b, k + 1) - a;
          dpl += paths(b, k + 1) + mdp.cost.derivative(d_next, paths(b, k + 1));
        }
        g[b] = dl_dpl[b] * dpl;
      } else {
        double gr;
        two_mode_loss(a, mdp.task.target_action(k, paths(b, k)),
                      stack.config().bimodal_gap, &gr);
        g[b] = gr * invB;
      }
      g[b] += carry[b];
    }

    Matrix head = (g * out_span).matrix();
    Matrix din = stack.net(k).backward(ro.ws[k], {head}, grads[k]);
    if (stack.config().inputs.prev_action && k > 0)
      carry = din.col(0);
    else
      carry.setZero();
  }
}

HedgeTrainResult train(PolicyStack& stack, const PathSource& source, const Env& env,
                       std::uint64_t seed) {
  const DeepHedgeConfig& cfg = stack.config();
  const int n = stack.horizon();
  if (source.horizon() != n)
    throw std::invalid_argument("train: path source horizon mismatch");

  Rng path_rng = Rng(seed).split(1);
  std::vector<AdamState> opt(n, AdamState(cfg.lr));
  const long long per_epoch = std::max<long long>(1, cfg.total_episodes / cfg.epochs);

  HedgeTrainResult result;
  std::vector<Vector> grads(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    long long seen = 0;
    for (long long remaining = per_epoch; remaining > 0;) {
      const int B = static_cast<int>(
          std::min<long long>(cfg.batch_size, remaining));
      remaining -= B;
      Matrix batch(B, n + 1);
      for (int b = 0; b < B; ++b) {
        const auto path = source.next(path_rng);
        for (int j = 0; j <= n; ++j) batch(b, j) = path[j];
      }
      auto ro = rollout(stack, batch, env, true);
      loss_sum += ro.mean_loss * B;
      seen += B;
      for (int k = 0; k < n; ++k) grads[k] = Vector::Zero(stack.net(k).n_params());
      accumulate_gradients(stack, ro, batch, env, grads);
      for (int k = 0; k < n; ++k) opt[k].step(stack.net(k).params(), grads[k]);
    }
    result.loss_curve.push_back(loss_sum / static_cast<double>(seen));
  }
  return result;
}

HedgeEvalReport evaluate(PolicyStack& stack, const Matrix& paths, const Env& env) {
  const MdpConfig& mdp = env.config();
  const int n = stack.horizon();
  auto ro = rollout(stack, paths, env, false);

  HedgeEvalReport rep;
  rep.mean_loss = ro.mean_loss;
  rep.t0_histogram.assign(mdp.action_grid.size(), 0);
  long long all_correct = 0;
  double correct_sum = 0.0;
  for (Eigen::Index b = 0; b < paths.rows(); ++b) {
    rep.t0_histogram[snap_to_grid(ro.actions(b, 0), mdp.action_grid)]++;
    if (mdp.task.is_counting()) {
      int correct = 0;
      for (int k = 0; k < n; ++k) {
        const int idx = snap_to_grid(ro.actions(b, k), mdp.action_grid);
        if (mdp.task.action_correct(k, paths(b, k), mdp.action_grid[idx])) ++correct;
      }
      correct_sum += correct;
      if (correct == n) ++all_correct;
    }
  }
  if (mdp.task.is_counting()) {
    rep.success_rate = static_cast<double>(all_correct) / paths.rows();
    rep.mean_correct = correct_sum / static_cast<double>(paths.rows());
  }
  return rep;
}

int snap_to_grid(double action, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("snap_to_grid: empty grid");
  int best = 0;
  double best_d = std::abs(action - grid[0]);
  for (int i = 1; i < static_cast<int>(grid.size()); ++i) {
    const double d = std::abs(action - grid[i]);
    if (d < best_d) {  // strict: ties keep the lower index
      best = i;
      best_d = d;
    }
  }
  return best;
}

Matrix paths_matrix(const std::vector<std::vector<double>>& paths) {
  if (paths.empty()) throw std::invalid_argument("paths_matrix: no paths");
  Matrix m(paths.size(), paths[0].size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (paths[i].size() != paths[0].size())
      throw std::invalid_argument("paths_matrix: ragged path lengths");
    for (std::size_t j = 0; j < paths[i].size(); ++j) m(i, j) = paths[i][j];
  }
  return m;
}

std::string hedge_config_fingerprint(const DeepHedgeConfig& cfg, const MdpConfig& mdp) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "dh|l%d|w%d|act%d|in%d%d%d|loss%d|gap%.9g|ep%d|bs%d|tot%lld|lr%.9g|"
                "is%.9g|h%d|grid%.9g:%.9g:%zu",
                cfg.hidden_layers, cfg.hidden_width, static_cast<int>(cfg.activation),
                cfg.inputs.prev_action, cfg.inputs.price, cfg.inputs.time,
                static_cast<int>(cfg.loss), cfg.bimodal_gap, cfg.epochs,
                cfg.batch_size, cfg.total_episodes, cfg.lr, cfg.init_scale,
                mdp.horizon, mdp.action_grid.front(), mdp.action_grid.back(),
                mdp.action_grid.size());
  return hex64(fnv1a64(buf));
}

void save_run_artifact(const std::string& filename, const std::string& config_hash,
                       std::uint64_t seed, const std::vector<double>& loss_curve,
                       const std::vector<int>& histogram,
                       const std::map<std::string, bool>& flags) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["loss_curve"] = loss_curve;
  j["final_histogram"] = histogram;
  j["success_flags"] = flags;
  std::ofstream out(filename);
  if (!out) throw std::runtime_error("save_run_artifact: cannot open " + filename);
  out << j.dump(2) << '\n';
}

}  // namespace hedgebench
