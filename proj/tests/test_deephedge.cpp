#include "hedgebench/deephedge.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "doctest.h"
#include "hedgebench/experiments.hpp"
#include "json.hpp"

using namespace hedgebench;

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-5});
}

Matrix sample_paths(const Env& env, int count, std::uint64_t seed) {
  PathSource src = PathSource::sampled(env.market(), env.horizon());
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  rows.reserve(count);
  for (int i = 0; i < count; ++i) rows.push_back(src.next(rng));
  return paths_matrix(rows);
}

Env small_market_env(CostSpec cost, UtilitySpec utility) {
  MdpConfig cfg;
  cfg.horizon = 3;
  cfg.p0 = 0.4;
  cfg.initial_cash = 0.0;
  cfg.initial_holdings = 0.4;
  cfg.action_grid = uniform_grid(0.0, 0.05, 20);
  cfg.cost = cost;
  cfg.utility = utility;
  cfg.payoff = PayoffSpec::short_call(5.0);
  cfg.task = TaskSpec::replication();
  cfg.scale = RewardScale::loss_linear(10.0);
  std::vector<double> states;
  for (int i = 0; i < 9; ++i) states.push_back(4.6 + 0.1 * i);
  return Env(cfg, Market(TrinomialChain::band(states, 4, 0.2, 0.6, 0.2), "chain"));
}

DeepHedgeConfig tiny_stack_config(HedgeLoss loss) {
  DeepHedgeConfig cfg;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 6;
  cfg.activation = Activation::Tanh;
  cfg.loss = loss;
  return cfg;
}

// distance of every trade to the capped-cost kinks (at zero and at the cap);
// finite differencing is only meaningful away from them
double capped_kink_margin(const HedgeRollout& ro, const Env& env) {
  const auto& cost = env.config().cost;
  if (cost.kind != CostSpec::Kind::CappedProportional) return 1.0;
  const double cap_d = cost.cap / cost.rate;
  double m = 1.0;
  for (Eigen::Index b = 0; b < ro.actions.rows(); ++b) {
    double prev = env.config().initial_holdings;
    for (Eigen::Index k = 0; k < ro.actions.cols(); ++k) {
      const double d = std::abs(ro.actions(b, k) - prev);
      m = std::min({m, d, std::abs(d - cap_d)});
      prev = ro.actions(b, k);
    }
  }
  return m;
}

// distance between the two branch values of the target-distance loss
double branch_margin(const HedgeRollout& ro, const Matrix& paths, const Env& env,
                     double gap) {
  double m = 1.0;
  for (Eigen::Index b = 0; b < ro.actions.rows(); ++b)
    for (Eigen::Index k = 0; k < ro.actions.cols(); ++k) {
      const double a = ro.actions(b, k);
      const double t = env.config().task.target_action(static_cast<int>(k),
                                                       paths(b, k));
      const double d1 = (a - t) * (a - t);
      const double d2 = (a + t) * (a + t) + gap;
      m = std::min(m, std::abs(d1 - d2));
    }
  return m;
}

// central finite differences over every parameter of every step network
void check_chain_gradients(const Env& env, HedgeLoss loss, std::uint64_t seed) {
  DeepHedgeConfig cfg = tiny_stack_config(loss);
  const int n = env.horizon();
  Matrix paths = sample_paths(env, 4, seed + 5);

  PolicyStack stack(cfg, env.config(), seed);
  for (int attempt = 0;; ++attempt) {
    REQUIRE(attempt < 50);
    auto probe = rollout(stack, paths, env, false);
    if (capped_kink_margin(probe, env) > 1e-3 &&
        (loss == HedgeLoss::Utility ||
         branch_margin(probe, paths, env, cfg.bimodal_gap) > 1e-3))
      break;
    stack = PolicyStack(cfg, env.config(), seed + 1000 * (attempt + 1));
  }

  auto ro = rollout(stack, paths, env, true);
  std::vector<Vector> grads(n);
  for (int k = 0; k < n; ++k) grads[k] = Vector::Zero(stack.net(k).n_params());
  accumulate_gradients(stack, ro, paths, env, grads);

  const double h = 1e-5;
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < stack.net(k).n_params(); ++i) {
      const double keep = stack.net(k).params()[i];
      stack.net(k).params()[i] = keep + h;
      const double up = rollout(stack, paths, env, false).mean_loss;
      stack.net(k).params()[i] = keep - h;
      const double dn = rollout(stack, paths, env, false).mean_loss;
      stack.net(k).params()[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      CAPTURE(k);
      CAPTURE(i);
      CHECK(rel_err(grads[k][i], fd) < 1e-3);
    }
  }
}

}  // namespace

TEST_CASE("zero-initialized stack scores 1.25 on the five-step sequence task") {
  Env env = make_env("seq5");
  DeepHedgeConfig cfg;  // Table defaults: 2 x 64, target-distance loss
  cfg.init_scale = 0.0;
  PolicyStack stack(cfg, env.config(), 7);
  Matrix paths = Matrix::Zero(3, 6);
  auto ro = rollout(stack, paths, env, false);
  for (Eigen::Index b = 0; b < 3; ++b) CHECK(ro.path_loss[b] == 1.25);
  CHECK(ro.mean_loss == 1.25);
}

TEST_CASE("hand-built sign-reading stack solves the sign task exactly") {
  Env env = make_env("sign5");
  DeepHedgeConfig cfg = tiny_stack_config(HedgeLoss::TargetDistance);
  cfg.hidden_width = 4;
  cfg.init_scale = 0.0;
  PolicyStack stack(cfg, env.config(), 7);

  // zeroed nets, then one path: price feature -> hidden unit 0 -> head.
  // layout per net: W0 (2x4), b0 (4), head W (4x1), head bias
  const double gain = std::atanh(0.5);
  for (int k = 0; k < 5; ++k) {
    auto& p = stack.net(k).params();
    REQUIRE(p.size() == 17);
    p[1] = 40.0;   // W0(price row, unit 0): price feature is column 1
    p[12] = gain;  // head weight on unit 0
  }

  Matrix paths = sample_paths(env, 64, 99);
  auto ro = rollout(stack, paths, env, false);
  CHECK(ro.mean_loss < 1e-20);
  auto rep = evaluate(stack, paths, env);
  CHECK(rep.success_rate == 1.0);
  CHECK(rep.mean_correct == 5.0);
}

TEST_CASE("rollout bookkeeping agrees with the flat terminal P&L route") {
  Env env = small_market_env(CostSpec::capped_proportional(0.25, 0.05),
                             UtilitySpec::exponential(2.0, 0.5));
  DeepHedgeConfig cfg = tiny_stack_config(HedgeLoss::Utility);
  PolicyStack stack(cfg, env.config(), 123);
  Matrix paths = sample_paths(env, 16, 321);
  auto ro = rollout(stack, paths, env, false);
  const auto& mdp = env.config();
  for (Eigen::Index b = 0; b < 16; ++b) {
    std::vector<double> path(4), actions(3);
    for (int j = 0; j < 4; ++j) path[j] = paths(b, j);
    for (int k = 0; k < 3; ++k) actions[k] = ro.actions(b, k);
    const double pl = terminal_pl(path, actions, mdp.initial_cash,
                                  mdp.initial_holdings, mdp.p0, mdp.cost, mdp.payoff);
    CHECK(ro.path_loss[b] == doctest::Approx(-mdp.utility(pl)).epsilon(1e-12));
  }
}

TEST_CASE("chain gradients match finite differences for every cost and utility") {
  for (auto cost : {CostSpec::zero(), CostSpec::capped_proportional(0.25, 0.05),
                    CostSpec::quadratic(0.5)})
    for (auto utility : {UtilitySpec::mse_loss(), UtilitySpec::exponential(2.0, 0.5)}) {
      Env env = small_market_env(cost, utility);
      check_chain_gradients(env, HedgeLoss::Utility,
                            17 + static_cast<int>(cost.kind) * 10 +
                                static_cast<int>(utility.kind));
    }
}

TEST_CASE("chain gradients match finite differences on the sequence tasks") {
  check_chain_gradients(make_env("seq5"), HedgeLoss::TargetDistance, 31);
  check_chain_gradients(make_env("sign5"), HedgeLoss::TargetDistance, 37);
}

TEST_CASE("zero learning rate leaves the stack untouched") {
  Env env = make_env("seq5");
  DeepHedgeConfig cfg = tiny_stack_config(HedgeLoss::TargetDistance);
  cfg.lr = 0.0;
  cfg.total_episodes = 64;
  cfg.epochs = 2;
  PolicyStack stack(cfg, env.config(), 41);
  std::vector<Vector> before;
  for (int k = 0; k < 5; ++k) before.push_back(stack.net(k).params());
  train(stack, PathSource::sampled(env.market(), 5), env, 42);
  for (int k = 0; k < 5; ++k)
    CHECK(std::memcmp(before[k].data(), stack.net(k).params().data(),
                      sizeof(double) * before[k].size()) == 0);
}

TEST_CASE("training reduces the sequence-task loss") {
  Env env = make_env("seq5");
  DeepHedgeConfig cfg;
  cfg.total_episodes = 3000;
  cfg.epochs = 10;
  PolicyStack stack(cfg, env.config(), 51);
  auto result = train(stack, PathSource::sampled(env.market(), 5), env, 52);
  REQUIRE(result.loss_curve.size() == 10);
  CHECK(result.loss_curve.back() <= result.loss_curve.front());
}

TEST_CASE("training is deterministic in the seed") {
  Env env = make_env("seq5");
  DeepHedgeConfig cfg = tiny_stack_config(HedgeLoss::TargetDistance);
  cfg.total_episodes = 256;
  cfg.epochs = 2;
  auto run = [&](std::uint64_t seed) {
    PolicyStack stack(cfg, env.config(), seed);
    train(stack, PathSource::sampled(env.market(), 5), env, seed + 1);
    Vector flat(0);
    for (int k = 0; k < 5; ++k) {
      Vector next(flat.size() + stack.net(k).n_params());
      next << flat, stack.net(k).params();
      flat = next;
    }
    return flat;
  };
  Vector a = run(77), b = run(77), c = run(78);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("snapping picks the nearest grid action with ties to the lower index") {
  std::vector<double> grid = {0.0, 0.5, 1.0};
  CHECK(snap_to_grid(0.24, grid) == 0);
  CHECK(snap_to_grid(0.26, grid) == 1);
  CHECK(snap_to_grid(0.25, grid) == 0);  // exact tie
  CHECK(snap_to_grid(-3.0, grid) == 0);
  CHECK(snap_to_grid(3.0, grid) == 2);

  // constant-output stack lands between two grid points; lower bin wins
  Env env = make_env("seq5");
  DeepHedgeConfig cfg = tiny_stack_config(HedgeLoss::TargetDistance);
  cfg.init_scale = 0.0;
  PolicyStack stack(cfg, env.config(), 61);
  stack.shift_head_bias(std::atanh(0.05));
  Matrix paths = Matrix::Zero(3, 6);
  auto rep = evaluate(stack, paths, env);
  CHECK(rep.t0_histogram[10] == 3);  // grid action 0.0, not 0.1
  int total = 0;
  for (int c : rep.t0_histogram) total += c;
  CHECK(total == 3);
}

TEST_CASE("outputs steered to the wrong basin stay trapped through training") {
  Env env = make_env("seq5");
  DeepHedgeConfig cfg;
  cfg.init_scale = 0.25;
  cfg.total_episodes = 4000;
  cfg.epochs = 8;

  int trapped = 0;
  const int runs = 8;
  for (int r = 0; r < runs; ++r) {
    PolicyStack stack(cfg, env.config(), 900 + r);
    stack.shift_head_bias(std::atanh(0.5));

    // precondition of the demonstration: every initial output within (0.25, 0.75)
    Matrix probe = Matrix::Zero(1, 6);
    auto ro0 = rollout(stack, probe, env, false);
    for (int k = 0; k < 5; ++k) {
      REQUIRE(ro0.actions(0, k) > 0.25);
      REQUIRE(ro0.actions(0, k) < 0.75);
    }

    train(stack, PathSource::sampled(env.market(), 5), env, 800 + r);
    auto ro = rollout(stack, probe, env, false);
    bool wrong = false;
    for (int k = 0; k < 5; ++k) {
      const double target = env.config().task.targets[k];
      const int idx = snap_to_grid(ro.actions(0, k), env.config().action_grid);
      if (std::abs(env.config().action_grid[idx] + target) < 1e-9) wrong = true;
    }
    if (wrong) ++trapped;
  }
  CHECK(trapped > runs / 2);
}

TEST_CASE("run artifact is valid json with the recorded fields") {
  const std::string file = "dh_artifact.json";
  save_run_artifact(file, "cafe0123", 42, {1.0, 0.5}, {0, 3, 1}, {{"all_correct", true}});
  std::ifstream in(file);
  nlohmann::json j;
  in >> j;
  std::remove(file.c_str());
  CHECK(j["config_hash"] == "cafe0123");
  CHECK(j["seed"] == 42);
  CHECK(j["loss_curve"].size() == 2);
  CHECK(j["final_histogram"][1] == 3);
  CHECK(j["success_flags"]["all_correct"] == true);
}

TEST_CASE("config fingerprints separate different setups") {
  Env env = make_env("seq5");
  DeepHedgeConfig a, b;
  b.hidden_width = 128;
  CHECK(hedge_config_fingerprint(a, env.config()) !=
        hedge_config_fingerprint(b, env.config()));
  CHECK(hedge_config_fingerprint(a, env.config()) ==
        hedge_config_fingerprint(a, env.config()));
}

TEST_CASE("path sources draw from the market or the reservoir") {
  Env env = make_env("trinomial_cost");
  PathSource sampled = PathSource::sampled(env.market(), env.horizon());
  Rng rng(5);
  auto p = sampled.next(rng);
  CHECK(p.size() == 6);
  CHECK(p[0] == env.market().start_price());

  auto reservoir = std::make_shared<PathReservoir>(
      PathReservoir::generate(env.market(), 10, env.horizon(), 11));
  PathSource fixed = PathSource::from_reservoir(reservoir);
  Rng rng2(6);
  for (int i = 0; i < 20; ++i) {
    auto q = fixed.next(rng2);
    bool found = false;
    for (const auto& row : reservoir->paths)
      if (row == q) found = true;
    CHECK(found);
  }
}
