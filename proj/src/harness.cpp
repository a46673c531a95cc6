#include "hedgebench/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hedgebench/experiments.hpp"
#include "hedgebench/svg.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hedgebench {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---- enum <-> string ----

const char* cost_name(CostSpec::Kind k) {
  switch (k) {
    case CostSpec::Kind::Zero: return "zero";
    case CostSpec::Kind::CappedProportional: return "capped_proportional";
    case CostSpec::Kind::Quadratic: return "quadratic";
  }
  return "zero";
}

const char* utility_name(UtilitySpec::Kind k) {
  switch (k) {
    case UtilitySpec::Kind::MseLoss: return "mse_loss";
    case UtilitySpec::Kind::QuadraticUtility: return "quadratic_utility";
    case UtilitySpec::Kind::Exponential: return "exponential";
  }
  return "mse_loss";
}

const char* payoff_name(PayoffSpec::Kind k) {
  return k == PayoffSpec::Kind::ShortCall ? "short_call" : "none";
}

const char* task_name(TaskSpec::Kind k) {
  switch (k) {
    case TaskSpec::Kind::Replication: return "replication";
    case TaskSpec::Kind::TargetSequence: return "target_sequence";
    case TaskSpec::Kind::SignMatch: return "sign_match";
  }
  return "replication";
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "relu";
}

// ---- config -> json ----

json market_json(const Market& m) {
  json j;
  j["model_id"] = m.model_id();
  std::visit(
      [&](const auto& model) {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, TrinomialChain>) {
          j["model"] = "trinomial_chain";
          j["states"] = model.states();
          j["rows"] = model.rows();
          j["start_index"] = model.start_index();
        } else if constexpr (std::is_same_v<T, GbmGrid>) {
          j["model"] = "gbm_grid";
          j["start"] = model.start_price();
          j["mu"] = model.mu();
          j["sigma"] = model.sigma();
          j["tick"] = model.tick();
          j["floor"] = model.floor_price();
          j["quantile_bins"] = model.quantile_bins();
        } else if constexpr (std::is_same_v<T, SignProcess>) {
          j["model"] = "sign_process";
        } else {
          j["model"] = "dummy_const";
          j["value"] = model.start_price();
        }
      },
      m.model());
  return j;
}

json mdp_json(const MdpConfig& m) {
  json j;
  j["horizon"] = m.horizon;
  j["p0"] = m.p0;
  j["initial_cash"] = m.initial_cash;
  j["initial_holdings"] = m.initial_holdings;
  j["action_grid"] = m.action_grid;
  json cost{{"kind", cost_name(m.cost.kind)}};
  if (m.cost.kind == CostSpec::Kind::CappedProportional) {
    cost["rate"] = m.cost.rate;
    cost["cap"] = m.cost.cap;
  } else if (m.cost.kind == CostSpec::Kind::Quadratic) {
    cost["coef"] = m.cost.coef;
  }
  j["cost"] = cost;
  json util{{"kind", utility_name(m.utility.kind)}};
  if (m.utility.kind == UtilitySpec::Kind::Exponential) {
    util["a"] = m.utility.a;
    util["b"] = m.utility.b;
  }
  j["utility"] = util;
  json payoff{{"kind", payoff_name(m.payoff.kind)}};
  if (m.payoff.kind == PayoffSpec::Kind::ShortCall) payoff["strike"] = m.payoff.strike;
  j["payoff"] = payoff;
  j["cash_min"] = m.cash_min ? json(*m.cash_min) : json(nullptr);
  j["cash_max"] = m.cash_max ? json(*m.cash_max) : json(nullptr);
  json task{{"kind", task_name(m.task.kind)}};
  if (m.task.kind == TaskSpec::Kind::TargetSequence) task["targets"] = m.task.targets;
  j["task"] = task;
  if (m.scale.scheme == RewardScale::Scheme::LossLinear)
    j["reward_scale"] = json{{"scheme", "loss_linear"}, {"loss_scale", m.scale.loss_scale}};
  else
    j["reward_scale"] = json{{"scheme", "counting"}, {"n", m.scale.count_n}};
  return j;
}

json dh_json(const DhAgentConfig& a) {
  const DeepHedgeConfig& c = a.core;
  return json{{"hidden_layers", c.hidden_layers},
              {"hidden_width", c.hidden_width},
              {"activation", activation_name(c.activation)},
              {"inputs", json{{"prev_action", c.inputs.prev_action},
                              {"price", c.inputs.price},
                              {"time", c.inputs.time}}},
              {"loss", c.loss == HedgeLoss::Utility ? "utility" : "target_distance"},
              {"bimodal_gap", c.bimodal_gap},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"total_episodes", c.total_episodes},
              {"lr", c.lr},
              {"init_scale", c.init_scale},
              {"local_trap_init", a.local_trap_init},
              {"eval_paths", a.eval_paths}};
}

json az_json(const AzAgentConfig& a) {
  const AzConfig& c = a.core;
  return json{{"hidden_layers", a.hidden_layers},
              {"hidden_width", a.hidden_width},
              {"n_sims", c.search.n_sims},
              {"w", c.search.w},
              {"price_quantum", c.search.price_quantum},
              {"divide_sims_across_moves", c.divide_sims_across_moves},
              {"cycles", c.cycles},
              {"episodes_per_cycle", c.episodes_per_cycle},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"validation_paths", c.validation_paths},
              {"validate_with_search", c.validate_with_search},
              {"replay_capacity", c.replay_capacity},
              {"eval_paths", a.eval_paths},
              {"eval_with_search", a.eval_with_search}};
}

json mz_json(const MzAgentConfig& a) {
  const AzConfig& c = a.core.az;
  return json{{"hidden_layers", a.hidden_layers},
              {"hidden_width", a.hidden_width},
              {"n_sims", c.search.n_sims},
              {"mz_w1", c.search.mz_w1},
              {"mz_w2", c.search.mz_w2},
              {"price_quantum", c.search.price_quantum},
              {"divide_sims_across_moves", c.divide_sims_across_moves},
              {"cycles", c.cycles},
              {"episodes_per_cycle", c.episodes_per_cycle},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"validation_paths", c.validation_paths},
              {"validate_with_search", c.validate_with_search},
              {"replay_capacity", c.replay_capacity},
              {"dynamics", json{{"hidden_layers", a.core.dynamics.hidden_layers},
                                {"hidden_width", a.core.dynamics.hidden_width},
                                {"epochs", a.core.dynamics.epochs},
                                {"batch_size", a.core.dynamics.batch_size},
                                {"lr", a.core.dynamics.lr}}},
              {"eval_paths", a.core.eval_paths},
              {"use_true_kernel", a.core.use_true_kernel},
              {"reservoir_sizes", a.reservoir_sizes}};
}

json config_json(const ExperimentConfig& cfg) {
  json agents = json::object();
  if (cfg.dh) agents["dh"] = dh_json(*cfg.dh);
  if (cfg.az) agents["alphazero"] = az_json(*cfg.az);
  if (cfg.mz) agents["muzero"] = mz_json(*cfg.mz);
  if (cfg.dp_oracle) agents["dp_oracle"] = json::object();
  return json{{"experiment", cfg.id}, {"scale", cfg.scale},   {"n_cycles", cfg.n_cycles},
              {"seed", cfg.seed},     {"out_dir", cfg.out_dir}, {"market", market_json(cfg.market)},
              {"mdp", mdp_json(cfg.mdp)}, {"agents", agents}};
}

// ---- json -> config ----

// cursor into a document that remembers its dotted path for error messages
struct Cur {
  const json* j;
  std::string path;

  std::string sub(const char* key) const { return path.empty() ? key : path + "." + key; }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path, what); }

  void expect_object(std::initializer_list<const char*> allowed) const {
    if (!j->is_object()) fail("expected an object");
    for (auto it = j->begin(); it != j->end(); ++it) {
      bool known = false;
      for (const char* k : allowed)
        if (it.key() == k) {
          known = true;
          break;
        }
      if (!known) throw ConfigError(sub(it.key().c_str()), "unknown field");
    }
  }

  bool has(const char* key) const {
    return j->is_object() && j->contains(key) && !(*j)[key].is_null();
  }

  Cur at(const char* key) const {
    if (!j->is_object() || !j->contains(key)) throw ConfigError(sub(key), "missing field");
    return {&(*j)[key], sub(key)};
  }

  double num() const {
    if (!j->is_number()) fail("expected a number");
    return j->get<double>();
  }
  long long integer() const {
    if (!j->is_number_integer()) fail("expected an integer");
    return j->get<long long>();
  }
  std::uint64_t uinteger() const {
    if (!j->is_number_integer() && !j->is_number_unsigned()) fail("expected an integer");
    return j->get<std::uint64_t>();
  }
  bool boolean() const {
    if (!j->is_boolean()) fail("expected true or false");
    return j->get<bool>();
  }
  std::string str() const {
    if (!j->is_string()) fail("expected a string");
    return j->get<std::string>();
  }
  std::vector<double> num_array() const {
    if (!j->is_array()) fail("expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *j) {
      if (!e.is_number()) fail("expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
};

Market parse_market(const Cur& c) {
  c.expect_object({"model", "model_id", "states", "rows", "start_index", "start", "mu",
                   "sigma", "tick", "floor", "quantile_bins", "value"});
  std::string model = c.at("model").str();
  std::string id = c.has("model_id") ? c.at("model_id").str() : model;
  try {
    if (model == "trinomial_chain") {
      Cur rows = c.at("rows");
      if (!rows.j->is_array()) rows.fail("expected an array of rows");
      std::vector<std::vector<double>> mat;
      for (std::size_t r = 0; r < rows.j->size(); ++r)
        mat.push_back(Cur{&(*rows.j)[r], rows.path}.num_array());
      return Market(TrinomialChain(c.at("states").num_array(), mat,
                                   static_cast<int>(c.at("start_index").integer())),
                    id);
    }
    if (model == "gbm_grid") {
      int bins = c.has("quantile_bins") ? static_cast<int>(c.at("quantile_bins").integer()) : 21;
      return Market(GbmGrid(c.at("start").num(), c.at("mu").num(), c.at("sigma").num(),
                            c.at("tick").num(), c.at("floor").num(), bins),
                    id);
    }
    if (model == "sign_process") return Market(SignProcess(), id);
    if (model == "dummy_const")
      return Market(DummyConst(c.has("value") ? c.at("value").num() : 0.0), id);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(c.path, e.what());  // model constructor rejected the numbers
  }
  throw ConfigError(c.sub("model"), "unknown market model: " + model);
}

MdpConfig parse_mdp(const Cur& c) {
  c.expect_object({"horizon", "p0", "initial_cash", "initial_holdings", "action_grid",
                   "cost", "utility", "payoff", "cash_min", "cash_max", "task",
                   "reward_scale"});
  MdpConfig m;
  m.horizon = static_cast<int>(c.at("horizon").integer());
  m.p0 = c.has("p0") ? c.at("p0").num() : 0.0;
  m.initial_cash = c.has("initial_cash") ? c.at("initial_cash").num() : 0.0;
  m.initial_holdings = c.has("initial_holdings") ? c.at("initial_holdings").num() : 0.0;
  m.action_grid = c.at("action_grid").num_array();

  Cur cost = c.at("cost");
  cost.expect_object({"kind", "rate", "cap", "coef"});
  std::string ck = cost.at("kind").str();
  if (ck == "zero") m.cost = CostSpec::zero();
  else if (ck == "capped_proportional")
    m.cost = CostSpec::capped_proportional(cost.at("rate").num(), cost.at("cap").num());
  else if (ck == "quadratic") m.cost = CostSpec::quadratic(cost.at("coef").num());
  else throw ConfigError(cost.sub("kind"), "unknown cost kind: " + ck);

  Cur util = c.at("utility");
  util.expect_object({"kind", "a", "b"});
  std::string uk = util.at("kind").str();
  if (uk == "mse_loss") m.utility = UtilitySpec::mse_loss();
  else if (uk == "quadratic_utility") m.utility = UtilitySpec::quadratic_utility();
  else if (uk == "exponential")
    m.utility = UtilitySpec::exponential(util.at("a").num(), util.at("b").num());
  else throw ConfigError(util.sub("kind"), "unknown utility kind: " + uk);

  Cur payoff = c.at("payoff");
  payoff.expect_object({"kind", "strike"});
  std::string pk = payoff.at("kind").str();
  if (pk == "none") m.payoff = PayoffSpec::none();
  else if (pk == "short_call") m.payoff = PayoffSpec::short_call(payoff.at("strike").num());
  else throw ConfigError(payoff.sub("kind"), "unknown payoff kind: " + pk);

  if (c.has("cash_min")) m.cash_min = c.at("cash_min").num();
  if (c.has("cash_max")) m.cash_max = c.at("cash_max").num();

  Cur task = c.at("task");
  task.expect_object({"kind", "targets"});
  std::string tk = task.at("kind").str();
  if (tk == "replication") m.task = TaskSpec::replication();
  else if (tk == "target_sequence")
    m.task = TaskSpec::target_sequence(task.at("targets").num_array());
  else if (tk == "sign_match") m.task = TaskSpec::sign_match();
  else throw ConfigError(task.sub("kind"), "unknown task kind: " + tk);

  Cur scale = c.at("reward_scale");
  scale.expect_object({"scheme", "loss_scale", "n"});
  std::string sk = scale.at("scheme").str();
  if (sk == "loss_linear") m.scale = RewardScale::loss_linear(scale.at("loss_scale").num());
  else if (sk == "counting")
    m.scale = RewardScale::counting(static_cast<int>(scale.at("n").integer()));
  else throw ConfigError(scale.sub("scheme"), "unknown reward scale scheme: " + sk);
  return m;
}

DhAgentConfig parse_dh(const Cur& c) {
  c.expect_object({"hidden_layers", "hidden_width", "activation", "inputs", "loss",
                   "bimodal_gap", "epochs", "batch_size", "total_episodes", "lr",
                   "init_scale", "local_trap_init", "eval_paths"});
  DhAgentConfig a;
  DeepHedgeConfig& d = a.core;
  d.hidden_layers = static_cast<int>(c.at("hidden_layers").integer());
  d.hidden_width = static_cast<int>(c.at("hidden_width").integer());
  if (c.has("activation")) {
    std::string s = c.at("activation").str();
    if (s == "relu") d.activation = Activation::Relu;
    else if (s == "leaky_relu") d.activation = Activation::LeakyRelu;
    else if (s == "tanh") d.activation = Activation::Tanh;
    else if (s == "identity") d.activation = Activation::Identity;
    else throw ConfigError(c.sub("activation"), "unknown activation: " + s);
  }
  if (c.has("inputs")) {
    Cur in = c.at("inputs");
    in.expect_object({"prev_action", "price", "time"});
    d.inputs.prev_action = in.has("prev_action") ? in.at("prev_action").boolean() : true;
    d.inputs.price = in.has("price") ? in.at("price").boolean() : true;
    d.inputs.time = in.has("time") ? in.at("time").boolean() : false;
  }
  std::string loss = c.at("loss").str();
  if (loss == "target_distance") d.loss = HedgeLoss::TargetDistance;
  else if (loss == "utility") d.loss = HedgeLoss::Utility;
  else throw ConfigError(c.sub("loss"), "unknown loss: " + loss);
  if (c.has("bimodal_gap")) d.bimodal_gap = c.at("bimodal_gap").num();
  d.epochs = static_cast<int>(c.at("epochs").integer());
  d.batch_size = static_cast<int>(c.at("batch_size").integer());
  d.total_episodes = c.at("total_episodes").integer();
  d.lr = c.at("lr").num();
  if (c.has("init_scale")) d.init_scale = c.at("init_scale").num();
  if (c.has("local_trap_init")) a.local_trap_init = c.at("local_trap_init").boolean();
  if (c.has("eval_paths")) a.eval_paths = static_cast<int>(c.at("eval_paths").integer());
  return a;
}

void parse_az_training(const Cur& c, AzConfig& t) {
  t.cycles = static_cast<int>(c.at("cycles").integer());
  t.episodes_per_cycle = static_cast<int>(c.at("episodes_per_cycle").integer());
  t.epochs = static_cast<int>(c.at("epochs").integer());
  t.batch_size = static_cast<int>(c.at("batch_size").integer());
  t.lr = c.at("lr").num();
  t.validation_paths = static_cast<int>(c.at("validation_paths").integer());
  if (c.has("validate_with_search")) t.validate_with_search = c.at("validate_with_search").boolean();
  if (c.has("divide_sims_across_moves"))
    t.divide_sims_across_moves = c.at("divide_sims_across_moves").boolean();
  if (c.has("replay_capacity"))
    t.replay_capacity = static_cast<std::size_t>(c.at("replay_capacity").integer());
  if (c.has("price_quantum")) t.search.price_quantum = c.at("price_quantum").num();
}

AzAgentConfig parse_az(const Cur& c) {
  c.expect_object({"hidden_layers", "hidden_width", "n_sims", "w", "price_quantum",
                   "divide_sims_across_moves", "cycles", "episodes_per_cycle", "epochs",
                   "batch_size", "lr", "validation_paths", "validate_with_search",
                   "replay_capacity", "eval_paths", "eval_with_search"});
  AzAgentConfig a;
  a.hidden_layers = static_cast<int>(c.at("hidden_layers").integer());
  a.hidden_width = static_cast<int>(c.at("hidden_width").integer());
  a.core.search = SearchConfig::az(static_cast<int>(c.at("n_sims").integer()),
                                   c.has("w") ? c.at("w").num() : 1.0);
  parse_az_training(c, a.core);
  if (c.has("eval_paths")) a.eval_paths = static_cast<int>(c.at("eval_paths").integer());
  if (c.has("eval_with_search")) a.eval_with_search = c.at("eval_with_search").boolean();
  return a;
}

MzAgentConfig parse_mz(const Cur& c) {
  c.expect_object({"hidden_layers", "hidden_width", "n_sims", "mz_w1", "mz_w2",
                   "price_quantum", "divide_sims_across_moves", "cycles",
                   "episodes_per_cycle", "epochs", "batch_size", "lr", "validation_paths",
                   "validate_with_search", "replay_capacity", "dynamics", "eval_paths",
                   "use_true_kernel", "reservoir_sizes"});
  MzAgentConfig a;
  a.hidden_layers = static_cast<int>(c.at("hidden_layers").integer());
  a.hidden_width = static_cast<int>(c.at("hidden_width").integer());
  a.core.az.search = SearchConfig::mz(static_cast<int>(c.at("n_sims").integer()),
                                      c.has("mz_w1") ? c.at("mz_w1").num() : 1.25,
                                      c.has("mz_w2") ? c.at("mz_w2").num() : 19652.0);
  parse_az_training(c, a.core.az);
  Cur dyn = c.at("dynamics");
  dyn.expect_object({"hidden_layers", "hidden_width", "epochs", "batch_size", "lr"});
  a.core.dynamics.hidden_layers = static_cast<int>(dyn.at("hidden_layers").integer());
  a.core.dynamics.hidden_width = static_cast<int>(dyn.at("hidden_width").integer());
  a.core.dynamics.epochs = static_cast<int>(dyn.at("epochs").integer());
  a.core.dynamics.batch_size = static_cast<int>(dyn.at("batch_size").integer());
  a.core.dynamics.lr = dyn.at("lr").num();
  if (c.has("eval_paths")) a.core.eval_paths = static_cast<int>(c.at("eval_paths").integer());
  if (c.has("use_true_kernel")) a.core.use_true_kernel = c.at("use_true_kernel").boolean();
  if (c.has("reservoir_sizes")) {
    a.reservoir_sizes.clear();
    for (double v : c.at("reservoir_sizes").num_array())
      a.reservoir_sizes.push_back(static_cast<int>(v));
  }
  return a;
}

// ---- validation helpers ----

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

void validate_az_training(const AzConfig& t, const std::string& p) {
  require(t.search.n_sims >= 1, p + ".n_sims", "must be >= 1");
  require(t.search.w >= 0.0, p + ".w", "must be >= 0");
  require(t.search.price_quantum > 0.0, p + ".price_quantum", "must be > 0");
  require(t.cycles >= 1, p + ".cycles", "must be >= 1");
  require(t.episodes_per_cycle >= 1, p + ".episodes_per_cycle", "must be >= 1");
  require(t.epochs >= 1, p + ".epochs", "must be >= 1");
  require(t.batch_size >= 1, p + ".batch_size", "must be >= 1");
  require(t.lr > 0.0, p + ".lr", "must be > 0");
  require(t.validation_paths >= 1, p + ".validation_paths", "must be >= 1");
}

// ---- artifact writers ----

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + file.string());
  out << text;
}

json record_json(const RunRecord& r, const std::string& hash) {
  return json{{"agent", r.agent},
              {"cycle", r.cycle},
              {"seed", r.seed},
              {"mean_loss", r.mean_loss},
              {"mean_correct", r.mean_correct},
              {"success_fraction", r.success_fraction},
              {"success", r.success},
              {"modal_t0", r.modal_t0},
              {"t0_histogram", r.t0_histogram},
              {"config_hash", hash}};
}

int argmax_int(const std::vector<int>& v) {
  int best = -1, idx = -1;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] > best) {
      best = v[i];
      idx = static_cast<int>(i);
    }
  return idx;
}

std::string fmt_action(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

long long scaled_count(long long n, double scale) {
  return std::max(1LL, static_cast<long long>(std::llround(static_cast<double>(n) * scale)));
}

// ---- registry ----

ExperimentConfig registry_config(const std::string& id) {
  Env env = make_env(id);
  ExperimentConfig cfg;
  cfg.id = id;
  cfg.mdp = env.config();
  cfg.market = env.market();
  cfg.n_cycles = 100;

  auto az = [](int layers, int width, int sims, int cycles, int epc, int epochs, int val) {
    AzAgentConfig a;
    a.hidden_layers = layers;
    a.hidden_width = width;
    a.core.search = SearchConfig::az(sims, 1.0);
    a.core.cycles = cycles;
    a.core.episodes_per_cycle = epc;
    a.core.epochs = epochs;
    a.core.batch_size = 64;
    a.core.lr = 1e-3;
    a.core.validation_paths = val;
    a.core.divide_sims_across_moves = true;
    return a;
  };
  auto dh = [](int layers, int width, double lr, HedgeLoss loss, long long total) {
    DhAgentConfig d;
    d.core.hidden_layers = layers;
    d.core.hidden_width = width;
    d.core.lr = lr;
    d.core.loss = loss;
    d.core.epochs = 50;
    d.core.batch_size = 32;
    d.core.total_episodes = total;
    return d;
  };

  if (id == "seq5") {
    cfg.az = az(4, 256, 25, 30, 5000, 10, 10000);
    cfg.dh = dh(2, 64, 1e-3, HedgeLoss::TargetDistance, 150000);
  } else if (id == "sign5") {
    cfg.az = az(4, 512, 25, 30, 5000, 10, 10000);
    cfg.dh = dh(5, 512, 1e-4, HedgeLoss::TargetDistance, 150000);
  } else if (id == "trinomial_cost") {
    cfg.az = az(4, 512, 25, 60, 2500, 10, 10000);
    cfg.dh = dh(5, 128, 1e-4, HedgeLoss::Utility, 150000);
  } else if (id == "gbm_cost") {
    cfg.az = az(4, 256, 35, 30, 5000, 20, 10000);
    cfg.dh = dh(4, 128, 0.030, HedgeLoss::Utility, 150000);
  } else if (id == "trinomial_bounds") {
    cfg.az = az(4, 512, 35, 60, 500, 10, 500);
  } else if (id == "sample_efficiency") {
    cfg.dh = dh(2, 64, 1e-3, HedgeLoss::Utility, 20000);
    MzAgentConfig mz;
    mz.hidden_layers = 4;
    mz.hidden_width = 512;
    mz.core.az.search = SearchConfig::mz(25);
    mz.core.az.cycles = 40;
    mz.core.az.episodes_per_cycle = 500;
    mz.core.az.epochs = 10;
    mz.core.az.batch_size = 64;
    mz.core.az.lr = 1e-3;
    mz.core.az.validation_paths = 10000;
    mz.core.az.divide_sims_across_moves = true;
    mz.core.eval_paths = 1000;
    cfg.mz = mz;
  } else if (id.rfind("counterexample_", 0) == 0 && is_registered_experiment(id)) {
    cfg.dp_oracle = true;
    cfg.n_cycles = 1;
  } else {
    throw std::invalid_argument("unknown experiment id: " + id);
  }
  return cfg;
}

// ---- parse / serialize / validate / hash ----

std::string experiment_config_json(const ExperimentConfig& cfg) {
  return config_json(cfg).dump(2) + "\n";
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("not valid JSON: ") + e.what());
  }
  Cur root{&doc, ""};
  root.expect_object({"experiment", "scale", "n_cycles", "seed", "out_dir", "market", "mdp",
                      "agents"});
  ExperimentConfig cfg;
  cfg.id = root.at("experiment").str();
  if (root.has("scale")) cfg.scale = root.at("scale").num();
  if (root.has("n_cycles")) cfg.n_cycles = static_cast<int>(root.at("n_cycles").integer());
  if (root.has("seed")) cfg.seed = root.at("seed").uinteger();
  if (root.has("out_dir")) cfg.out_dir = root.at("out_dir").str();
  cfg.market = parse_market(root.at("market"));
  cfg.mdp = parse_mdp(root.at("mdp"));

  Cur agents = root.at("agents");
  agents.expect_object({"dh", "alphazero", "muzero", "dp_oracle"});
  if (agents.has("dh")) cfg.dh = parse_dh(agents.at("dh"));
  if (agents.has("alphazero")) cfg.az = parse_az(agents.at("alphazero"));
  if (agents.has("muzero")) cfg.mz = parse_mz(agents.at("muzero"));
  if (agents.has("dp_oracle")) cfg.dp_oracle = true;

  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& filename) {
  std::ifstream in(filename, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file: " + filename);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

void validate_config(const ExperimentConfig& cfg) {
  require(!cfg.id.empty(), "experiment", "must not be empty");
  require(cfg.scale > 0.0 && cfg.scale <= 1.0, "scale", "must be in (0, 1]");
  require(cfg.n_cycles >= 1, "n_cycles", "must be >= 1");
  require(cfg.mdp.horizon >= 1, "mdp.horizon", "must be >= 1");
  require(!cfg.mdp.action_grid.empty(), "mdp.action_grid", "must not be empty");
  if (cfg.mdp.cash_min && cfg.mdp.cash_max)
    require(*cfg.mdp.cash_min <= *cfg.mdp.cash_max, "mdp.cash_min", "exceeds cash_max");
  require(cfg.mdp.cost.rate >= 0 && cfg.mdp.cost.cap >= 0 && cfg.mdp.cost.coef >= 0,
          "mdp.cost", "parameters must be >= 0");
  if (cfg.mdp.utility.kind == UtilitySpec::Kind::Exponential)
    require(cfg.mdp.utility.a > 0 && cfg.mdp.utility.b > 0, "mdp.utility",
            "exponential needs a > 0 and b > 0");
  if (cfg.mdp.task.kind == TaskSpec::Kind::TargetSequence)
    require(static_cast<int>(cfg.mdp.task.targets.size()) == cfg.mdp.horizon,
            "mdp.task.targets", "needs one target per decision step");
  if (cfg.mdp.task.is_counting()) {
    require(cfg.mdp.scale.scheme == RewardScale::Scheme::Counting, "mdp.reward_scale",
            "counting tasks use the counting scheme");
    require(cfg.mdp.scale.count_n == cfg.mdp.horizon, "mdp.reward_scale.n",
            "must equal the horizon");
  } else {
    require(cfg.mdp.scale.scheme == RewardScale::Scheme::LossLinear, "mdp.reward_scale",
            "replication tasks use the loss_linear scheme");
    require(cfg.mdp.scale.loss_scale > 0, "mdp.reward_scale.loss_scale", "must be > 0");
  }
  require(cfg.dh || cfg.az || cfg.mz || cfg.dp_oracle, "agents",
          "at least one agent block is required");
  if (cfg.dh) {
    const DeepHedgeConfig& d = cfg.dh->core;
    require(d.hidden_layers >= 1, "agents.dh.hidden_layers", "must be >= 1");
    require(d.hidden_width >= 1, "agents.dh.hidden_width", "must be >= 1");
    require(d.epochs >= 1, "agents.dh.epochs", "must be >= 1");
    require(d.batch_size >= 1, "agents.dh.batch_size", "must be >= 1");
    require(d.total_episodes >= 1, "agents.dh.total_episodes", "must be >= 1");
    require(d.lr > 0, "agents.dh.lr", "must be > 0");
    require(d.bimodal_gap >= 0, "agents.dh.bimodal_gap", "must be >= 0");
    require(d.inputs.dim() >= 1, "agents.dh.inputs", "at least one input column");
    require(cfg.dh->eval_paths >= 1, "agents.dh.eval_paths", "must be >= 1");
  }
  if (cfg.az) {
    require(cfg.az->hidden_layers >= 1, "agents.alphazero.hidden_layers", "must be >= 1");
    require(cfg.az->hidden_width >= 1, "agents.alphazero.hidden_width", "must be >= 1");
    require(cfg.az->eval_paths >= 1, "agents.alphazero.eval_paths", "must be >= 1");
    validate_az_training(cfg.az->core, "agents.alphazero");
  }
  if (cfg.mz) {
    require(cfg.mz->hidden_layers >= 1, "agents.muzero.hidden_layers", "must be >= 1");
    require(cfg.mz->hidden_width >= 1, "agents.muzero.hidden_width", "must be >= 1");
    validate_az_training(cfg.mz->core.az, "agents.muzero");
    const DynamicsConfig& dy = cfg.mz->core.dynamics;
    require(dy.hidden_layers >= 1 && dy.hidden_width >= 1, "agents.muzero.dynamics",
            "hidden sizes must be >= 1");
    require(dy.epochs >= 1 && dy.batch_size >= 1, "agents.muzero.dynamics",
            "epochs and batch_size must be >= 1");
    require(dy.lr > 0, "agents.muzero.dynamics.lr", "must be > 0");
    require(cfg.mz->core.eval_paths >= 1, "agents.muzero.eval_paths", "must be >= 1");
    require(!cfg.mz->reservoir_sizes.empty(), "agents.muzero.reservoir_sizes",
            "must not be empty");
    for (int s : cfg.mz->reservoir_sizes)
      require(s >= 1, "agents.muzero.reservoir_sizes", "sizes must be >= 1");
    require(cfg.dh.has_value(), "agents.muzero",
            "needs a dh block (the reservoir protocol trains both agents on shared data)");
    require(!cfg.mdp.task.is_counting(), "agents.muzero",
            "the reservoir protocol runs replication tasks only");
    if (!cfg.mz->core.use_true_kernel)
      require(std::holds_alternative<TrinomialChain>(cfg.market.model()), "market.model",
              "muzero's learned dynamics need a trinomial_chain market");
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  json doc = config_json(cfg);
  doc.erase("seed");
  doc.erase("out_dir");
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(doc.dump())));
  return buf;
}

// ---- aggregation ----

RunStats aggregate(const std::vector<RunRecord>& records, const Env& env) {
  RunStats out;
  out.records = records;
  bool counting = env.config().task.is_counting();
  std::vector<std::string> order;
  for (const auto& r : records)
    if (std::find(order.begin(), order.end(), r.agent) == order.end()) order.push_back(r.agent);

  for (const std::string& agent : order) {
    AgentStats st;
    st.agent = agent;
    st.metric = counting ? "mean_correct" : "mean_loss";
    st.histogram.assign(counting ? env.horizon() + 1 : env.n_actions(), 0);
    std::vector<double> vals;
    int successes = 0;
    for (const auto& r : records) {
      if (r.agent != agent) continue;
      ++st.n_runs;
      vals.push_back(counting ? r.mean_correct : r.mean_loss);
      if (r.success) ++successes;
      if (counting) {
        int bin = std::clamp(static_cast<int>(std::lround(r.mean_correct)), 0, env.horizon());
        ++st.histogram[bin];
      } else if (r.modal_t0 >= 0 && r.modal_t0 < env.n_actions()) {
        ++st.histogram[r.modal_t0];
      }
    }
    st.mean = 0.0;
    for (double v : vals) st.mean += v;
    st.mean /= std::max<std::size_t>(1, vals.size());
    st.p5 = percentile_linear(vals, 5.0);
    st.p95 = percentile_linear(vals, 95.0);
    st.success_fraction = st.n_runs ? static_cast<double>(successes) / st.n_runs : 0.0;
    out.agents.push_back(std::move(st));
  }
  return out;
}

// ---- running ----

namespace {

RunRecord record_from_az(const AzEvalReport& rep, int cycle, std::uint64_t seed) {
  RunRecord r;
  r.agent = "alphazero";
  r.cycle = cycle;
  r.seed = seed;
  r.mean_loss = rep.mean_loss;
  r.mean_correct = rep.mean_correct;
  r.success_fraction = rep.success_fraction;
  r.success = rep.success_fraction == 1.0;
  r.t0_histogram = rep.t0_histogram;
  r.modal_t0 = argmax_int(rep.t0_histogram);
  return r;
}

RunRecord record_from_dh(const HedgeEvalReport& rep, int cycle, std::uint64_t seed) {
  RunRecord r;
  r.agent = "dh";
  r.cycle = cycle;
  r.seed = seed;
  r.mean_loss = rep.mean_loss;
  r.mean_correct = rep.mean_correct;
  r.success_fraction = rep.success_rate;
  r.success = rep.success_rate == 1.0;
  r.t0_histogram = rep.t0_histogram;
  r.modal_t0 = argmax_int(rep.t0_histogram);
  return r;
}

Matrix sample_eval_paths(const Env& env, int n, Rng& rng) {
  PathSource src = PathSource::sampled(env.market(), env.horizon());
  std::vector<std::vector<double>> paths;
  paths.reserve(n);
  for (int i = 0; i < n; ++i) paths.push_back(src.next(rng));
  return paths_matrix(paths);
}

void write_runs_jsonl(const fs::path& file, const std::vector<RunRecord>& records,
                      const std::string& hash) {
  std::ostringstream s;
  for (const auto& r : records) s << record_json(r, hash).dump() << '\n';
  write_text(file, s.str());
}

void write_aggregate_csv(const fs::path& file, const RunStats& stats,
                         const std::string& hash) {
  std::ostringstream s;
  s << "# config " << hash << '\n';
  s << "agent,n_runs,metric,mean,p5,p95,success_fraction\n";
  for (const auto& a : stats.agents)
    s << a.agent << ',' << a.n_runs << ',' << a.metric << ',' << fmt17(a.mean) << ','
      << fmt17(a.p5) << ',' << fmt17(a.p95) << ',' << fmt17(a.success_fraction) << '\n';
  write_text(file, s.str());
}

void write_histogram_csv(const fs::path& file, const AgentStats& st, const Env& env,
                         bool counting, const std::string& hash) {
  std::ostringstream s;
  s << "# config " << hash << '\n';
  s << "bin,label,count\n";
  for (std::size_t b = 0; b < st.histogram.size(); ++b) {
    std::string label = counting ? std::to_string(b)
                                 : fmt_action(env.action_value(static_cast<int>(b)));
    s << b << ',' << label << ',' << st.histogram[b] << '\n';
  }
  write_text(file, s.str());
}

std::vector<std::string> histogram_labels(const AgentStats& st, const Env& env,
                                          bool counting) {
  std::vector<std::string> labels;
  for (std::size_t b = 0; b < st.histogram.size(); ++b)
    labels.push_back(counting ? std::to_string(b)
                              : fmt_action(env.action_value(static_cast<int>(b))));
  return labels;
}

void write_qslice_files(const fs::path& dir, const std::string& stem,
                        const std::vector<QSlicePoint>& slice, const std::string& title,
                        const std::string& hash, std::vector<std::string>& files) {
  std::ostringstream s;
  s << "# config " << hash << '\n';
  s << "action,value,feasible\n";
  for (const auto& p : slice) {
    if (p.feasible) s << fmt17(p.action) << ',' << fmt17(p.value) << ",1\n";
    else s << fmt17(p.action) << ",nan,0\n";
  }
  write_text(dir / (stem + ".csv"), s.str());
  files.push_back(stem + ".csv");

  SvgSeries series;
  series.label = "Q(s, a)";
  for (const auto& p : slice) {
    series.x.push_back(p.action);
    series.y.push_back(p.feasible ? p.value : NAN);
  }
  write_text(dir / (stem + ".svg"), "<!-- config " + hash + " -->\n" +
                                        svg_line_plot({series}, title, "action (new holdings)",
                                                      "expected utility"));
  files.push_back(stem + ".svg");
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  validate_config(cfg);
  Env env(cfg.mdp, cfg.market);
  fs::path dir = fs::path(cfg.out_dir) / cfg.id;
  fs::create_directories(dir);

  ExperimentOutcome out;
  out.dir = dir.string();
  out.hash = config_hash(cfg);

  json cfg_doc = config_json(cfg);
  cfg_doc["config_hash"] = out.hash;
  write_text(dir / "config.json", cfg_doc.dump(2) + "\n");
  out.files.push_back("config.json");

  json summary{{"experiment", cfg.id}, {"config_hash", out.hash},
               {"scale", cfg.scale},   {"n_cycles", cfg.n_cycles}};
  auto t0 = std::chrono::steady_clock::now();

  if (cfg.dp_oracle) {
    DpSolution sol = solve_dp(env);
    out.root_value = sol.root_value();
    out.greedy_action = sol.root_greedy_action();
    out.modality = modality_scan(sol.root_slice());
    write_qslice_files(dir, "qslice", sol.root_slice(), cfg.id + ": Q at the initial state",
                       out.hash, out.files);
    summary["dp"] = json{{"root_value", out.root_value},
                         {"greedy_action", out.greedy_action},
                         {"greedy_action_value", env.action_value(out.greedy_action)},
                         {"n_local_maxima", out.modality.n_local_maxima},
                         {"n_components", out.modality.n_components}};
    if (log) *log << cfg.id << " dp: V*=" << sol.root_value() << " greedy="
                  << out.greedy_action << " maxima=" << out.modality.n_local_maxima
                  << " components=" << out.modality.n_components << '\n';
  }

  if (cfg.mz) {
    // shared-reservoir protocol: both agents on identical train/eval splits
    SampleEfficiencyConfig sc;
    sc.sizes = cfg.mz->reservoir_sizes;
    sc.n_runs = cfg.n_cycles;
    sc.eval_paths = static_cast<int>(scaled_count(cfg.mz->core.eval_paths, cfg.scale));
    sc.dh = cfg.dh->core;
    sc.dh.total_episodes = scaled_count(sc.dh.total_episodes, cfg.scale);
    sc.mz = cfg.mz->core;
    sc.mz.az.net = az_net_spec(env, cfg.mz->hidden_layers, cfg.mz->hidden_width);
    sc.mz.az.episodes_per_cycle =
        static_cast<int>(scaled_count(sc.mz.az.episodes_per_cycle, cfg.scale));
    sc.mz.az.validation_paths =
        static_cast<int>(scaled_count(sc.mz.az.validation_paths, cfg.scale));
    sc.mz.dynamics.epochs = static_cast<int>(scaled_count(sc.mz.dynamics.epochs, cfg.scale));
    sc.mz.eval_paths = sc.eval_paths;
    sc.seed = cfg.seed;
    sc.log = log;
    out.sample_eff = sample_efficiency_experiment(env, sc);

    std::ostringstream rows, stats;
    rows << "# config " << out.hash << '\n';
    write_rows_csv(rows, out.sample_eff.rows);
    write_text(dir / "rows.csv", rows.str());
    out.files.push_back("rows.csv");
    stats << "# config " << out.hash << '\n';
    write_stats_csv(stats, out.sample_eff.stats);
    write_text(dir / "stats.csv", stats.str());
    out.files.push_back("stats.csv");

    std::vector<SvgSeries> series;
    for (const std::string& agent : {std::string("dh"), std::string("muzero")}) {
      SvgSeries sr;
      sr.label = agent;
      for (const auto& st : out.sample_eff.stats)
        if (st.agent == agent) {
          sr.x.push_back(st.reservoir_size);
          sr.y.push_back(st.mean);
          sr.band_lo.push_back(st.p5);
          sr.band_hi.push_back(st.p95);
        }
      if (!sr.x.empty()) series.push_back(std::move(sr));
    }
    write_text(dir / "sample_efficiency.svg",
               "<!-- config " + out.hash + " -->\n" +
                   svg_line_plot(series, cfg.id + ": eval loss vs reservoir size",
                                 "reservoir size (paths)", "mean eval loss",
                                 /*log_x=*/true));
    out.files.push_back("sample_efficiency.svg");

    json stats_json = json::array();
    for (const auto& st : out.sample_eff.stats)
      stats_json.push_back(json{{"agent", st.agent},
                                {"reservoir_size", st.reservoir_size},
                                {"mean", st.mean},
                                {"p5", st.p5},
                                {"p95", st.p95}});
    summary["sample_efficiency"] = stats_json;
  } else if (cfg.az || cfg.dh) {
    std::vector<RunRecord> records;
    Rng master(cfg.seed);
    for (int c = 0; c < cfg.n_cycles; ++c) {
      if (cfg.az) {
        AzConfig ac = cfg.az->core;
        ac.net = az_net_spec(env, cfg.az->hidden_layers, cfg.az->hidden_width);
        ac.episodes_per_cycle =
            static_cast<int>(scaled_count(ac.episodes_per_cycle, cfg.scale));
        ac.validation_paths =
            static_cast<int>(scaled_count(ac.validation_paths, cfg.scale));
        std::uint64_t seed = master.split(1000 + static_cast<std::uint64_t>(c)).next_u64();
        auto tc = std::chrono::steady_clock::now();
        AzTrainResult tr = az_train(env, ac, seed);
        NetEvaluator ev = make_net_evaluator(env, tr.net);
        Rng erng = master.split(5000 + static_cast<std::uint64_t>(c));
        AzEvalReport rep = az_evaluate(
            env, ev, cfg.az->core.search, PathSource::sampled(env.market(), env.horizon()),
            static_cast<int>(scaled_count(cfg.az->eval_paths, cfg.scale)), erng,
            cfg.az->eval_with_search);
        records.push_back(record_from_az(rep, c, seed));
        if (log) *log << cfg.id << " cycle " << c + 1 << '/' << cfg.n_cycles
                      << " alphazero: loss=" << rep.mean_loss
                      << " correct=" << rep.mean_correct << " modal_t0="
                      << records.back().modal_t0 << " (" << elapsed_s(tc) << "s)\n";
      }
      if (cfg.dh) {
        DeepHedgeConfig dc = cfg.dh->core;
        dc.total_episodes = scaled_count(dc.total_episodes, cfg.scale);
        std::uint64_t seed = master.split(2000 + static_cast<std::uint64_t>(c)).next_u64();
        auto tc = std::chrono::steady_clock::now();
        PolicyStack stack(dc, cfg.mdp, seed);
        if (cfg.dh->local_trap_init) stack.shift_head_bias(std::atanh(0.5));
        PathSource src = PathSource::sampled(env.market(), env.horizon());
        train(stack, src, env, master.split(3000 + static_cast<std::uint64_t>(c)).next_u64());
        Rng erng = master.split(6000 + static_cast<std::uint64_t>(c));
        Matrix eval_paths = sample_eval_paths(
            env, static_cast<int>(scaled_count(cfg.dh->eval_paths, cfg.scale)), erng);
        HedgeEvalReport rep = evaluate(stack, eval_paths, env);
        records.push_back(record_from_dh(rep, c, seed));
        if (log) *log << cfg.id << " cycle " << c + 1 << '/' << cfg.n_cycles
                      << " dh: loss=" << rep.mean_loss << " correct=" << rep.mean_correct
                      << " modal_t0=" << records.back().modal_t0 << " (" << elapsed_s(tc)
                      << "s)\n";
      }
    }
    out.stats = aggregate(records, env);
    write_runs_jsonl(dir / "runs.jsonl", records, out.hash);
    out.files.push_back("runs.jsonl");
    write_aggregate_csv(dir / "aggregate.csv", out.stats, out.hash);
    out.files.push_back("aggregate.csv");

    bool counting = env.config().task.is_counting();
    json agents_json = json::object();
    for (const auto& st : out.stats.agents) {
      write_histogram_csv(dir / ("histogram_" + st.agent + ".csv"), st, env, counting,
                          out.hash);
      out.files.push_back("histogram_" + st.agent + ".csv");
      std::vector<double> counts(st.histogram.begin(), st.histogram.end());
      std::string title = cfg.id + ": " + st.agent +
                          (counting ? " correct actions per run" : " modal first action");
      write_text(dir / ("histogram_" + st.agent + ".svg"),
                 "<!-- config " + out.hash + " -->\n" +
                     svg_histogram(counts, histogram_labels(st, env, counting), title,
                                   counting ? "correct actions" : "first action",
                                   "runs"));
      out.files.push_back("histogram_" + st.agent + ".svg");
      agents_json[st.agent] = json{{"n_runs", st.n_runs},
                                   {"metric", st.metric},
                                   {"mean", st.mean},
                                   {"p5", st.p5},
                                   {"p95", st.p95},
                                   {"success_fraction", st.success_fraction}};
    }
    summary["agents"] = agents_json;
  }

  if (log) *log << cfg.id << " finished in " << elapsed_s(t0) << "s\n";
  summary["files"] = out.files;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out.files.push_back("summary.json");
  return out;
}

ExperimentOutcome dp_export(const ExperimentConfig& cfg, const DpExportRequest& req,
                            std::ostream* log) {
  validate_config(cfg);
  Env env(cfg.mdp, cfg.market);
  fs::path dir = fs::path(cfg.out_dir) / cfg.id;
  fs::create_directories(dir);

  ExperimentOutcome out;
  out.dir = dir.string();
  out.hash = config_hash(cfg);

  MdpState root = req.state ? *req.state : env.initial_state();
  DpSolution sol = solve_dp_from(env, root);
  out.root_value = sol.root_value();
  out.greedy_action = sol.root_greedy_action();
  out.modality = modality_scan(sol.root_slice());
  write_qslice_files(dir, "qslice", sol.root_slice(), cfg.id + ": Q slice", out.hash,
                     out.files);
  if (log) *log << cfg.id << " dp: V*=" << out.root_value << " greedy=" << out.greedy_action
                << " maxima=" << out.modality.n_local_maxima << " components="
                << out.modality.n_components << '\n';

  if (!req.heatmap_cash.empty()) {
    // Q(cash, action) sweep at the root's (k, holdings, price)
    std::vector<std::vector<double>> values;
    std::ostringstream csv;
    csv << "# config " << out.hash << '\n';
    csv << "cash,action,value,feasible\n";
    for (double cash : req.heatmap_cash) {
      MdpState s = root;
      s.cash = cash;
      std::vector<QSlicePoint> slice = q_slice(env, s);
      std::vector<double> row;
      for (const auto& p : slice) {
        row.push_back(p.feasible ? p.value : NAN);
        csv << fmt17(cash) << ',' << fmt17(p.action) << ','
            << (p.feasible ? fmt17(p.value) : "nan") << ',' << (p.feasible ? 1 : 0) << '\n';
      }
      values.push_back(std::move(row));
    }
    write_text(dir / "heatmap.csv", csv.str());
    out.files.push_back("heatmap.csv");

    std::vector<std::string> xl, yl;
    for (int a = 0; a < env.n_actions(); ++a) xl.push_back(fmt_action(env.action_value(a)));
    for (double cash : req.heatmap_cash) yl.push_back(fmt_action(cash));
    write_text(dir / "heatmap.svg",
               "<!-- config " + out.hash + " -->\n" +
                   svg_heatmap(values, xl, yl, cfg.id + ": Q(cash, action)",
                               "action (new holdings)", "cash"));
    out.files.push_back("heatmap.svg");
  }

  json summary{{"experiment", cfg.id},
               {"config_hash", out.hash},
               {"dp", json{{"root_value", out.root_value},
                           {"greedy_action", out.greedy_action},
                           {"n_local_maxima", out.modality.n_local_maxima},
                           {"n_components", out.modality.n_components}}},
               {"files", out.files}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out.files.push_back("summary.json");
  return out;
}

}  // namespace hedgebench
