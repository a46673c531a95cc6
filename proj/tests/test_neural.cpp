#include "hedgebench/neural.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "doctest.h"

using namespace hedgebench;

namespace {

// scalar training loss used by the gradient checks: cross entropy for
// simplex heads, squared error against fixed targets for tanh heads
struct CheckLoss {
  std::vector<Matrix> targets;

  static CheckLoss make(const Mlp& net, int batch, Rng& rng) {
    CheckLoss cl;
    for (const auto& h : net.spec().heads) {
      const int d = h.kind == HeadKind::ScalarTanh ? 1 : h.dim;
      Matrix t(batch, d);
      if (h.kind == HeadKind::Softmax || h.kind == HeadKind::ProbabilitySimplex) {
        for (int i = 0; i < batch; ++i) {
          double s = 0.0;
          for (int j = 0; j < d; ++j) {
            t(i, j) = 0.05 + rng.next_double();
            s += t(i, j);
          }
          t.row(i) /= s;
        }
      } else {
        for (int i = 0; i < batch; ++i)
          for (int j = 0; j < d; ++j) t(i, j) = 1.6 * rng.next_double() - 0.8;
      }
      cl.targets.push_back(t);
    }
    return cl;
  }

  double eval(const Mlp& net, const std::vector<Matrix>& outs,
              std::vector<Matrix>* grads) const {
    double loss = 0.0;
    if (grads) grads->clear();
    for (std::size_t h = 0; h < outs.size(); ++h) {
      Matrix d;
      const auto kind = net.spec().heads[h].kind;
      if (kind == HeadKind::Softmax || kind == HeadKind::ProbabilitySimplex)
        loss += cross_entropy_loss(outs[h], targets[h], 1.0, d);
      else
        loss += value_mse_loss(outs[h], targets[h], 1.0, d);
      if (grads) grads->push_back(std::move(d));
    }
    return loss;
  }
};

double loss_at(Mlp& net, const Matrix& x, bool train, const CheckLoss& cl) {
  Vector saved = net.running_stats();
  auto outs = net.forward(x, nullptr, train);
  net.running_stats() = saved;  // keep finite differencing side-effect free
  return cl.eval(net, outs, nullptr);
}

// relative error with a floor: batch-norm layers make the preceding bias
// gradient exactly zero, where the finite difference is pure rounding noise
double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-5});
}

// smallest distance of any relu input to its kink; finite differencing is
// only trustworthy when no pre-activation straddles zero
double kink_margin(const MlpSpec& spec, const Mlp::Workspace& ws) {
  if (spec.activation != Activation::Relu &&
      spec.activation != Activation::LeakyRelu)
    return 1.0;
  double m = 1.0;
  for (const auto& n : ws.normalized) m = std::min(m, n.cwiseAbs().minCoeff());
  return m;
}

// finite-difference check of every parameter gradient and every input
// gradient for one architecture
void check_gradients(MlpSpec spec, bool train, std::uint64_t seed) {
  const int batch = 5;
  Mlp net(spec, seed);
  Rng rng(seed + 77);
  Matrix x(batch, spec.input_dim);
  Mlp::Workspace ws;
  CheckLoss cl;
  for (int attempt = 0;; ++attempt) {
    REQUIRE(attempt < 50);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      x.data()[i] = 2.0 * rng.next_double() - 1.0;
    Vector probe_saved = net.running_stats();
    net.forward(x, &ws, train);
    net.running_stats() = probe_saved;
    if (kink_margin(spec, ws) > 1e-3) break;
  }
  cl = CheckLoss::make(net, batch, rng);

  Vector saved = net.running_stats();
  auto outs = net.forward(x, &ws, train);
  net.running_stats() = saved;
  std::vector<Matrix> head_grads;
  cl.eval(net, outs, &head_grads);
  Vector pg = Vector::Zero(net.n_params());
  Matrix xg = net.backward(ws, head_grads, pg);

  const double h = 1e-5;
  for (int i = 0; i < net.n_params(); ++i) {
    const double keep = net.params()[i];
    net.params()[i] = keep + h;
    const double up = loss_at(net, x, train, cl);
    net.params()[i] = keep - h;
    const double dn = loss_at(net, x, train, cl);
    net.params()[i] = keep;
    const double fd = (up - dn) / (2.0 * h);
    CAPTURE(i);
    CHECK(rel_err(pg[i], fd) < 1e-4);
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const double fd = (loss_at(net, xp, train, cl) - loss_at(net, xm, train, cl)) /
                      (2.0 * h);
    CAPTURE(i);
    CHECK(rel_err(xg.data()[i], fd) < 1e-4);
  }
}

}  // namespace

TEST_CASE("gradients match finite differences for relu + batch norm, train mode") {
  MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_layers = 2;
  spec.hidden_width = 8;
  spec.activation = Activation::Relu;
  spec.norm = Norm::BatchNorm;
  spec.heads = {{HeadKind::Softmax, 4}, {HeadKind::ScalarTanh, 1}};
  check_gradients(spec, true, 11);
}

TEST_CASE("gradients match finite differences for relu + batch norm, eval mode") {
  MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_layers = 2;
  spec.hidden_width = 8;
  spec.activation = Activation::Relu;
  spec.norm = Norm::BatchNorm;
  spec.heads = {{HeadKind::Softmax, 4}, {HeadKind::ScalarTanh, 1}};
  check_gradients(spec, false, 12);
}

TEST_CASE("gradients match finite differences for leaky relu + layer norm") {
  MlpSpec spec;
  spec.input_dim = 2;
  spec.hidden_layers = 3;
  spec.hidden_width = 8;
  spec.activation = Activation::LeakyRelu;
  spec.norm = Norm::LayerNorm;
  spec.heads = {{HeadKind::ProbabilitySimplex, 3}};
  check_gradients(spec, true, 13);
}

TEST_CASE("gradients match finite differences for tanh without norm") {
  MlpSpec spec;
  spec.input_dim = 2;
  spec.hidden_layers = 2;
  spec.hidden_width = 8;
  spec.activation = Activation::Tanh;
  spec.norm = Norm::None;
  spec.heads = {{HeadKind::ScalarTanh, 1}};
  check_gradients(spec, true, 14);
}

TEST_CASE("gradients match finite differences for identity + vector tanh head") {
  MlpSpec spec;
  spec.input_dim = 4;
  spec.hidden_layers = 1;
  spec.hidden_width = 6;
  spec.activation = Activation::Identity;
  spec.norm = Norm::None;
  spec.heads = {{HeadKind::VectorTanh, 3}};
  check_gradients(spec, true, 15);
}

TEST_CASE("simplex heads stay valid for inputs up to magnitude 1e3") {
  MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_layers = 2;
  spec.hidden_width = 16;
  spec.activation = Activation::LeakyRelu;
  spec.norm = Norm::LayerNorm;
  spec.heads = {{HeadKind::ProbabilitySimplex, 5}, {HeadKind::Softmax, 3}};
  Mlp net(spec, 21);
  Rng rng(22);
  Matrix x(64, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x.data()[i] = 2e3 * rng.next_double() - 1e3;
  auto outs = net.forward(x);
  for (const auto& out : outs) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        CHECK(std::isfinite(out(i, j)));
        CHECK(out(i, j) >= 0.0);
        s += out(i, j);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("checkpoint round trip reproduces eval outputs bit for bit") {
  MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_layers = 2;
  spec.hidden_width = 8;
  spec.activation = Activation::Relu;
  spec.norm = Norm::BatchNorm;
  spec.heads = {{HeadKind::Softmax, 4}, {HeadKind::ScalarTanh, 1}};
  Mlp net(spec, 31);

  // give the running stats a non-trivial history first
  Rng rng(32);
  for (int it = 0; it < 5; ++it) {
    Matrix x(6, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      x.data()[i] = 3.0 * rng.next_double();
    net.forward(x, nullptr, true);
  }

  const std::string path = "roundtrip_net.bin";
  net.save(path);
  Mlp back = Mlp::load(path);
  std::remove(path.c_str());

  REQUIRE(back.n_params() == net.n_params());
  CHECK(std::memcmp(back.params().data(), net.params().data(),
                    sizeof(double) * net.params().size()) == 0);
  CHECK(std::memcmp(back.running_stats().data(), net.running_stats().data(),
                    sizeof(double) * net.running_stats().size()) == 0);

  Matrix x(4, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x.data()[i] = 2.0 * rng.next_double() - 1.0;
  auto a = net.forward(x);
  auto b = back.forward(x);
  REQUIRE(a.size() == b.size());
  for (std::size_t h = 0; h < a.size(); ++h)
    CHECK(std::memcmp(a[h].data(), b[h].data(), sizeof(double) * a[h].size()) == 0);
}

TEST_CASE("running statistics converge to the batch statistics") {
  MlpSpec spec;
  spec.input_dim = 2;
  spec.hidden_layers = 1;
  spec.hidden_width = 4;
  spec.activation = Activation::Identity;
  spec.norm = Norm::BatchNorm;
  spec.heads = {{HeadKind::VectorTanh, 4}};
  Mlp net(spec, 41);
  Rng rng(42);
  Matrix x(16, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x.data()[i] = 2.0 * rng.next_double() - 1.0;

  Matrix train_out;
  for (int it = 0; it < 300; ++it) train_out = net.forward(x, nullptr, true)[0];
  Matrix eval_out = net.forward(x, nullptr, false)[0];
  CHECK((train_out - eval_out).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("forward_one matches the batched eval path") {
  MlpSpec spec;
  spec.input_dim = 3;
  spec.hidden_layers = 2;
  spec.hidden_width = 8;
  spec.activation = Activation::Relu;
  spec.norm = Norm::BatchNorm;
  spec.heads = {{HeadKind::Softmax, 4}, {HeadKind::ScalarTanh, 1}};
  Mlp net(spec, 51);
  Vector x(3);
  x << 0.3, -1.2, 0.7;
  auto single = net.forward_one(x);
  auto batched = net.forward(x.transpose());
  REQUIRE(single.size() == 2);
  for (std::size_t h = 0; h < single.size(); ++h)
    for (Eigen::Index j = 0; j < single[h].size(); ++j)
      CHECK(single[h][j] == batched[h](0, j));
}

TEST_CASE("adam drives a quadratic to its minimum") {
  Vector p = Vector::Constant(6, 4.0);
  Vector c(6);
  c << 1, -2, 0.5, 3, -0.25, 2;
  AdamState adam(0.05);
  for (int it = 0; it < 800; ++it) {
    Vector g = 2.0 * (p - c);
    adam.step(p, g);
  }
  CHECK((p - c).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("a small net fits a smooth curve") {
  MlpSpec spec;
  spec.input_dim = 1;
  spec.hidden_layers = 2;
  spec.hidden_width = 16;
  spec.activation = Activation::Tanh;
  spec.norm = Norm::None;
  spec.heads = {{HeadKind::ScalarTanh, 1}};
  Mlp net(spec, 61);

  const int n = 32;
  Matrix x(n, 1), y(n, 1);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = -1.0 + 2.0 * i / (n - 1);
    y(i, 0) = 0.7 * std::sin(2.5 * x(i, 0));
  }

  AdamState adam(1e-2);
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 400; ++it) {
    Mlp::Workspace ws;
    auto outs = net.forward(x, &ws, true);
    Matrix d;
    const double loss = value_mse_loss(outs[0], y, n, d);
    if (it == 0) first = loss;
    last = loss;
    Vector g = Vector::Zero(net.n_params());
    net.backward(ws, {d}, g);
    adam.step(net.params(), g);
  }
  CHECK(last < first / 20.0);
  CHECK(last < 1e-3);
}

TEST_CASE("loss helpers match hand-computed values") {
  Matrix v(1, 1), z(1, 1), d;
  v << 0.5;
  z << 0.2;
  CHECK(value_mse_loss(v, z, 1.0, d) == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(d(0, 0) == doctest::Approx(0.6).epsilon(1e-12));

  Matrix p(1, 2), t(1, 2);
  p << 0.25, 0.75;
  t << 1.0, 0.0;
  CHECK(cross_entropy_loss(p, t, 1.0, d) ==
        doctest::Approx(1.3862943611198906).epsilon(1e-12));
  CHECK(d(0, 0) == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK(d(0, 1) == 0.0);

  Matrix q(1, 2), u(1, 2);
  q << 0.5, 0.5;
  u << 0.25, 0.75;
  CHECK(kl_divergence_loss(q, u, 1.0, d) ==
        doctest::Approx(0.13081203594113694).epsilon(1e-9));
}

TEST_CASE("shape and mode errors are rejected") {
  MlpSpec spec;
  spec.input_dim = 2;
  spec.hidden_layers = 1;
  spec.hidden_width = 4;
  spec.norm = Norm::BatchNorm;
  spec.heads = {{HeadKind::ScalarTanh, 1}};
  Mlp net(spec, 71);

  Matrix wrong(3, 5);
  CHECK_THROWS_AS(net.forward(wrong), std::invalid_argument);
  Matrix single = Matrix::Zero(1, 2);
  CHECK_THROWS_AS(net.forward(single, nullptr, true), std::invalid_argument);

  Mlp::Workspace ws;
  Matrix ok = Matrix::Zero(4, 2);
  net.forward(ok, &ws, true);
  Vector g = Vector::Zero(net.n_params());
  CHECK_THROWS_AS(net.backward(ws, {}, g), std::invalid_argument);

  MlpSpec bad = spec;
  bad.heads.clear();
  CHECK_THROWS_AS(Mlp(bad, 1), std::invalid_argument);
}
