#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "hedgebench/rng.hpp"

namespace hedgebench {

using Matrix = Eigen::MatrixXd;  // batch rows x feature columns
using Vector = Eigen::VectorXd;

enum class Activation { Relu, LeakyRelu, Tanh, Identity };
enum class Norm { None, BatchNorm, LayerNorm };
enum class HeadKind { ScalarTanh, Softmax, VectorTanh, ProbabilitySimplex };

struct HeadSpec {
  HeadKind kind;
  int dim;  // forced to 1 for ScalarTanh
};

struct MlpSpec {
  int input_dim = 1;
  int hidden_layers = 1;
  int hidden_width = 16;
  Activation activation = Activation::Relu;
  Norm norm = Norm::None;
  std::vector<HeadSpec> heads;
  double leaky_slope = 0.01;
  double norm_eps = 1e-5;
  double bn_momentum = 0.9;  // EMA keep rate for running stats
};

// Dense multilayer perceptron with hand-written forward/backward. All
// parameters live in one flat vector (little-endian float64 on disk), layers
// view into it, so the optimizer and checkpoints stay trivial.
class Mlp {
 public:
  // Kaiming-style uniform fan-in init, seeded; biases start at zero
  Mlp(MlpSpec spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  int n_params() const { return static_cast<int>(params_.size()); }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  Vector& running_stats() { return running_; }
  const Vector& running_stats() const { return running_; }

  // per-forward caches needed by backward
  struct Workspace {
    bool train_mode = false;
    Matrix input;
    std::vector<Matrix> pre_norm;    // per layer, before norm
    std::vector<Matrix> normalized;  // per layer, after norm before activation
    std::vector<Matrix> activated;   // per layer output
    std::vector<Vector> mu, var;     // batch-norm batch stats
    std::vector<Matrix> ln_mu, ln_var;  // layer-norm per-row stats
    std::vector<Matrix> head_pre;    // per head, pre-nonlinearity
    std::vector<Matrix> head_out;
  };

  // One output matrix per head (batch x head dim). train_mode picks batch
  // statistics for batch norm and refreshes the running averages; eval mode
  // uses the stored running stats and leaves them untouched.
  std::vector<Matrix> forward(const Matrix& x, Workspace* ws = nullptr,
                              bool train_mode = false);

  // convenience single-sample eval
  std::vector<Vector> forward_one(const Vector& x) const;

  // head_grads: dL/d(head output), one per head (zero-size matrices are
  // treated as all-zero). Accumulates into param_grad (sized n_params) and
  // returns dL/dinput.
  Matrix backward(const Workspace& ws, const std::vector<Matrix>& head_grads,
                  Vector& param_grad) const;

  void save(const std::string& filename) const;
  static Mlp load(const std::string& filename);

 private:
  friend struct MlpLayout;
  MlpSpec spec_;
  Vector params_;
  Vector running_;  // batch norm running mean/var per layer, empty otherwise
};

// Adam with bias correction; state sized lazily on first step.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  Vector m, v;

  explicit AdamState(double lr_ = 1e-3) : lr(lr_) {}
  void step(Vector& params, const Vector& grad);
};

// loss helpers shared by the trainers; each returns the loss and writes
// dL/d(output) for the backward pass

// squared error (z - v)^2 summed over the batch, averaged by `denom`
double value_mse_loss(const Matrix& v, const Matrix& z, double denom, Matrix& dv);

// cross entropy -sum target * log(p), averaged by denom; dp is dL/dp
double cross_entropy_loss(const Matrix& p, const Matrix& target, double denom, Matrix& dp);

// KL(target || p) summed over rows, averaged by denom (0 log 0 = 0)
double kl_divergence_loss(const Matrix& p, const Matrix& target, double denom, Matrix& dp);

}  // namespace hedgebench
