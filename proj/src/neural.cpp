#include "hedgebench/neural.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace hedgebench {

namespace {

constexpr std::uint32_t kMagic = 0x48424D4C;  // "HBML"
constexpr std::uint32_t kVersion = 1;

int head_dim(const HeadSpec& h) {
  return h.kind == HeadKind::ScalarTanh ? 1 : h.dim;
}

bool head_is_simplex(HeadKind k) {
  return k == HeadKind::Softmax || k == HeadKind::ProbabilitySimplex;
}

Matrix row_softmax(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    Eigen::ArrayXd e = (z.row(i).array() - mx).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

}  // namespace

// offsets of every weight block inside the flat parameter vector
struct MlpLayout {
  struct Seg {
    int w_off, w_rows, w_cols, b_off;
    int g_off = -1, be_off = -1;  // norm scale/shift, -1 when absent
  };
  std::vector<Seg> layers;
  std::vector<Seg> heads;
  int total = 0;
  int running_total = 0;

  explicit MlpLayout(const MlpSpec& s) {
    const int w = s.hidden_width;
    int off = 0;
    for (int l = 0; l < s.hidden_layers; ++l) {
      const int in = l == 0 ? s.input_dim : w;
      Seg seg{off, in, w, off + in * w};
      off += in * w + w;
      if (s.norm != Norm::None) {
        seg.g_off = off;
        seg.be_off = off + w;
        off += 2 * w;
      }
      layers.push_back(seg);
    }
    for (const auto& h : s.heads) {
      const int d = head_dim(h);
      heads.push_back(Seg{off, w, d, off + w * d});
      off += w * d + d;
    }
    total = off;
    running_total = s.norm == Norm::BatchNorm ? 2 * w * s.hidden_layers : 0;
  }
};

namespace {

using CMap = Eigen::Map<const Matrix>;
using MMap = Eigen::Map<Matrix>;
using CVMap = Eigen::Map<const Vector>;
using MVMap = Eigen::Map<Vector>;

Matrix apply_activation(const MlpSpec& s, const Matrix& n) {
  switch (s.activation) {
    case Activation::Relu:
      return n.cwiseMax(0.0);
    case Activation::LeakyRelu:
      return (n.array() > 0).select(n, s.leaky_slope * n);
    case Activation::Tanh:
      return n.array().tanh().matrix();
    case Activation::Identity:
      return n;
  }
  throw std::logic_error("unknown activation");
}

// dL/d(pre-activation) from dL/d(activation output)
Matrix activation_backward(const MlpSpec& s, const Matrix& n, const Matrix& a,
                           const Matrix& da) {
  switch (s.activation) {
    case Activation::Relu:
      return (n.array() > 0).select(da, Matrix::Zero(da.rows(), da.cols()));
    case Activation::LeakyRelu:
      return (n.array() > 0).select(da, s.leaky_slope * da);
    case Activation::Tanh:
      return (da.array() * (1.0 - a.array().square())).matrix();
    case Activation::Identity:
      return da;
  }
  throw std::logic_error("unknown activation");
}

}  // namespace

Mlp::Mlp(MlpSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  if (spec_.input_dim < 1 || spec_.hidden_layers < 1 || spec_.hidden_width < 1)
    throw std::invalid_argument("mlp needs positive input dim, layers, width");
  if (spec_.heads.empty()) throw std::invalid_argument("mlp needs at least one head");
  for (auto& h : spec_.heads) {
    if (h.kind == HeadKind::ScalarTanh) h.dim = 1;
    if (h.dim < 1) throw std::invalid_argument("head dim must be positive");
  }

  MlpLayout layout(spec_);
  params_ = Vector::Zero(layout.total);
  running_ = Vector::Zero(layout.running_total);

  Rng rng(seed);
  auto fill_kaiming = [&](const MlpLayout::Seg& seg) {
    const double bound = std::sqrt(6.0 / seg.w_rows);
    MVMap w(params_.data() + seg.w_off, seg.w_rows * seg.w_cols);
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w[i] = bound * (2.0 * rng.next_double() - 1.0);
  };
  for (const auto& seg : layout.layers) {
    fill_kaiming(seg);
    if (seg.g_off >= 0)
      MVMap(params_.data() + seg.g_off, spec_.hidden_width).setOnes();
  }
  for (const auto& seg : layout.heads) fill_kaiming(seg);

  // batch-norm running variance starts at one
  if (spec_.norm == Norm::BatchNorm)
    for (int l = 0; l < spec_.hidden_layers; ++l)
      MVMap(running_.data() + 2 * spec_.hidden_width * l + spec_.hidden_width,
            spec_.hidden_width)
          .setOnes();
}

std::vector<Matrix> Mlp::forward(const Matrix& x, Workspace* ws, bool train_mode) {
  if (x.cols() != spec_.input_dim)
    throw std::invalid_argument("input width does not match the network");
  if (train_mode && spec_.norm == Norm::BatchNorm && x.rows() < 2)
    throw std::invalid_argument("batch norm in train mode needs a batch of >= 2");

  MlpLayout layout(spec_);
  const int nl = spec_.hidden_layers;
  const int w = spec_.hidden_width;
  const double eps = spec_.norm_eps;

  if (ws) {
    *ws = Workspace{};
    ws->train_mode = train_mode;
    ws->input = x;
    ws->pre_norm.resize(nl);
    ws->normalized.resize(nl);
    ws->activated.resize(nl);
    ws->mu.resize(nl);
    ws->var.resize(nl);
    ws->ln_mu.resize(nl);
    ws->ln_var.resize(nl);
  }

  Matrix a = x;
  for (int l = 0; l < nl; ++l) {
    const auto& seg = layout.layers[l];
    CMap W(params_.data() + seg.w_off, seg.w_rows, seg.w_cols);
    CVMap b(params_.data() + seg.b_off, seg.w_cols);
    Matrix z = a * W;
    z.rowwise() += b.transpose();

    Matrix n;
    if (spec_.norm == Norm::None) {
      n = z;
    } else if (spec_.norm == Norm::BatchNorm) {
      const int roff = 2 * w * l;
      Eigen::RowVectorXd mu, var;
      if (train_mode) {
        mu = z.colwise().mean();
        Matrix cz = z.rowwise() - mu;
        var = cz.array().square().colwise().mean().matrix();
        MVMap rmu(running_.data() + roff, w);
        MVMap rvar(running_.data() + roff + w, w);
        const double mom = spec_.bn_momentum;
        rmu = mom * rmu + (1.0 - mom) * mu.transpose();
        rvar = mom * rvar + (1.0 - mom) * var.transpose();
      } else {
        mu = CVMap(running_.data() + roff, w).transpose();
        var = CVMap(running_.data() + roff + w, w).transpose();
      }
      Eigen::RowVectorXd inv_s = (var.array() + eps).sqrt().inverse().matrix();
      CVMap gamma(params_.data() + seg.g_off, w);
      CVMap beta(params_.data() + seg.be_off, w);
      n = ((z.rowwise() - mu).array().rowwise() *
           (inv_s.array() * gamma.transpose().array()))
              .matrix();
      n.rowwise() += beta.transpose();
      if (ws) {
        ws->mu[l] = mu.transpose();
        ws->var[l] = var.transpose();
      }
    } else {  // layer norm, stats per sample
      Vector mu = z.rowwise().mean();
      Matrix cz = z.colwise() - mu;
      Vector var = cz.array().square().rowwise().mean().matrix();
      Vector inv_s = (var.array() + eps).sqrt().inverse().matrix();
      CVMap gamma(params_.data() + seg.g_off, w);
      CVMap beta(params_.data() + seg.be_off, w);
      Matrix xh = (cz.array().colwise() * inv_s.array()).matrix();
      n = (xh.array().rowwise() * gamma.transpose().array()).matrix();
      n.rowwise() += beta.transpose();
      if (ws) {
        ws->ln_mu[l] = mu;
        ws->ln_var[l] = var;
      }
    }

    Matrix act = apply_activation(spec_, n);
    if (ws) {
      ws->pre_norm[l] = std::move(z);
      ws->normalized[l] = n;
      ws->activated[l] = act;
    }
    a = std::move(act);
  }

  std::vector<Matrix> outs;
  outs.reserve(spec_.heads.size());
  for (std::size_t h = 0; h < spec_.heads.size(); ++h) {
    const auto& seg = layout.heads[h];
    CMap W(params_.data() + seg.w_off, seg.w_rows, seg.w_cols);
    CVMap b(params_.data() + seg.b_off, seg.w_cols);
    Matrix z = a * W;
    z.rowwise() += b.transpose();
    Matrix out;
    if (head_is_simplex(spec_.heads[h].kind))
      out = row_softmax(z);
    else
      out = z.array().tanh().matrix();
    if (ws) {
      ws->head_pre.push_back(z);
      ws->head_out.push_back(out);
    }
    outs.push_back(std::move(out));
  }
  return outs;
}

std::vector<Vector> Mlp::forward_one(const Vector& x) const {
  // eval mode never touches running stats, so the cast is safe
  Matrix m = x.transpose();
  auto outs = const_cast<Mlp*>(this)->forward(m, nullptr, false);
  std::vector<Vector> res;
  res.reserve(outs.size());
  for (auto& o : outs) res.push_back(o.row(0).transpose());
  return res;
}

Matrix Mlp::backward(const Workspace& ws, const std::vector<Matrix>& head_grads,
                     Vector& param_grad) const {
  if (head_grads.size() != spec_.heads.size())
    throw std::invalid_argument("one gradient matrix per head required");
  if (param_grad.size() != params_.size())
    throw std::invalid_argument("param_grad has the wrong size");

  MlpLayout layout(spec_);
  const int nl = spec_.hidden_layers;
  const int w = spec_.hidden_width;
  const double eps = spec_.norm_eps;
  const Matrix& top = ws.activated[nl - 1];
  const auto B = top.rows();

  Matrix da = Matrix::Zero(B, w);
  for (std::size_t h = 0; h < spec_.heads.size(); ++h) {
    if (head_grads[h].size() == 0) continue;
    const auto& seg = layout.heads[h];
    const Matrix& out = ws.head_out[h];
    const Matrix& dout = head_grads[h];
    Matrix dz;
    if (head_is_simplex(spec_.heads[h].kind)) {
      dz.resize(out.rows(), out.cols());
      for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double dot = dout.row(i).dot(out.row(i));
        dz.row(i) = (out.row(i).array() * (dout.row(i).array() - dot)).matrix();
      }
    } else {
      dz = (dout.array() * (1.0 - out.array().square())).matrix();
    }
    MMap dW(param_grad.data() + seg.w_off, seg.w_rows, seg.w_cols);
    MVMap db(param_grad.data() + seg.b_off, seg.w_cols);
    dW += top.transpose() * dz;
    db += dz.colwise().sum().transpose();
    CMap W(params_.data() + seg.w_off, seg.w_rows, seg.w_cols);
    da += dz * W.transpose();
  }

  for (int l = nl - 1; l >= 0; --l) {
    const auto& seg = layout.layers[l];
    Matrix dn = activation_backward(spec_, ws.normalized[l], ws.activated[l], da);

    Matrix dz;
    if (spec_.norm == Norm::None) {
      dz = std::move(dn);
    } else {
      CVMap gamma(params_.data() + seg.g_off, w);
      MVMap dgamma(param_grad.data() + seg.g_off, w);
      MVMap dbeta(param_grad.data() + seg.be_off, w);
      if (spec_.norm == Norm::BatchNorm) {
        Vector mu, var;
        if (ws.train_mode) {
          mu = ws.mu[l];
          var = ws.var[l];
        } else {
          mu = CVMap(running_.data() + 2 * w * l, w);
          var = CVMap(running_.data() + 2 * w * l + w, w);
        }
        Eigen::RowVectorXd inv_s =
            (var.array() + eps).sqrt().inverse().matrix().transpose();
        Matrix xhat = ((ws.pre_norm[l].rowwise() - mu.transpose()).array().rowwise() *
                       inv_s.array())
                          .matrix();
        dgamma += (dn.array() * xhat.array()).colwise().sum().matrix().transpose();
        dbeta += dn.colwise().sum().transpose();
        Matrix dxhat =
            (dn.array().rowwise() * gamma.transpose().array()).matrix();
        if (ws.train_mode) {
          // batch statistics depend on every sample
          const double Bd = static_cast<double>(B);
          Eigen::RowVectorXd sum_dx = dxhat.colwise().sum();
          Eigen::RowVectorXd sum_dx_xhat =
              (dxhat.array() * xhat.array()).colwise().sum().matrix();
          Matrix tmp = Bd * dxhat;
          tmp.rowwise() -= sum_dx;
          tmp.array() -= xhat.array().rowwise() * sum_dx_xhat.array();
          tmp.array().rowwise() *= inv_s.array();
          dz = tmp / Bd;
        } else {
          dz = (dxhat.array().rowwise() * inv_s.array()).matrix();
        }
      } else {  // layer norm
        Vector mu = ws.ln_mu[l].col(0);
        Vector var = ws.ln_var[l].col(0);
        Vector inv_s = (var.array() + eps).sqrt().inverse().matrix();
        Matrix xhat = ((ws.pre_norm[l].colwise() - mu).array().colwise() *
                       inv_s.array())
                          .matrix();
        dgamma += (dn.array() * xhat.array()).colwise().sum().matrix().transpose();
        dbeta += dn.colwise().sum().transpose();
        Matrix dxhat =
            (dn.array().rowwise() * gamma.transpose().array()).matrix();
        Vector mean_dx = dxhat.rowwise().mean();
        Vector mean_dx_xhat = (dxhat.array() * xhat.array()).rowwise().mean().matrix();
        Matrix tmp = dxhat;
        tmp.colwise() -= mean_dx;
        tmp.array() -= xhat.array().colwise() * mean_dx_xhat.array();
        tmp.array().colwise() *= inv_s.array();
        dz = tmp;
      }
    }

    const Matrix& below = l == 0 ? ws.input : ws.activated[l - 1];
    MMap dW(param_grad.data() + seg.w_off, seg.w_rows, seg.w_cols);
    MVMap db(param_grad.data() + seg.b_off, seg.w_cols);
    dW += below.transpose() * dz;
    db += dz.colwise().sum().transpose();
    CMap W(params_.data() + seg.w_off, seg.w_rows, seg.w_cols);
    da = dz * W.transpose();
  }
  return da;
}

void Mlp::save(const std::string& filename) const {
  std::ofstream f(filename, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + filename + " for writing");
  auto put32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto put64 = [&](std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  auto putd = [&](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  put32(kMagic);
  put32(kVersion);
  put32(static_cast<std::uint32_t>(spec_.input_dim));
  put32(static_cast<std::uint32_t>(spec_.hidden_layers));
  put32(static_cast<std::uint32_t>(spec_.hidden_width));
  put32(static_cast<std::uint32_t>(spec_.activation));
  put32(static_cast<std::uint32_t>(spec_.norm));
  put32(static_cast<std::uint32_t>(spec_.heads.size()));
  for (const auto& h : spec_.heads) {
    put32(static_cast<std::uint32_t>(h.kind));
    put32(static_cast<std::uint32_t>(h.dim));
  }
  putd(spec_.leaky_slope);
  putd(spec_.norm_eps);
  putd(spec_.bn_momentum);
  put64(static_cast<std::uint64_t>(params_.size()));
  f.write(reinterpret_cast<const char*>(params_.data()),
          static_cast<std::streamsize>(params_.size() * sizeof(double)));
  put64(static_cast<std::uint64_t>(running_.size()));
  f.write(reinterpret_cast<const char*>(running_.data()),
          static_cast<std::streamsize>(running_.size() * sizeof(double)));
  if (!f) throw std::runtime_error("failed writing " + filename);
}

Mlp Mlp::load(const std::string& filename) {
  std::ifstream f(filename, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + filename);
  auto get32 = [&]() {
    std::uint32_t v;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get64 = [&]() {
    std::uint64_t v;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto getd = [&]() {
    double v;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  if (get32() != kMagic) throw std::runtime_error(filename + ": not a checkpoint");
  if (get32() != kVersion)
    throw std::runtime_error(filename + ": unsupported checkpoint version");
  MlpSpec spec;
  spec.input_dim = static_cast<int>(get32());
  spec.hidden_layers = static_cast<int>(get32());
  spec.hidden_width = static_cast<int>(get32());
  spec.activation = static_cast<Activation>(get32());
  spec.norm = static_cast<Norm>(get32());
  const auto n_heads = get32();
  for (std::uint32_t i = 0; i < n_heads; ++i) {
    HeadSpec h;
    h.kind = static_cast<HeadKind>(get32());
    h.dim = static_cast<int>(get32());
    spec.heads.push_back(h);
  }
  spec.leaky_slope = getd();
  spec.norm_eps = getd();
  spec.bn_momentum = getd();
  Mlp net(spec, 0);
  const auto np = get64();
  if (np != static_cast<std::uint64_t>(net.params_.size()))
    throw std::runtime_error(filename + ": parameter count mismatch");
  f.read(reinterpret_cast<char*>(net.params_.data()),
         static_cast<std::streamsize>(np * sizeof(double)));
  const auto nr = get64();
  if (nr != static_cast<std::uint64_t>(net.running_.size()))
    throw std::runtime_error(filename + ": running-stat count mismatch");
  f.read(reinterpret_cast<char*>(net.running_.data()),
         static_cast<std::streamsize>(nr * sizeof(double)));
  if (!f) throw std::runtime_error(filename + ": truncated checkpoint");
  return net;
}

void AdamState::step(Vector& params, const Vector& grad) {
  if (m.size() == 0) {
    m = Vector::Zero(params.size());
    v = Vector::Zero(params.size());
  }
  if (grad.size() != params.size() || m.size() != params.size())
    throw std::invalid_argument("adam buffers do not match the parameters");
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.array().square().matrix();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  params.array() -=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

double value_mse_loss(const Matrix& v, const Matrix& z, double denom, Matrix& dv) {
  const double loss = (v - z).array().square().sum() / denom;
  dv = 2.0 * (v - z) / denom;
  return loss;
}

double cross_entropy_loss(const Matrix& p, const Matrix& target, double denom,
                          Matrix& dp) {
  constexpr double floor = 1e-12;
  double loss = 0.0;
  dp = Matrix::Zero(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (target(i, j) > 0.0) {
        const double pij = std::max(p(i, j), floor);
        loss -= target(i, j) * std::log(pij);
        dp(i, j) = -target(i, j) / pij / denom;
      }
  return loss / denom;
}

double kl_divergence_loss(const Matrix& p, const Matrix& target, double denom,
                          Matrix& dp) {
  constexpr double floor = 1e-12;
  double loss = 0.0;
  dp = Matrix::Zero(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (target(i, j) > 0.0) {
        const double pij = std::max(p(i, j), floor);
        loss += target(i, j) * (std::log(target(i, j)) - std::log(pij));
        dp(i, j) = -target(i, j) / pij / denom;
      }
  return loss / denom;
}

}  // namespace hedgebench
