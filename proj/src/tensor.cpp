#include "vertfl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace vertfl {

namespace {

[[noreturn]] void dim_error(const char* what, std::size_t expected,
                            std::size_t actual) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s: expected dimension %zu, got %zu", what,
                expected, actual);
  throw std::invalid_argument(buf);
}

void require_same_length(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) dim_error(what, a.size(), b.size());
}

}  // namespace

double dot(const Vec& a, const Vec& b) {
  require_same_length(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

double cosine(const Vec& a, const Vec& b) {
  require_same_length(a, b, "cosine");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0)
    throw std::domain_error("cosine: zero-norm input");
  double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

double l2_dist(const Vec& a, const Vec& b) {
  require_same_length(a, b, "l2_dist");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

bool all_finite(const Vec& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

void require_finite(const Vec& a, const char* what) {
  if (!all_finite(a)) {
    std::string msg(what);
    msg += ": non-finite entry";
    throw std::invalid_argument(msg);
  }
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::Relu: return "relu";
    case Activation::Softmax: return "softmax";
  }
  return "?";
}

DenseLayer DenseLayer::zeros(int in, int out, Activation act) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.weights.assign(static_cast<std::size_t>(in) * out, 0.0);
  l.bias.assign(out, 0.0);
  l.activation = act;
  return l;
}

DenseLayer DenseLayer::random(int in, int out, Activation act,
                              RngStream& rng) {
  DenseLayer l = zeros(in, out, act);
  const double bound = std::sqrt(1.0 / in);
  for (auto& w : l.weights) w = rng.uniform(-bound, bound);
  return l;
}

DenseLayer DenseLayer::identity(int n, Activation act) {
  DenseLayer l = zeros(n, n, act);
  for (int i = 0; i < n; ++i) l.weights[static_cast<std::size_t>(i) * n + i] = 1.0;
  return l;
}

int Mlp::input_dim() const {
  return layers.empty() ? 0 : layers.front().in;
}

int Mlp::output_dim() const {
  return layers.empty() ? 0 : layers.back().out;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    n += l.weights.size() + l.bias.size();
  return n;
}

Mlp Mlp::random(const std::vector<int>& dims,
                const std::vector<Activation>& acts, RngStream& rng) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1)
    throw std::invalid_argument("Mlp::random: dims/activations mismatch");
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    m.layers.push_back(DenseLayer::random(dims[i], dims[i + 1], acts[i], rng));
  return m;
}

Vec Mlp::params_flat() const {
  Vec flat;
  flat.reserve(param_count());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weights.begin(), l.weights.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void Mlp::set_params_flat(const Vec& flat) {
  if (flat.size() != param_count())
    dim_error("set_params_flat", param_count(), flat.size());
  std::size_t pos = 0;
  for (auto& l : layers) {
    std::copy(flat.begin() + pos, flat.begin() + pos + l.weights.size(),
              l.weights.begin());
    pos += l.weights.size();
    std::copy(flat.begin() + pos, flat.begin() + pos + l.bias.size(),
              l.bias.begin());
    pos += l.bias.size();
  }
}

Vec softmax(const Vec& z) {
  Vec y(z.size());
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    y[i] = std::exp(z[i] - zmax);
    sum += y[i];
  }
  for (auto& v : y) v /= sum;
  return y;
}

namespace {

Vec apply_layer(const DenseLayer& l, const Vec& x, Vec* pre_out) {
  if (static_cast<int>(x.size()) != l.in)
    dim_error("layer input", static_cast<std::size_t>(l.in), x.size());
  Vec z(l.out);
  for (int i = 0; i < l.out; ++i) {
    const double* row = l.weights.data() + static_cast<std::size_t>(i) * l.in;
    double s = l.bias[i];
    for (int j = 0; j < l.in; ++j) s += row[j] * x[j];
    z[i] = s;
  }
  if (pre_out) *pre_out = z;
  switch (l.activation) {
    case Activation::None:
      return z;
    case Activation::Relu:
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
      return z;
    case Activation::Softmax:
      return softmax(z);
  }
  return z;
}

}  // namespace

Vec forward(const Mlp& model, const Vec& input) {
  if (model.layers.empty())
    throw std::invalid_argument("forward: empty model");
  if (static_cast<int>(input.size()) != model.input_dim())
    dim_error("forward input", static_cast<std::size_t>(model.input_dim()),
              input.size());
  Vec x = input;
  for (const auto& l : model.layers) x = apply_layer(l, x, nullptr);
  require_finite(x, "forward output");
  return x;
}

Vec MlpGrads::flat() const {
  Vec out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void MlpGrads::add_scaled(const MlpGrads& other, double scale) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::size_t j = 0; j < layers[i].weights.size(); ++j)
      layers[i].weights[j] += scale * other.layers[i].weights[j];
    for (std::size_t j = 0; j < layers[i].bias.size(); ++j)
      layers[i].bias[j] += scale * other.layers[i].bias[j];
  }
}

MlpGrads MlpGrads::zeros_like(const Mlp& model) {
  MlpGrads g;
  g.layers.resize(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    g.layers[i].weights.assign(model.layers[i].weights.size(), 0.0);
    g.layers[i].bias.assign(model.layers[i].bias.size(), 0.0);
  }
  g.input.assign(model.input_dim(), 0.0);
  return g;
}

MlpGrads backward(const Mlp& model, const Vec& input, const Vec& loss_grad) {
  if (model.layers.empty())
    throw std::invalid_argument("backward: empty model");
  if (static_cast<int>(loss_grad.size()) != model.output_dim())
    dim_error("backward loss_grad",
              static_cast<std::size_t>(model.output_dim()), loss_grad.size());

  const std::size_t n = model.layers.size();
  std::vector<Vec> inputs(n);   // input to each layer
  std::vector<Vec> pre(n);      // pre-activation z of each layer
  std::vector<Vec> post(n);     // post-activation output
  Vec x = input;
  for (std::size_t i = 0; i < n; ++i) {
    inputs[i] = x;
    x = apply_layer(model.layers[i], x, &pre[i]);
    post[i] = x;
  }

  MlpGrads grads = MlpGrads::zeros_like(model);
  Vec delta = loss_grad;  // dL/d(layer output)
  for (std::size_t ii = n; ii-- > 0;) {
    const DenseLayer& l = model.layers[ii];
    // through the activation: dL/dz
    Vec dz(l.out);
    switch (l.activation) {
      case Activation::None:
        dz = delta;
        break;
      case Activation::Relu:
        for (int i = 0; i < l.out; ++i)
          dz[i] = pre[ii][i] > 0.0 ? delta[i] : 0.0;
        break;
      case Activation::Softmax: {
        const Vec& y = post[ii];
        double inner = 0.0;
        for (int i = 0; i < l.out; ++i) inner += delta[i] * y[i];
        for (int i = 0; i < l.out; ++i) dz[i] = y[i] * (delta[i] - inner);
        break;
      }
    }
    const Vec& xin = inputs[ii];
    LayerGrads& lg = grads.layers[ii];
    for (int i = 0; i < l.out; ++i) {
      double* wrow = lg.weights.data() + static_cast<std::size_t>(i) * l.in;
      const double di = dz[i];
      for (int j = 0; j < l.in; ++j) wrow[j] += di * xin[j];
      lg.bias[i] += di;
    }
    // dL/dx = W^T dz
    Vec dx(l.in, 0.0);
    for (int i = 0; i < l.out; ++i) {
      const double* row = l.weights.data() + static_cast<std::size_t>(i) * l.in;
      const double di = dz[i];
      for (int j = 0; j < l.in; ++j) dx[j] += row[j] * di;
    }
    delta = std::move(dx);
  }
  grads.input = std::move(delta);
  return grads;
}

OptimizerState OptimizerState::sgd(double lr) {
  OptimizerState s;
  s.kind = OptimizerKind::Sgd;
  s.lr = lr;
  return s;
}

OptimizerState OptimizerState::adam(double lr, double beta1, double beta2,
                                    double eps) {
  OptimizerState s;
  s.kind = OptimizerKind::Adam;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void optimizer_step(OptimizerState& state, Vec& params, const Vec& grads) {
  if (params.size() != grads.size())
    dim_error("optimizer_step", params.size(), grads.size());
  require_finite(grads, "optimizer_step gradient");
  switch (state.kind) {
    case OptimizerKind::Sgd:
      ++state.step;
      for (std::size_t i = 0; i < params.size(); ++i)
        params[i] -= state.lr * grads[i];
      break;
    case OptimizerKind::Adam: {
      if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
      }
      ++state.step;
      const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
      const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
      for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / b1t;
        const double vhat = state.v[i] / b2t;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
      }
      break;
    }
  }
  require_finite(params, "optimizer_step params");
}

double cross_entropy_loss(const Vec& logits, int label, Vec* dlogits) {
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw std::invalid_argument("cross_entropy_loss: label out of range");
  Vec p = softmax(logits);
  const double loss = -std::log(std::max(p[label], 1e-300));
  if (dlogits) {
    *dlogits = p;
    (*dlogits)[label] -= 1.0;
  }
  return loss;
}

}  // namespace vertfl
