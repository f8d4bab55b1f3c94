#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "vertfl/rng.hpp"

namespace vertfl {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);

// Cosine similarity in [-1, 1]. Throws std::domain_error on a zero-norm
// input; callers that need a sentinel (e.g. scoring) catch or pre-check.
double cosine(const Vec& a, const Vec& b);

// Euclidean distance ||a - b||_2.
double l2_dist(const Vec& a, const Vec& b);

bool all_finite(const Vec& a);

// Throws std::invalid_argument naming `what` if a contains NaN/Inf.
void require_finite(const Vec& a, const char* what);

// ---------------------------------------------------------------------------
// Dense layers and MLPs
// ---------------------------------------------------------------------------

enum class Activation { None, Relu, Softmax };

const char* to_string(Activation a);

struct DenseLayer {
  int in = 0;
  int out = 0;
  Vec weights;  // out x in, row-major
  Vec bias;     // out
  Activation activation = Activation::None;

  static DenseLayer zeros(int in, int out, Activation act);
  // Uniform init in [-sqrt(1/fan_in), +sqrt(1/fan_in)], bias zero.
  static DenseLayer random(int in, int out, Activation act, RngStream& rng);
  static DenseLayer identity(int n, Activation act);
};

struct Mlp {
  std::vector<DenseLayer> layers;

  int input_dim() const;
  int output_dim() const;
  std::size_t param_count() const;

  // Chained-dimension constructor: dims = {in, h1, ..., out}.
  static Mlp random(const std::vector<int>& dims,
                    const std::vector<Activation>& acts, RngStream& rng);

  Vec params_flat() const;
  void set_params_flat(const Vec& flat);
};

// Forward pass; validates dimensions and output finiteness.
Vec forward(const Mlp& model, const Vec& input);

// Numerically stable softmax (max subtraction).
Vec softmax(const Vec& z);

struct LayerGrads {
  Vec weights;
  Vec bias;
};

struct MlpGrads {
  std::vector<LayerGrads> layers;
  Vec input;  // dL/dinput, for chaining into upstream parameters

  Vec flat() const;  // layer order matching Mlp::params_flat
  void add_scaled(const MlpGrads& other, double scale);
  static MlpGrads zeros_like(const Mlp& model);
};

// Reverse pass of `model` at `input` given dL/doutput. Does not mutate the
// model; activations are recomputed internally.
MlpGrads backward(const Mlp& model, const Vec& input, const Vec& loss_grad);

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

enum class OptimizerKind { Sgd, Adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Sgd;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  Vec m;  // first moments (Adam), sized on first use
  Vec v;  // second moments

  static OptimizerState sgd(double lr);
  static OptimizerState adam(double lr, double beta1 = 0.9,
                             double beta2 = 0.999, double eps = 1e-8);
};

// In-place update of params. SGD: p -= lr*g. Adam: bias-corrected update.
// Throws on non-finite gradient entries.
void optimizer_step(OptimizerState& state, Vec& params, const Vec& grads);

// ---------------------------------------------------------------------------
// Classification loss
// ---------------------------------------------------------------------------

// Softmax cross-entropy on raw logits. Returns loss; fills dlogits.
double cross_entropy_loss(const Vec& logits, int label, Vec* dlogits);

}  // namespace vertfl
