#include "vertfl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vertfl {

Mlp ModelState::to_mlp() const {
  Mlp m;
  for (const auto& spec : shapes)
    m.layers.push_back(DenseLayer::zeros(spec.in, spec.out, spec.activation));
  m.set_params_flat(params);
  return m;
}

ModelState ModelState::from_mlp(const Mlp& m) {
  ModelState s;
  for (const auto& l : m.layers)
    s.shapes.push_back(LayerSpec{l.in, l.out, l.activation});
  s.params = m.params_flat();
  return s;
}

Mlp make_task_model(int dims, int hidden, int classes, RngStream& rng) {
  if (hidden > 0)
    return Mlp::random({dims, hidden, classes},
                       {Activation::Relu, Activation::None}, rng);
  return Mlp::random({dims, classes}, {Activation::None}, rng);
}

std::vector<double> sgd_train(Mlp& model, const Dataset& data,
                              const std::vector<int>& indices,
                              const TrainOptions& opt, RngStream& rng) {
  if (indices.empty())
    throw std::invalid_argument("sgd_train: empty shard");
  std::vector<double> epoch_losses;
  epoch_losses.reserve(opt.epochs);
  std::vector<int> order = indices;
  Vec flat = model.params_flat();
  OptimizerState sgd = OptimizerState::sgd(opt.lr);

  // Batch gradients are normalized by the nominal batch size (clamped to the
  // shard size) so a small remainder batch moves the model proportionally
  // rather than taking a full-strength step on a few samples.
  const double denom = static_cast<double>(
      std::min<std::size_t>(static_cast<std::size_t>(opt.batch), order.size()));
  for (int e = 0; e < opt.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opt.batch)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(opt.batch));
      MlpGrads acc = MlpGrads::zeros_like(model);
      for (std::size_t i = start; i < end; ++i) {
        const int idx = order[i];
        const Vec x = data.sample(idx);
        const Vec logits = forward(model, x);
        Vec dlogits;
        loss_sum += cross_entropy_loss(logits, data.labels[idx], &dlogits);
        acc.add_scaled(backward(model, x, dlogits), 1.0);
      }
      Vec grad_flat = acc.flat();
      for (auto& g : grad_flat) g /= denom;
      optimizer_step(sgd, flat, grad_flat);
      model.set_params_flat(flat);
    }
    const double mean_loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(mean_loss))
      throw std::runtime_error("sgd_train: non-finite training loss");
    epoch_losses.push_back(mean_loss);
  }
  return epoch_losses;
}

GradientVector local_train(const Dataset& data, const std::vector<int>& shard,
                           const ModelState& global, const TrainOptions& opt,
                           RngStream& rng, int owner, int round) {
  GradientVector g;
  g.owner = owner;
  g.round = round;
  if (opt.epochs == 0) {
    g.values.assign(global.dim(), 0.0);
    return g;
  }
  Mlp local = global.to_mlp();
  sgd_train(local, data, shard, opt, rng);
  const Vec trained = local.params_flat();
  g.values.resize(global.dim());
  for (std::size_t i = 0; i < trained.size(); ++i)
    g.values[i] = trained[i] - global.params[i];
  return g;
}

double evaluate_accuracy(const ModelState& model, const Dataset& data) {
  const Mlp m = model.to_mlp();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vec logits = forward(m, data.sample(i));
    int best = 0;
    for (int c = 1; c < static_cast<int>(logits.size()); ++c)
      if (logits[c] > logits[best]) best = c;
    if (best == data.labels[i]) ++hits;
  }
  return data.size() == 0 ? 0.0
                          : static_cast<double>(hits) /
                                static_cast<double>(data.size());
}

ModelState apply_global(const ModelState& w, const GradientVector& g,
                        double eta) {
  if (g.values.size() != w.dim())
    throw std::invalid_argument("apply_global: dimension mismatch");
  ModelState out = w;
  for (std::size_t i = 0; i < out.params.size(); ++i)
    out.params[i] += eta * g.values[i];
  return out;
}

}  // namespace vertfl
