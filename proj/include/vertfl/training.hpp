#pragma once

#include <vector>

#include "vertfl/data.hpp"
#include "vertfl/fl_types.hpp"

namespace vertfl {

struct TrainOptions {
  int epochs = 2;
  int batch = 50;
  double lr = 0.05;
};

// Builds the task model for a dataset: dims -> hidden (relu) -> classes
// logits, or plain logistic when hidden == 0.
Mlp make_task_model(int dims, int hidden, int classes, RngStream& rng);

// Mini-batch SGD with softmax cross-entropy over the given sample indices.
// Returns the mean loss per epoch; throws on non-finite loss.
std::vector<double> sgd_train(Mlp& model, const Dataset& data,
                              const std::vector<int>& indices,
                              const TrainOptions& opt, RngStream& rng);

// One user's round: copy the global model, train on the shard, and return
// w_k - w. epochs == 0 yields a zero gradient. The global state is untouched.
GradientVector local_train(const Dataset& data, const std::vector<int>& shard,
                           const ModelState& global, const TrainOptions& opt,
                           RngStream& rng, int owner = -1, int round = 0);

// Classification accuracy of the model on a dataset (argmax of logits,
// ties to the lowest class id).
double evaluate_accuracy(const ModelState& model, const Dataset& data);

// w <- w + eta * g
ModelState apply_global(const ModelState& w, const GradientVector& g,
                        double eta);

}  // namespace vertfl
