#pragma once

#include <map>
#include <set>
#include <vector>

#include "vertfl/tensor.hpp"

namespace vertfl {

// Flat parameter delta g_k = w_k - w, the unit exchanged between clients,
// attacks, and aggregators.
struct GradientVector {
  Vec values;
  int owner = -1;
  int round = 0;
};

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation activation = Activation::None;
};

// Global/local model parameters plus the layer metadata needed to rebuild
// the network. flatten/unflatten round-trips exactly.
struct ModelState {
  Vec params;
  std::vector<LayerSpec> shapes;

  std::size_t dim() const { return params.size(); }
  Mlp to_mlp() const;
  static ModelState from_mlp(const Mlp& m);
};

struct RoundContext {
  int t = 0;
  std::vector<int> selected;  // C_t, sorted
  double eta = 1.0;
  std::set<int> honest;
  std::set<int> compromised;
};

struct PhaseTimes {
  double local_train_ms = 0.0;
  double defense_ms = 0.0;
  double eval_ms = 0.0;
  double round_ms = 0.0;
};

struct RoundReport {
  int t = 0;
  double accuracy = 0.0;
  std::map<int, double> rho;   // per selected user, VERT rounds only
  std::vector<int> selected;   // C_t
  std::vector<int> chosen;     // C_opt
  bool vert_active = false;
  double precision = 0.0;
  double recall = 0.0;
  double mean_rho_honest = 0.0;    // NaN when no scores
  double mean_rho_malicious = 0.0; // NaN when no scores
  PhaseTimes times;
};

}  // namespace vertfl
