#pragma once

#include <cstdint>
#include <vector>

#include "vertfl/config.hpp"
#include "vertfl/training.hpp"

namespace vertfl {

// Everything an attack may draw on: the gradients compromised users would
// have submitted, optional knowledge of all honest gradients, the global
// model and shard access (model replacement retrains), and the round seed.
struct AttackContext {
  std::vector<GradientVector> compromised_honest;
  std::vector<GradientVector> all_honest;
  bool omniscient = false;

  const ModelState* global = nullptr;
  const Dataset* data = nullptr;
  const std::vector<std::vector<int>>* shards = nullptr;
  TrainOptions train;

  int n_selected = 0;  // |C_t|
  double z_max = 1.0;
  std::uint64_t seed = 0;
  int round = 0;
};

// Independent N(0,1)^d noise per attacker.
std::vector<GradientVector> gn_attack(const AttackContext& ctx,
                                      const std::vector<int>& attackers,
                                      std::size_t dim);

// Label-flipped local training to w_p, submitted scaled by |C_t| so a single
// aggregated copy replaces the global model under FedAvg.
std::vector<GradientVector> mr_attack(const AttackContext& ctx,
                                      const std::vector<int>& attackers);

// Min-Max distance attack: g + lambda * (-g/||g||), with the largest lambda
// keeping the crafted gradient within the reference set's max pairwise
// distance. All attackers submit the same vector.
std::vector<GradientVector> agr_attack(const AttackContext& ctx,
                                       const std::vector<int>& attackers);

// "A little is enough": elementwise mu + z_max * sigma over the compromised
// users' honest gradients (population sigma). All attackers identical.
std::vector<GradientVector> alie_attack(const AttackContext& ctx,
                                        const std::vector<int>& attackers);

std::vector<GradientVector> run_attack(AttackKind kind,
                                       const AttackContext& ctx,
                                       const std::vector<int>& attackers,
                                       std::size_t dim);

// Exposed pieces of the AGR solver, for oracle tests.
Vec agr_reference_mean(const std::vector<GradientVector>& refs);
double agr_max_pairwise_distance(const std::vector<GradientVector>& refs);
// Largest admissible lambda via doubling then bisection (<= 60 iterations,
// tolerance 1e-4).
double agr_lambda(const std::vector<GradientVector>& refs, double tol = 1e-4,
                  int max_iter = 60);

}  // namespace vertfl
