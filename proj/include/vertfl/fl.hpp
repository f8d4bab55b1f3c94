#pragma once

#include <vector>

#include "vertfl/attacks.hpp"
#include "vertfl/config.hpp"
#include "vertfl/data.hpp"
#include "vertfl/training.hpp"
#include "vertfl/vert.hpp"

namespace vertfl {

// One experiment: T rounds of select / local-train / attack / aggregate /
// update. Plain FedAvg during warm-up, VERT (or a baseline aggregator) after.
// Deterministic for a given config: identical seeds produce bit-identical
// reports at any worker count.
std::vector<RoundReport> run(const ExperimentConfig& cfg);

// Whether compromised user k attacks in round t (Bernoulli(p) on a stream
// keyed by seed, user, round).
bool attack_draw(std::uint64_t seed, int user, int round, double p);

// The compromised user set: round(pr*K) ids drawn without replacement.
std::set<int> pick_compromised(std::uint64_t seed, int users, double pr);

// Uniform without-replacement selection of n of K users for round t, sorted.
std::vector<int> select_users(std::uint64_t seed, int users, int n, int round);

// Builds train/test datasets per the config (synthetic split or IDX files).
void build_datasets(const ExperimentConfig& cfg, Dataset* train, Dataset* test);

}  // namespace vertfl
