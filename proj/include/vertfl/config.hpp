#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vertfl/aggregators.hpp"

namespace vertfl {

enum class AttackKind { None, Gn, Mr, Agr, Alie };
enum class DefenseKind { FedAvg, Krum, MultiKrum, Median, TrimmedMean, Vert };
enum class DataSource { Synthetic, Idx };

const char* to_string(AttackKind k);
const char* to_string(DefenseKind k);

AttackKind attack_from_string(const std::string& s);
DefenseKind defense_from_string(const std::string& s);
AggregatorKind aggregator_from_string(const std::string& s);

struct ExperimentConfig {
  std::uint64_t seed = 1;

  // [experiment]
  int users = 100;          // K
  int selected = 80;        // |C_t|
  double pr = 0.8;          // compromised ratio
  int workers = 1;
  bool record_timings = false;

  // [attack]
  AttackKind attack = AttackKind::None;
  double attack_probability = 0.9;
  int attack_start = 3;
  bool omniscient = false;
  double z_max = 1.0;

  // [defense]
  DefenseKind defense = DefenseKind::Vert;
  AggregatorKind successive = AggregatorKind::Krum;

  // [vert]
  int m = 10;
  int kappa = 15;
  int s = 128;
  int vert_epochs = 5;
  Activation output_activation = Activation::None;
  double lr_predictor = 0.001;

  // [data]
  DataSource source = DataSource::Synthetic;
  int classes = 10;
  int dims = 64;
  int per_class = 200;
  int test_per_class = 50;
  double beta = 100.0;
  double spread = 0.25;
  std::string idx_images, idx_labels, idx_test_images, idx_test_labels;

  // [training]
  int rounds = 200;  // T
  int warmup = 2;
  int local_epochs = 2;
  int batch = 50;
  double lr_local = 0.05;
  double lr_global = 1.0;  // eta
  int hidden = 32;         // task-model hidden width (0 = logistic)

  // [output]
  std::string out_dir = "out";
};

// Parses the key = value config text (see README for the grammar), applies
// VERTFL_* environment overrides, validates, and returns the config.
// Unknown keys and constraint violations raise std::runtime_error with the
// offending line/field named.
ExperimentConfig load_config(const std::string& path);

// Same, from an in-memory string ("" means all defaults). Used by tests.
ExperimentConfig parse_config(const std::string& text,
                              bool apply_env = false);

// Applies a single "key = value" override (flat key or alias); used by
// sweep axes and env overrides.
void set_config_key(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

// Throws std::runtime_error naming the violated field.
void validate(const ExperimentConfig& cfg);

// All recognized flat keys, for diagnostics.
std::vector<std::string> config_keys();

}  // namespace vertfl
