#include "vertfl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace vertfl {

const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Gn: return "gn";
    case AttackKind::Mr: return "mr";
    case AttackKind::Agr: return "agr";
    case AttackKind::Alie: return "alie";
  }
  return "?";
}

const char* to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::FedAvg: return "fedavg";
    case DefenseKind::Krum: return "krum";
    case DefenseKind::MultiKrum: return "multi_krum";
    case DefenseKind::Median: return "median";
    case DefenseKind::TrimmedMean: return "trimmed_mean";
    case DefenseKind::Vert: return "vert";
  }
  return "?";
}

AttackKind attack_from_string(const std::string& s) {
  if (s == "none") return AttackKind::None;
  if (s == "gn") return AttackKind::Gn;
  if (s == "mr") return AttackKind::Mr;
  if (s == "agr") return AttackKind::Agr;
  if (s == "alie") return AttackKind::Alie;
  throw std::runtime_error("unknown attack kind: " + s);
}

DefenseKind defense_from_string(const std::string& s) {
  if (s == "fedavg") return DefenseKind::FedAvg;
  if (s == "krum") return DefenseKind::Krum;
  if (s == "multi_krum") return DefenseKind::MultiKrum;
  if (s == "median") return DefenseKind::Median;
  if (s == "trimmed_mean") return DefenseKind::TrimmedMean;
  if (s == "vert") return DefenseKind::Vert;
  throw std::runtime_error("unknown defense kind: " + s);
}

AggregatorKind aggregator_from_string(const std::string& s) {
  if (s == "fedavg") return AggregatorKind::FedAvg;
  if (s == "krum") return AggregatorKind::Krum;
  if (s == "multi_krum") return AggregatorKind::MultiKrum;
  if (s == "median") return AggregatorKind::Median;
  if (s == "trimmed_mean") return AggregatorKind::TrimmedMean;
  throw std::runtime_error("unknown aggregator kind: " + s);
}

namespace {

std::string trim_ws(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long r = 0;
  try {
    r = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': not an integer: " + v);
  }
  if (pos != v.size())
    throw std::runtime_error("config key '" + key + "': not an integer: " + v);
  return r;
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double r = 0;
  try {
    r = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': not a number: " + v);
  }
  if (pos != v.size())
    throw std::runtime_error("config key '" + key + "': not a number: " + v);
  return r;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::runtime_error("config key '" + key + "': not a boolean: " + v);
}

using Setter =
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(to_int(k, v));
       }},
      {"experiment.users", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.users = static_cast<int>(to_int(k, v));
       }},
      {"experiment.selected", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.selected = static_cast<int>(to_int(k, v));
       }},
      {"experiment.pr", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.pr = to_real(k, v);
       }},
      {"experiment.workers", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.workers = static_cast<int>(to_int(k, v));
       }},
      {"experiment.record_timings", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.record_timings = to_bool(k, v);
       }},
      {"attack.kind", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.attack = attack_from_string(v);
       }},
      {"attack.probability", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.attack_probability = to_real(k, v);
       }},
      {"attack.start_round", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.attack_start = static_cast<int>(to_int(k, v));
       }},
      {"attack.omniscient", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.omniscient = to_bool(k, v);
       }},
      {"attack.z_max", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.z_max = to_real(k, v);
       }},
      {"defense.kind", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.defense = defense_from_string(v);
       }},
      {"defense.successive", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.successive = aggregator_from_string(v);
       }},
      {"vert.m", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.m = static_cast<int>(to_int(k, v));
       }},
      {"vert.kappa", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.kappa = static_cast<int>(to_int(k, v));
       }},
      {"vert.s", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.s = static_cast<int>(to_int(k, v));
       }},
      {"vert.epochs", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vert_epochs = static_cast<int>(to_int(k, v));
       }},
      {"vert.output_activation", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "none") c.output_activation = Activation::None;
         else if (v == "softmax") c.output_activation = Activation::Softmax;
         else throw std::runtime_error("config key '" + k + "': expected none|softmax, got " + v);
       }},
      {"vert.lr_predictor", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.lr_predictor = to_real(k, v);
       }},
      {"data.source", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v == "synthetic") c.source = DataSource::Synthetic;
         else if (v == "idx") c.source = DataSource::Idx;
         else throw std::runtime_error("config key '" + k + "': expected synthetic|idx, got " + v);
       }},
      {"data.classes", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.classes = static_cast<int>(to_int(k, v));
       }},
      {"data.dims", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.dims = static_cast<int>(to_int(k, v));
       }},
      {"data.per_class", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.per_class = static_cast<int>(to_int(k, v));
       }},
      {"data.test_per_class", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.test_per_class = static_cast<int>(to_int(k, v));
       }},
      {"data.beta", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.beta = to_real(k, v);
       }},
      {"data.spread", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.spread = to_real(k, v);
       }},
      {"data.idx_images", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.idx_images = v;
       }},
      {"data.idx_labels", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.idx_labels = v;
       }},
      {"data.idx_test_images", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.idx_test_images = v;
       }},
      {"data.idx_test_labels", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.idx_test_labels = v;
       }},
      {"training.rounds", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.rounds = static_cast<int>(to_int(k, v));
       }},
      {"training.warmup", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.warmup = static_cast<int>(to_int(k, v));
       }},
      {"training.local_epochs", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.local_epochs = static_cast<int>(to_int(k, v));
       }},
      {"training.batch", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.batch = static_cast<int>(to_int(k, v));
       }},
      {"training.lr_local", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.lr_local = to_real(k, v);
       }},
      {"training.lr_global", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.lr_global = to_real(k, v);
       }},
      {"training.hidden", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.hidden = static_cast<int>(to_int(k, v));
       }},
      {"output.dir", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.out_dir = v;
       }},
  };
  return table;
}

// Short aliases accepted on the command line, sweep axes, and config files.
const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> table = {
      {"users", "experiment.users"},       {"selected", "experiment.selected"},
      {"pr", "experiment.pr"},             {"workers", "experiment.workers"},
      {"attack", "attack.kind"},           {"defense", "defense.kind"},
      {"successive", "defense.successive"},{"kappa", "vert.kappa"},
      {"m", "vert.m"},                     {"s", "vert.s"},
      {"beta", "data.beta"},               {"rounds", "training.rounds"},
      {"T", "training.rounds"},            {"warmup", "training.warmup"},
  };
  return table;
}

std::string resolve_key(const std::string& key) {
  if (setters().count(key)) return key;
  auto it = aliases().find(key);
  if (it != aliases().end()) return it->second;
  throw std::runtime_error("unknown config key: " + key);
}

void apply_env_overrides(ExperimentConfig& cfg) {
  for (const auto& [key, fn] : setters()) {
    (void)fn;
    std::string env = "VERTFL_";
    for (char ch : key)
      env += (ch == '.') ? '_' : static_cast<char>(std::toupper(ch));
    if (const char* v = std::getenv(env.c_str()))
      set_config_key(cfg, key, v);
  }
}

}  // namespace

void set_config_key(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  const std::string k = resolve_key(trim_ws(key));
  setters().at(k)(cfg, k, trim_ws(value));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, fn] : setters()) {
    (void)fn;
    keys.push_back(k);
  }
  return keys;
}

ExperimentConfig parse_config(const std::string& text, bool apply_env) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim_ws(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": malformed section header");
      section = trim_ws(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    std::string key = trim_ws(line.substr(0, eq));
    const std::string value = trim_ws(line.substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    try {
      set_config_key(cfg, key, value);
    } catch (const std::exception& e) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  if (apply_env) apply_env_overrides(cfg);
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), /*apply_env=*/true);
}

void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::runtime_error("config field '" + field + "': " + why);
  };
  if (cfg.users < 1) fail("experiment.users", "must be >= 1");
  if (cfg.selected < 1 || cfg.selected > cfg.users)
    fail("experiment.selected", "must be in [1, users]");
  if (cfg.pr < 0.0 || cfg.pr > 1.0) fail("experiment.pr", "must be in [0, 1]");
  if (cfg.workers < 1) fail("experiment.workers", "must be >= 1");
  if (cfg.attack_probability < 0.0 || cfg.attack_probability > 1.0)
    fail("attack.probability", "must be in [0, 1]");
  if (cfg.attack_start < 1) fail("attack.start_round", "must be >= 1");
  if (cfg.m < 2) fail("vert.m", "must be >= 2");
  if (cfg.kappa < 1) fail("vert.kappa", "must be >= 1");
  if (cfg.kappa > cfg.selected)
    fail("vert.kappa", "must not exceed experiment.selected");
  if (cfg.s < 1) fail("vert.s", "must be >= 1");
  if (cfg.vert_epochs < 1) fail("vert.epochs", "must be >= 1");
  if (cfg.lr_predictor <= 0.0) fail("vert.lr_predictor", "must be > 0");
  if (cfg.classes < 2) fail("data.classes", "must be >= 2");
  if (cfg.dims < 2) fail("data.dims", "must be >= 2");
  if (cfg.per_class < 1) fail("data.per_class", "must be >= 1");
  if (cfg.test_per_class < 1) fail("data.test_per_class", "must be >= 1");
  if (cfg.beta <= 0.0) fail("data.beta", "must be > 0");
  if (cfg.spread <= 0.0) fail("data.spread", "must be > 0");
  if (cfg.source == DataSource::Idx &&
      (cfg.idx_images.empty() || cfg.idx_labels.empty()))
    fail("data.idx_images", "idx source needs image and label paths");
  if (cfg.rounds < 1) fail("training.rounds", "must be >= 1");
  if (cfg.warmup < 0 || cfg.warmup >= cfg.rounds)
    fail("training.warmup", "must be in [0, rounds)");
  if (cfg.local_epochs < 0) fail("training.local_epochs", "must be >= 0");
  if (cfg.batch < 1) fail("training.batch", "must be >= 1");
  if (cfg.lr_local <= 0.0) fail("training.lr_local", "must be > 0");
  if (cfg.hidden < 0) fail("training.hidden", "must be >= 0");
}

}  // namespace vertfl
