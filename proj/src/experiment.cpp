#include "vertfl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

namespace vertfl {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using ordered_json = nlohmann::ordered_json;

const char* const kMetricsHeader =
    "round,accuracy,max_accuracy_so_far,selection_precision,"
    "selection_recall,mean_rho_honest,mean_rho_malicious,local_train_ms,"
    "defense_ms,eval_ms,round_ms";

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace

std::vector<MetricsRow> to_metrics(const std::vector<RoundReport>& reports,
                                   bool record_timings) {
  std::vector<MetricsRow> rows;
  rows.reserve(reports.size());
  double best = 0.0;
  for (const auto& r : reports) {
    best = std::max(best, r.accuracy);
    MetricsRow row;
    row.round = r.t;
    row.accuracy = r.accuracy;
    row.max_accuracy_so_far = best;
    row.selection_precision = r.precision;
    row.selection_recall = r.recall;
    row.mean_rho_honest = r.mean_rho_honest;
    row.mean_rho_malicious = r.mean_rho_malicious;
    if (record_timings) {
      row.local_train_ms = r.times.local_train_ms;
      row.defense_ms = r.times.defense_ms;
      row.eval_ms = r.times.eval_ms;
      row.round_ms = r.times.round_ms;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.round);
    out += ',';
    out += fmt(r.accuracy);
    out += ',';
    out += fmt(r.max_accuracy_so_far);
    out += ',';
    out += fmt(r.selection_precision);
    out += ',';
    out += fmt(r.selection_recall);
    out += ',';
    out += fmt(r.mean_rho_honest);
    out += ',';
    out += fmt(r.mean_rho_malicious);
    out += ',';
    out += fmt(r.local_train_ms);
    out += ',';
    out += fmt(r.defense_ms);
    out += ',';
    out += fmt(r.eval_ms);
    out += ',';
    out += fmt(r.round_ms);
    out += '\n';
  }
  return out;
}

ExperimentSummary summarize(const std::vector<RoundReport>& reports,
                            std::uint64_t seed, double total_runtime_s) {
  ExperimentSummary s;
  s.seed = seed;
  s.total_runtime_s = total_runtime_s;
  double prec_sum = 0.0, gap_sum = 0.0;
  int prec_n = 0, gap_n = 0;
  for (const auto& r : reports) {
    s.max_accuracy = std::max(s.max_accuracy, r.accuracy);
    if (r.vert_active) {
      prec_sum += r.precision;
      ++prec_n;
      if (!std::isnan(r.mean_rho_honest) && !std::isnan(r.mean_rho_malicious)) {
        gap_sum += r.mean_rho_honest - r.mean_rho_malicious;
        ++gap_n;
      }
    }
  }
  if (prec_n == 0) {
    for (const auto& r : reports) {
      prec_sum += r.precision;
      ++prec_n;
    }
  }
  s.mean_precision = prec_n ? prec_sum / prec_n : 0.0;
  s.mean_rho_gap = gap_n ? gap_sum / gap_n : 0.0;
  return s;
}

namespace {

ordered_json summary_json(const ExperimentSummary& s) {
  ordered_json j;
  j["max_accuracy"] = s.max_accuracy;
  j["mean_precision"] = s.mean_precision;
  j["mean_rho_gap"] = s.mean_rho_gap;
  j["total_runtime_s"] = s.total_runtime_s;
  j["seed"] = s.seed;
  return j;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
  try {
    const auto start = Clock::now();
    const std::vector<RoundReport> reports = run(cfg);
    const double secs =
        std::chrono::duration<double>(Clock::now() - start).count();

    fs::create_directories(cfg.out_dir);
    write_file(fs::path(cfg.out_dir) / "metrics.csv",
               metrics_csv(to_metrics(reports, cfg.record_timings)));
    const ExperimentSummary s = summarize(reports, cfg.seed, secs);
    write_file(fs::path(cfg.out_dir) / "summary.json",
               summary_json(s).dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "experiment failed: " << e.what() << "\n";
    return 1;
  }
}

namespace {

std::string sanitize(const std::string& v) {
  std::string out;
  for (char c : v)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
            c == '-' || c == '_')
               ? c
               : '_';
  return out;
}

}  // namespace

int sweep(const ExperimentConfig& base, const std::string& axis,
          const std::vector<std::string>& values) {
  if (values.empty()) {
    std::cerr << "sweep: empty value list\n";
    return 1;
  }
  const fs::path root = fs::path(base.out_dir) / ("sweep_" + sanitize(axis));
  fs::create_directories(root);

  ordered_json index;
  index["axis"] = axis;
  index["runs"] = ordered_json::array();
  int failures = 0;
  for (const auto& value : values) {
    ordered_json entry;
    entry["value"] = value;
    ExperimentConfig cfg = base;
    const fs::path dir = root / sanitize(value);
    try {
      set_config_key(cfg, axis, value);
      cfg.out_dir = dir.string();
      validate(cfg);
      if (run_experiment(cfg) != 0)
        throw std::runtime_error("experiment returned nonzero");
      std::ifstream in(dir / "summary.json");
      ordered_json s;
      in >> s;
      entry["status"] = "ok";
      entry["dir"] = dir.string();
      entry["summary"] = s;
    } catch (const std::exception& e) {
      ++failures;
      entry["status"] = "failed";
      entry["error"] = e.what();
    }
    index["runs"].push_back(entry);
  }
  write_file(root / "index.json", index.dump(2) + "\n");
  return failures == 0 ? 0 : 1;
}

std::vector<BenchPoint> bench_scaling(const ExperimentConfig& cfg,
                                      const std::vector<int>& d_values,
                                      int users, int rounds) {
  if (d_values.size() < 2)
    throw std::invalid_argument("bench_scaling: need at least 2 model sizes");

  std::vector<BenchPoint> points;
  for (int d : d_values) {
    if (cfg.s > d / 4)
      throw std::invalid_argument(
          "bench_scaling: s too large for requested d (need s <= d/4)");
    VertConfig vcfg;
    vcfg.m = cfg.m;
    vcfg.kappa = std::min(cfg.kappa, users);
    vcfg.epochs = cfg.vert_epochs;
    vcfg.s = cfg.s;
    vcfg.output_activation = cfg.output_activation;
    vcfg.lr = cfg.lr_predictor;

    RngStream proj_rng(cfg.seed, Stream::ProjectorInit,
                       static_cast<std::uint64_t>(d));
    const Projector proj = Projector::gaussian(cfg.s, d, proj_rng);
    HistoryStore store(cfg.m);
    std::map<int, UserPredictorState> states;
    RngStream grad_rng(cfg.seed, Stream::Bench, static_cast<std::uint64_t>(d));

    auto synth_round = [&](int t) {
      std::vector<GradientVector> grads(users);
      for (int k = 0; k < users; ++k) {
        grads[k].owner = k;
        grads[k].round = t;
        grads[k].values = grad_rng.normal_vector(d, 0.0, 0.1);
      }
      return grads;
    };

    // Seed the history window before timing.
    int t = 1;
    for (; t <= cfg.m; ++t) {
      const auto grads = synth_round(t);
      store.append_round(t, grads, fedavg(grads).values, {});
    }

    double total_ms = 0.0;
    for (int r = 0; r < rounds; ++r, ++t) {
      const auto grads = synth_round(t);
      const auto start = Clock::now();
      vert_round(t, grads, store, states, proj, vcfg, cfg.seed, cfg.workers);
      total_ms +=
          std::chrono::duration<double, std::milli>(Clock::now() - start)
              .count();
    }

    BenchPoint p;
    p.d = d;
    p.ms_per_round = total_ms / rounds;
    p.state_elements = vert_state_footprint(states, proj).total();
    points.push_back(p);
  }

  ordered_json j = ordered_json::array();
  for (const auto& p : points) {
    ordered_json e;
    e["d"] = p.d;
    e["ms_per_round"] = p.ms_per_round;
    e["state_elements"] = p.state_elements;
    j.push_back(e);
  }
  fs::create_directories(cfg.out_dir);
  write_file(fs::path(cfg.out_dir) / "bench.json", j.dump(2) + "\n");
  return points;
}

}  // namespace vertfl
