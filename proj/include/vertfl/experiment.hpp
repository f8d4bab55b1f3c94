#pragma once

#include <string>
#include <vector>

#include "vertfl/fl.hpp"

namespace vertfl {

// Fixed CSV schema; one row per round.
struct MetricsRow {
  int round = 0;
  double accuracy = 0.0;
  double max_accuracy_so_far = 0.0;
  double selection_precision = 0.0;
  double selection_recall = 0.0;
  double mean_rho_honest = 0.0;
  double mean_rho_malicious = 0.0;
  double local_train_ms = 0.0;
  double defense_ms = 0.0;
  double eval_ms = 0.0;
  double round_ms = 0.0;
};

extern const char* const kMetricsHeader;

std::vector<MetricsRow> to_metrics(const std::vector<RoundReport>& reports,
                                   bool record_timings);

std::string metrics_csv(const std::vector<MetricsRow>& rows);

struct ExperimentSummary {
  double max_accuracy = 0.0;
  double mean_precision = 0.0;   // over selection-active rounds
  double mean_rho_gap = 0.0;     // honest mean minus malicious mean
  double total_runtime_s = 0.0;
  std::uint64_t seed = 0;
};

ExperimentSummary summarize(const std::vector<RoundReport>& reports,
                            std::uint64_t seed, double total_runtime_s);

// Runs the experiment and writes <out_dir>/metrics.csv and summary.json.
// Returns 0 on success, nonzero with a diagnostic on stderr otherwise.
int run_experiment(const ExperimentConfig& cfg);

// One run per axis value under <out_dir>/sweep_<axis>/<value>, plus an
// index.json mapping values to summaries. Per-run failures are recorded and
// the sweep continues.
int sweep(const ExperimentConfig& base, const std::string& axis,
          const std::vector<std::string>& values);

struct BenchPoint {
  int d = 0;
  double ms_per_round = 0.0;
  std::size_t state_elements = 0;
};

// Times the VERT train+score phase on synthetic gradient histories at each
// model size. Requires at least two sizes. Writes <out_dir>/bench.json.
std::vector<BenchPoint> bench_scaling(const ExperimentConfig& cfg,
                                      const std::vector<int>& d_values,
                                      int users = 8, int rounds = 5);

}  // namespace vertfl
