#include "vertfl/aggregators.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace vertfl {

const char* to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::FedAvg: return "fedavg";
    case AggregatorKind::Krum: return "krum";
    case AggregatorKind::MultiKrum: return "multi_krum";
    case AggregatorKind::Median: return "median";
    case AggregatorKind::TrimmedMean: return "trimmed_mean";
  }
  return "?";
}

namespace {

void require_uniform(const std::vector<GradientVector>& grads,
                     const char* what) {
  if (grads.empty()) {
    std::string msg(what);
    msg += ": empty gradient list";
    throw std::invalid_argument(msg);
  }
  for (const auto& g : grads)
    if (g.values.size() != grads.front().values.size()) {
      std::string msg(what);
      msg += ": mismatched gradient lengths";
      throw std::invalid_argument(msg);
    }
}

std::size_t krum_argmin(const std::vector<GradientVector>& grads, int f) {
  const int n = static_cast<int>(grads.size());
  if (n < 3) throw std::invalid_argument("krum: need at least 3 gradients");
  if (f < 0) throw std::invalid_argument("krum: negative f");
  const int neighbors = std::max(1, n - f - 2);

  // Pairwise squared distances.
  std::vector<std::vector<double>> d2(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0;
      const Vec& a = grads[i].values;
      const Vec& b = grads[j].values;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
      }
      d2[i][j] = d2[j][i] = s;
    }

  double best_score = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> row;
    row.reserve(n - 1);
    for (int j = 0; j < n; ++j)
      if (j != i) row.push_back(d2[i][j]);
    std::sort(row.begin(), row.end());
    double score = 0.0;
    for (int k = 0; k < neighbors && k < static_cast<int>(row.size()); ++k)
      score += row[k];
    const bool better =
        score < best_score ||
        (score == best_score && grads[i].owner < grads[best].owner);
    if (better) {
      best_score = score;
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

}  // namespace

GradientVector fedavg(const std::vector<GradientVector>& grads) {
  require_uniform(grads, "fedavg");
  GradientVector out;
  out.round = grads.front().round;
  out.values.assign(grads.front().values.size(), 0.0);
  for (const auto& g : grads)
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] += g.values[i];
  const double inv = 1.0 / static_cast<double>(grads.size());
  for (auto& v : out.values) v *= inv;
  return out;
}

GradientVector krum(const std::vector<GradientVector>& grads, int f) {
  require_uniform(grads, "krum");
  return grads[krum_argmin(grads, f)];
}

GradientVector multi_krum(const std::vector<GradientVector>& grads, int f,
                          int m_sel) {
  require_uniform(grads, "multi_krum");
  if (m_sel < 1) throw std::invalid_argument("multi_krum: m_sel < 1");
  if (m_sel > static_cast<int>(grads.size()))
    throw std::invalid_argument("multi_krum: m_sel exceeds gradient count");

  std::vector<GradientVector> pool = grads;
  std::vector<GradientVector> picks;
  picks.reserve(m_sel);
  for (int r = 0; r < m_sel; ++r) {
    if (pool.size() < 3) {
      // Krum needs 3+; fall through by taking remaining gradients in
      // owner order until m_sel picks are collected.
      std::sort(pool.begin(), pool.end(),
                [](const GradientVector& a, const GradientVector& b) {
                  return a.owner < b.owner;
                });
      for (auto& g : pool) {
        if (static_cast<int>(picks.size()) == m_sel) break;
        picks.push_back(g);
      }
      break;
    }
    const std::size_t idx = krum_argmin(pool, f);
    picks.push_back(pool[idx]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  return fedavg(picks);
}

GradientVector median(const std::vector<GradientVector>& grads) {
  require_uniform(grads, "median");
  const std::size_t d = grads.front().values.size();
  const std::size_t n = grads.size();
  GradientVector out;
  out.round = grads.front().round;
  out.values.resize(d);
  std::vector<double> col(n);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < n; ++i) col[i] = grads[i].values[k];
    std::sort(col.begin(), col.end());
    out.values[k] = (n % 2 == 1) ? col[n / 2]
                                 : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return out;
}

GradientVector trimmed_mean(const std::vector<GradientVector>& grads,
                            int trim) {
  require_uniform(grads, "trimmed_mean");
  const std::size_t n = grads.size();
  if (trim < 0) throw std::invalid_argument("trimmed_mean: negative trim");
  if (2 * static_cast<std::size_t>(trim) >= n) {
    char buf[96];
    std::snprintf(buf, sizeof(buf),
                  "trimmed_mean: trim %d too large for %zu gradients", trim, n);
    throw std::invalid_argument(buf);
  }
  const std::size_t d = grads.front().values.size();
  GradientVector out;
  out.round = grads.front().round;
  out.values.resize(d);
  std::vector<double> col(n);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < n; ++i) col[i] = grads[i].values[k];
    std::sort(col.begin(), col.end());
    double s = 0.0;
    for (std::size_t i = trim; i < n - trim; ++i) s += col[i];
    out.values[k] = s / static_cast<double>(n - 2 * trim);
  }
  return out;
}

GradientVector aggregate(AggregatorKind kind,
                         const std::vector<GradientVector>& grads, int f,
                         int m_sel, int trim) {
  switch (kind) {
    case AggregatorKind::FedAvg:
      return fedavg(grads);
    case AggregatorKind::Krum: {
      if (grads.size() < 3) return fedavg(grads);
      const int fc = std::clamp(f, 0, static_cast<int>(grads.size()) - 3);
      return krum(grads, fc);
    }
    case AggregatorKind::MultiKrum: {
      if (grads.size() < 3) return fedavg(grads);
      const int fc = std::clamp(f, 0, static_cast<int>(grads.size()) - 3);
      const int m = std::clamp(m_sel, 1, static_cast<int>(grads.size()));
      return multi_krum(grads, fc, m);
    }
    case AggregatorKind::Median:
      return median(grads);
    case AggregatorKind::TrimmedMean: {
      const int tmax = (static_cast<int>(grads.size()) - 1) / 2;
      return trimmed_mean(grads, std::clamp(trim, 0, tmax));
    }
  }
  throw std::logic_error("aggregate: unknown kind");
}

}  // namespace vertfl
