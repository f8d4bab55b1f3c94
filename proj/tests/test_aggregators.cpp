#include <algorithm>
#include <limits>

#include <doctest.h>

#include "vertfl/aggregators.hpp"
#include "vertfl/rng.hpp"

using namespace vertfl;

namespace {

GradientVector gv(std::initializer_list<double> vals, int owner) {
  GradientVector g;
  g.values = vals;
  g.owner = owner;
  return g;
}

std::vector<GradientVector> random_fixture(RngStream& rng, int n, int d) {
  std::vector<GradientVector> grads(n);
  for (int i = 0; i < n; ++i) {
    grads[i].owner = i;
    grads[i].values = rng.normal_vector(d, 0.0, 2.0);
  }
  return grads;
}

// Independent re-derivation of the Krum choice: full distance matrix, sorted
// copies, explicit argmin.
int krum_oracle(const std::vector<GradientVector>& grads, int f) {
  const int n = static_cast<int>(grads.size());
  const int neighbors = std::max(1, n - f - 2);
  double best_score = std::numeric_limits<double>::infinity();
  int best = -1;
  for (int i = 0; i < n; ++i) {
    std::vector<double> dists;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dist = l2_dist(grads[i].values, grads[j].values);
      dists.push_back(dist * dist);
    }
    std::sort(dists.begin(), dists.end());
    double score = 0.0;
    for (int k = 0; k < neighbors; ++k) score += dists[k];
    if (score < best_score ||
        (score == best_score && grads[i].owner < grads[best].owner)) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

Vec median_oracle(const std::vector<GradientVector>& grads) {
  const std::size_t d = grads.front().values.size();
  Vec out(d);
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> col;
    for (const auto& g : grads) col.push_back(g.values[k]);
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    out[k] = (n % 2 == 1) ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return out;
}

Vec trimmed_oracle(const std::vector<GradientVector>& grads, int trim) {
  const std::size_t d = grads.front().values.size();
  Vec out(d);
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> col;
    for (const auto& g : grads) col.push_back(g.values[k]);
    std::sort(col.begin(), col.end());
    double s = 0.0;
    for (std::size_t i = trim; i < col.size() - trim; ++i) s += col[i];
    out[k] = s / static_cast<double>(col.size() - 2 * trim);
  }
  return out;
}

double max_abs_diff(const Vec& a, const Vec& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("fedavg basics") {
  CHECK(fedavg({gv({1, 1}, 0)}).values == Vec{1.0, 1.0});
  CHECK(fedavg({gv({0, 2}, 0), gv({2, 0}, 1)}).values == Vec{1.0, 1.0});
  const auto copies = std::vector<GradientVector>(5, gv({0.5, -2.5}, 0));
  CHECK(fedavg(copies).values == Vec{0.5, -2.5});
  CHECK_THROWS_AS(fedavg({}), std::invalid_argument);
}

TEST_CASE("krum: identical gradients and an obvious outlier") {
  const auto same = std::vector<GradientVector>{gv({1, 2}, 0), gv({1, 2}, 1),
                                                gv({1, 2}, 2)};
  CHECK(krum(same, 0).values == Vec{1.0, 2.0});

  const std::vector<GradientVector> mix = {gv({0.0}, 0), gv({0.1}, 1),
                                           gv({10.0}, 2)};
  const GradientVector winner = krum(mix, 1);
  CHECK(winner.values[0] != 10.0);
  CHECK(winner.owner == krum_oracle(mix, 1));
}

TEST_CASE("krum: output is always one of the inputs, exactly") {
  RngStream rng(111);
  for (int trial = 0; trial < 20; ++trial) {
    const auto grads = random_fixture(rng, 6, 4);
    const GradientVector w = krum(grads, 1);
    bool found = false;
    for (const auto& g : grads)
      if (g.values == w.values && g.owner == w.owner) found = true;
    CHECK(found);
  }
}

TEST_CASE("krum: permutation invariance with distinct scores") {
  RngStream rng(222);
  const auto grads = random_fixture(rng, 6, 3);
  const GradientVector w1 = krum(grads, 2);
  auto shuffled = grads;
  std::reverse(shuffled.begin(), shuffled.end());
  const GradientVector w2 = krum(shuffled, 2);
  CHECK(w1.values == w2.values);
  CHECK(w1.owner == w2.owner);
}

TEST_CASE("multi_krum: m_sel=1 equals krum; m_sel=n, f=0 equals fedavg") {
  RngStream rng(333);
  const auto grads = random_fixture(rng, 5, 3);
  CHECK(multi_krum(grads, 1, 1).values == krum(grads, 1).values);
  CHECK(max_abs_diff(multi_krum(grads, 0, 5).values, fedavg(grads).values) <=
        1e-12);
}

TEST_CASE("multi_krum matches a step-by-step sequential reference") {
  RngStream rng(444);
  const auto grads = random_fixture(rng, 7, 4);
  const int f = 2, m_sel = 3;

  std::vector<GradientVector> pool = grads;
  std::vector<GradientVector> picks;
  for (int r = 0; r < m_sel; ++r) {
    const int idx = krum_oracle(pool, f);
    picks.push_back(pool[idx]);
    pool.erase(pool.begin() + idx);
  }
  CHECK(max_abs_diff(multi_krum(grads, f, m_sel).values,
                     fedavg(picks).values) <= 1e-12);
}

TEST_CASE("median basics") {
  CHECK(median({gv({1, 2}, 0), gv({3, 4}, 1), gv({5, 6}, 2)}).values ==
        Vec{3.0, 4.0});
  CHECK(median({gv({7, -1}, 0)}).values == Vec{7.0, -1.0});
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("trimmed_mean basics") {
  RngStream rng(555);
  const auto grads = random_fixture(rng, 6, 3);
  CHECK(max_abs_diff(trimmed_mean(grads, 0).values, fedavg(grads).values) <=
        1e-12);
  CHECK(trimmed_mean({gv({0}, 0), gv({1}, 1), gv({100}, 2)}, 1).values ==
        Vec{1.0});
  CHECK_THROWS_AS(trimmed_mean({gv({0}, 0), gv({1}, 1)}, 1),
                  std::invalid_argument);
}

TEST_CASE("200 random fixtures match the brute-force oracles") {
  RngStream rng(999);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(5));  // 3..7
    const int d = 1 + static_cast<int>(rng.below(5));  // 1..5
    const auto grads = random_fixture(rng, n, d);
    const int f = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 2)));

    CHECK(krum(grads, f).owner == grads[krum_oracle(grads, f)].owner);
    CHECK(max_abs_diff(median(grads).values, median_oracle(grads)) <= 1e-12);

    const int max_trim = (n - 1) / 2;
    const int trim = static_cast<int>(rng.below(max_trim + 1));
    CHECK(max_abs_diff(trimmed_mean(grads, trim).values,
                       trimmed_oracle(grads, trim)) <= 1e-12);

    const int m_sel = 1 + static_cast<int>(rng.below(n));
    std::vector<GradientVector> pool = grads;
    std::vector<GradientVector> picks;
    for (int r = 0; r < m_sel && pool.size() >= 3; ++r) {
      const int idx = krum_oracle(pool, std::min(f, static_cast<int>(pool.size()) - 3));
      picks.push_back(pool[idx]);
      pool.erase(pool.begin() + idx);
    }
    if (static_cast<int>(picks.size()) == m_sel) {
      CHECK(max_abs_diff(multi_krum(grads, f, m_sel).values,
                         fedavg(picks).values) <= 1e-12);
    }
  }
}

TEST_CASE("median and trimmed_mean are coordinatewise monotone") {
  RngStream rng(777);
  for (int trial = 0; trial < 50; ++trial) {
    auto grads = random_fixture(rng, 5, 3);
    const Vec med_before = median(grads).values;
    const Vec trim_before = trimmed_mean(grads, 1).values;
    const int who = static_cast<int>(rng.below(5));
    const int coord = static_cast<int>(rng.below(3));
    grads[who].values[coord] += 1.5;
    const Vec med_after = median(grads).values;
    const Vec trim_after = trimmed_mean(grads, 1).values;
    CHECK(med_after[coord] >= med_before[coord] - 1e-12);
    CHECK(trim_after[coord] >= trim_before[coord] - 1e-12);
  }
}

TEST_CASE("permutation invariance of the elementwise aggregators") {
  RngStream rng(888);
  const auto grads = random_fixture(rng, 6, 4);
  auto shuffled = grads;
  std::rotate(shuffled.begin(), shuffled.begin() + 2, shuffled.end());
  CHECK(median(grads).values == median(shuffled).values);
  CHECK(max_abs_diff(trimmed_mean(grads, 1).values,
                     trimmed_mean(shuffled, 1).values) <= 1e-12);
  CHECK(max_abs_diff(fedavg(grads).values, fedavg(shuffled).values) <= 1e-12);
}
