#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <doctest.h>

#include "vertfl/data.hpp"

using namespace vertfl;

TEST_CASE("make_synthetic: counts and shape") {
  const Dataset ds = make_synthetic(2, 2, 100, 42);
  CHECK(ds.size() == 200);
  CHECK(ds.dims == 2);
  int per_class[2] = {0, 0};
  for (int l : ds.labels) ++per_class[l];
  CHECK(per_class[0] == 100);
  CHECK(per_class[1] == 100);
}

TEST_CASE("make_synthetic: deterministic per seed") {
  const Dataset a = make_synthetic(3, 5, 50, 7);
  const Dataset b = make_synthetic(3, 5, 50, 7);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  const Dataset c = make_synthetic(3, 5, 50, 8);
  CHECK(a.features != c.features);
}

TEST_CASE("make_synthetic: centroid classifier oracle reaches 90%") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset ds = make_synthetic(10, 16, 100, seed);
    CHECK(centroid_train_accuracy(ds) >= 0.90);
  }
}

TEST_CASE("make_synthetic rejects bad arguments") {
  CHECK_THROWS_AS(make_synthetic(1, 4, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_synthetic(2, 1, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_synthetic(2, 4, 0, 1), std::invalid_argument);
}

namespace {

bool is_exact_partition(const Dataset& ds, const PartitionPlan& plan) {
  std::set<int> seen;
  std::size_t total = 0;
  for (const auto& shard : plan.assignments) {
    total += shard.size();
    for (int idx : shard)
      if (!seen.insert(idx).second) return false;
  }
  return total == ds.size();
}

}  // namespace

TEST_CASE("dirichlet_partition: single user owns everything") {
  const Dataset ds = make_synthetic(3, 4, 30, 5);
  const PartitionPlan plan = dirichlet_partition(ds, 1, 1.0, 5);
  CHECK(plan.assignments.size() == 1);
  CHECK(plan.assignments[0].size() == ds.size());
}

TEST_CASE("dirichlet_partition: exact disjoint cover, no empty shards") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Dataset ds = make_synthetic(5, 4, 60, seed);
    for (double beta : {0.1, 0.6, 100.0}) {
      const PartitionPlan plan = dirichlet_partition(ds, 10, beta, seed);
      CHECK(is_exact_partition(ds, plan));
      for (const auto& shard : plan.assignments) CHECK(!shard.empty());
    }
  }
}

TEST_CASE("dirichlet_partition: large beta approximates the global mix") {
  // 1000 samples, 10 users, beta=100: every per-user class share should sit
  // within +-20% (relative) of the global share. Checked across 5 seeds.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset ds = make_synthetic(5, 4, 200, seed);
    const PartitionPlan plan = dirichlet_partition(ds, 10, 100.0, seed);
    const double global_share = 1.0 / 5;
    for (const auto& shard : plan.assignments) {
      std::vector<int> counts(5, 0);
      for (int idx : shard) ++counts[ds.labels[idx]];
      for (int c = 0; c < 5; ++c) {
        const double share =
            static_cast<double>(counts[c]) / static_cast<double>(shard.size());
        CHECK(share >= global_share * 0.8);
        CHECK(share <= global_share * 1.2);
      }
    }
  }
}

TEST_CASE("dirichlet_partition: small beta concentrates labels") {
  // beta=0.1 should leave at least one user dominated by one class.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset ds = make_synthetic(5, 4, 200, seed);
    const PartitionPlan plan = dirichlet_partition(ds, 10, 0.1, seed);
    bool found_skewed = false;
    for (const auto& shard : plan.assignments) {
      std::vector<int> counts(5, 0);
      for (int idx : shard) ++counts[ds.labels[idx]];
      const int top = *std::max_element(counts.begin(), counts.end());
      if (top >= static_cast<int>(0.6 * shard.size())) found_skewed = true;
    }
    CHECK(found_skewed);
  }
}

TEST_CASE("dirichlet_partition: entropy drops with beta") {
  double h_iid = 0.0, h_skew = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset ds = make_synthetic(8, 4, 150, seed);
    h_iid += mean_label_entropy(ds, dirichlet_partition(ds, 12, 100.0, seed));
    h_skew += mean_label_entropy(ds, dirichlet_partition(ds, 12, 0.6, seed));
  }
  CHECK(h_skew / 5.0 < h_iid / 5.0);
}

TEST_CASE("dirichlet_partition rejects undersized datasets") {
  const Dataset ds = make_synthetic(2, 4, 3, 1);  // 6 samples
  CHECK_THROWS_AS(dirichlet_partition(ds, 7, 1.0, 1), std::invalid_argument);
}

namespace {

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

TEST_CASE("load_idx round-trips a generated file") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vertfl_idx_test";
  fs::create_directories(dir);
  const std::string img_path = (dir / "img.idx").string();
  const std::string lab_path = (dir / "lab.idx").string();

  {
    std::ofstream img(img_path, std::ios::binary);
    write_be32(img, 0x00000803u);
    write_be32(img, 3);  // count
    write_be32(img, 2);  // rows
    write_be32(img, 2);  // cols
    const unsigned char pixels[12] = {0,   255, 128, 64, 32, 16,
                                      255, 0,   1,   2,  3,  4};
    img.write(reinterpret_cast<const char*>(pixels), 12);

    std::ofstream lab(lab_path, std::ios::binary);
    write_be32(lab, 0x00000801u);
    write_be32(lab, 3);
    const unsigned char labels[3] = {0, 1, 2};
    lab.write(reinterpret_cast<const char*>(labels), 3);
  }

  const Dataset ds = load_idx(img_path, lab_path, 10);
  CHECK(ds.size() == 3);
  CHECK(ds.dims == 4);
  CHECK(ds.labels == std::vector<int>{0, 1, 2});
  CHECK(ds.features[0] == doctest::Approx(0.0));
  CHECK(ds.features[1] == doctest::Approx(1.0));
  CHECK(ds.features[2] == doctest::Approx(128.0 / 255.0));

  // Wrong magic is rejected.
  CHECK_THROWS_AS(load_idx(lab_path, lab_path, 10), std::runtime_error);
}

TEST_CASE("split_per_class keeps per-class budgets") {
  const Dataset ds = make_synthetic(4, 4, 25, 9);
  Dataset train, test;
  split_per_class(ds, 20, &train, &test);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  std::vector<int> counts(4, 0);
  for (int l : test.labels) ++counts[l];
  for (int c : counts) CHECK(c == 5);
}
