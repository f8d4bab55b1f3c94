#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vertfl/rng.hpp"

namespace vertfl {

struct Dataset {
  std::vector<double> features;  // n x dims, row-major
  std::vector<int> labels;       // class ids in [0, classes)
  int dims = 0;
  int classes = 0;

  std::size_t size() const { return labels.size(); }
  const double* row(std::size_t i) const { return features.data() + i * dims; }
  std::vector<double> sample(std::size_t i) const {
    return std::vector<double>(row(i), row(i) + dims);
  }
};

struct PartitionPlan {
  std::vector<std::vector<int>> assignments;  // per-user sample indices
  double beta = 0.0;
};

// Gaussian class clusters around means at least unit distance apart.
// Deterministic per seed; `spread` is the per-coordinate cluster stddev.
Dataset make_synthetic(int classes, int dims, int per_class,
                       std::uint64_t seed, double spread = 0.25);

// Per-class Dirichlet(beta) split of sample indices across users. Users left
// empty by the draw are topped up with one sample stolen from the largest
// shard. Throws if the dataset has fewer samples than users.
PartitionPlan dirichlet_partition(const Dataset& ds, int users, double beta,
                                  std::uint64_t seed);

// Nearest-class-centroid accuracy on the dataset itself; test oracle for the
// synthetic generator, also handy for sanity checks on loaded data.
double centroid_train_accuracy(const Dataset& ds);

// Mean per-user label entropy (nats) under a partition plan.
double mean_label_entropy(const Dataset& ds, const PartitionPlan& plan);

// IDX-format readers (big-endian; magic 0x00000803 for images, 0x00000801
// for labels). Pixel values are scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 int classes = 10);

// Splits the first `train_per_class` samples of each class into train, the
// rest into test. Order within each split follows the original dataset.
void split_per_class(const Dataset& ds, int train_per_class, Dataset* train,
                     Dataset* test);

}  // namespace vertfl
