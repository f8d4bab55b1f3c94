#include "vertfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "vertfl/tensor.hpp"

namespace vertfl {

namespace {

// Class means at least unit distance apart. With dims >= classes the means
// are orthonormal directions (pairwise distance sqrt(2), uniform geometry);
// otherwise random sphere points are redrawn until separated.
std::vector<std::vector<double>> separated_means(int classes, int dims,
                                                 RngStream& rng) {
  std::vector<std::vector<double>> means;
  means.reserve(classes);
  if (dims >= classes) {
    // Gram-Schmidt on Gaussian draws.
    int guard = 0;
    while (static_cast<int>(means.size()) < classes) {
      if (++guard > 100000)
        throw std::runtime_error("make_synthetic: degenerate mean draws");
      std::vector<double> cand = rng.normal_vector(dims);
      for (const auto& m : means) {
        const double proj = dot(cand, m);
        for (int j = 0; j < dims; ++j) cand[j] -= proj * m[j];
      }
      const double n = norm2(cand);
      if (n < 1e-6) continue;
      for (auto& v : cand) v /= n;
      means.push_back(std::move(cand));
    }
    return means;
  }
  const double radius = 1.25;
  int guard = 0;
  while (static_cast<int>(means.size()) < classes) {
    if (++guard > 100000)
      throw std::runtime_error("make_synthetic: failed to separate class means");
    std::vector<double> cand = rng.normal_vector(dims);
    const double n = norm2(cand);
    if (n == 0.0) continue;
    for (auto& v : cand) v *= radius / n;
    bool ok = true;
    for (const auto& m : means) {
      if (l2_dist(m, cand) < 1.0) {
        ok = false;
        break;
      }
    }
    if (ok) means.push_back(std::move(cand));
  }
  return means;
}

}  // namespace

Dataset make_synthetic(int classes, int dims, int per_class,
                       std::uint64_t seed, double spread) {
  if (classes < 2) throw std::invalid_argument("make_synthetic: classes < 2");
  if (dims < 2) throw std::invalid_argument("make_synthetic: dims < 2");
  if (per_class < 1)
    throw std::invalid_argument("make_synthetic: per_class < 1");

  RngStream rng(seed, Stream::DataGen);
  const auto means = separated_means(classes, dims, rng);

  Dataset ds;
  ds.dims = dims;
  ds.classes = classes;
  ds.features.reserve(static_cast<std::size_t>(classes) * per_class * dims);
  ds.labels.reserve(static_cast<std::size_t>(classes) * per_class);
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      for (int j = 0; j < dims; ++j)
        ds.features.push_back(means[c][j] + rng.normal(0.0, spread));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

PartitionPlan dirichlet_partition(const Dataset& ds, int users, double beta,
                                  std::uint64_t seed) {
  if (users < 1) throw std::invalid_argument("dirichlet_partition: users < 1");
  if (beta <= 0.0)
    throw std::invalid_argument("dirichlet_partition: beta <= 0");
  if (ds.size() < static_cast<std::size_t>(users))
    throw std::invalid_argument(
        "dirichlet_partition: dataset smaller than user count");

  RngStream rng(seed, Stream::Partition);
  PartitionPlan plan;
  plan.beta = beta;
  plan.assignments.assign(users, {});

  std::vector<std::vector<int>> by_class(ds.classes);
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[ds.labels[i]].push_back(static_cast<int>(i));

  std::gamma_distribution<double> gamma(beta, 1.0);
  for (auto& idx : by_class) {
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    // proportions ~ Dir(beta * 1_users) via normalized gammas
    std::vector<double> prop(users);
    double total = 0.0;
    for (auto& p : prop) {
      p = gamma(rng.engine());
      total += p;
    }
    if (total <= 0.0) {
      std::fill(prop.begin(), prop.end(), 1.0);
      total = users;
    }
    // cumulative share -> contiguous slices of the shuffled class indices
    std::size_t start = 0;
    double acc = 0.0;
    for (int u = 0; u < users; ++u) {
      acc += prop[u] / total;
      std::size_t end =
          (u + 1 == users)
              ? idx.size()
              : std::min(idx.size(),
                         static_cast<std::size_t>(std::llround(acc * idx.size())));
      if (end < start) end = start;
      for (std::size_t k = start; k < end; ++k)
        plan.assignments[u].push_back(idx[k]);
      start = end;
    }
  }

  // Top up empty shards from the largest one.
  for (int u = 0; u < users; ++u) {
    if (!plan.assignments[u].empty()) continue;
    int donor = -1;
    std::size_t best = 1;  // donor must keep at least one sample
    for (int v = 0; v < users; ++v)
      if (plan.assignments[v].size() > best) {
        best = plan.assignments[v].size();
        donor = v;
      }
    if (donor < 0)
      throw std::runtime_error("dirichlet_partition: cannot top up empty shard");
    plan.assignments[u].push_back(plan.assignments[donor].back());
    plan.assignments[donor].pop_back();
  }
  for (auto& a : plan.assignments) std::sort(a.begin(), a.end());
  return plan;
}

double centroid_train_accuracy(const Dataset& ds) {
  std::vector<std::vector<double>> centroids(
      ds.classes, std::vector<double>(ds.dims, 0.0));
  std::vector<int> counts(ds.classes, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double* r = ds.row(i);
    auto& c = centroids[ds.labels[i]];
    for (int j = 0; j < ds.dims; ++j) c[j] += r[j];
    ++counts[ds.labels[i]];
  }
  for (int c = 0; c < ds.classes; ++c)
    if (counts[c] > 0)
      for (auto& v : centroids[c]) v /= counts[c];

  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.sample(i);
    int best = 0;
    double best_d = l2_dist(x, centroids[0]);
    for (int c = 1; c < ds.classes; ++c) {
      const double d = l2_dist(x, centroids[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == ds.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

double mean_label_entropy(const Dataset& ds, const PartitionPlan& plan) {
  double total = 0.0;
  for (const auto& shard : plan.assignments) {
    if (shard.empty()) continue;
    std::vector<double> counts(ds.classes, 0.0);
    for (int i : shard) counts[ds.labels[i]] += 1.0;
    double h = 0.0;
    for (double c : counts) {
      if (c <= 0.0) continue;
      const double p = c / shard.size();
      h -= p * std::log(p);
    }
    total += h;
  }
  return total / plan.assignments.size();
}

namespace {

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    std::string msg(what);
    msg += ": truncated IDX header";
    throw std::runtime_error(msg);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 int classes) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("load_idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("load_idx: cannot open " + labels_path);

  if (read_be32(img, "images") != 0x00000803u)
    throw std::runtime_error("load_idx: bad image magic in " + images_path);
  const std::uint32_t n = read_be32(img, "images");
  const std::uint32_t rows = read_be32(img, "images");
  const std::uint32_t cols = read_be32(img, "images");

  if (read_be32(lab, "labels") != 0x00000801u)
    throw std::runtime_error("load_idx: bad label magic in " + labels_path);
  const std::uint32_t nl = read_be32(lab, "labels");
  if (n != nl)
    throw std::runtime_error("load_idx: image/label count mismatch");

  Dataset ds;
  ds.dims = static_cast<int>(rows * cols);
  ds.classes = classes;
  ds.features.resize(static_cast<std::size_t>(n) * ds.dims);
  ds.labels.resize(n);

  std::vector<unsigned char> buf(ds.dims);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), ds.dims))
      throw std::runtime_error("load_idx: truncated image data");
    for (int j = 0; j < ds.dims; ++j)
      ds.features[static_cast<std::size_t>(i) * ds.dims + j] = buf[j] / 255.0;
    char lb;
    if (!lab.read(&lb, 1))
      throw std::runtime_error("load_idx: truncated label data");
    const int label = static_cast<unsigned char>(lb);
    if (label >= classes)
      throw std::runtime_error("load_idx: label exceeds class count");
    ds.labels[i] = label;
  }
  return ds;
}

void split_per_class(const Dataset& ds, int train_per_class, Dataset* train,
                     Dataset* test) {
  train->dims = test->dims = ds.dims;
  train->classes = test->classes = ds.classes;
  train->features.clear();
  train->labels.clear();
  test->features.clear();
  test->labels.clear();
  std::vector<int> seen(ds.classes, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Dataset* dst = (seen[ds.labels[i]]++ < train_per_class) ? train : test;
    const double* r = ds.row(i);
    dst->features.insert(dst->features.end(), r, r + ds.dims);
    dst->labels.push_back(ds.labels[i]);
  }
}

}  // namespace vertfl
