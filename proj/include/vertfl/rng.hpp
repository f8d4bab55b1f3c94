#pragma once

#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace vertfl {

// Purpose tags for deriving independent RNG streams from one master seed.
// Streams are keyed by (seed, purpose, a, b) so per-user/per-round draws do
// not depend on scheduling or worker count.
enum class Stream : std::uint64_t {
  DataGen = 1,
  Partition,
  Compromised,
  ModelInit,
  Select,
  LocalTrain,
  AttackMask,
  GnNoise,
  MrTrain,
  PredictorInit,
  ProjectorInit,
  Bench,
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

inline std::uint64_t derive_seed(std::uint64_t seed, Stream purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = detail::splitmix64(seed);
  h = detail::splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = detail::splitmix64(h ^ a);
  h = detail::splitmix64(h ^ b);
  return h;
}

// A seedable engine wrapper. One instance per (purpose, user, round) keeps
// results independent of evaluation order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}
  RngStream(std::uint64_t seed, Stream purpose, std::uint64_t a = 0,
            std::uint64_t b = 0)
      : eng_(derive_seed(seed, purpose, a, b)) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(eng_);
  }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng_);
  }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(eng_); }

  std::mt19937_64& engine() { return eng_; }

  std::vector<double> normal_vector(std::size_t n, double mean = 0.0,
                                    double stddev = 1.0) {
    std::normal_distribution<double> dist(mean, stddev);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(eng_);
    return out;
  }

 private:
  std::mt19937_64 eng_;
};

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index writes
// only its own outputs, so results are identical for any worker count.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  const std::size_t nthreads =
      std::min<std::size_t>(std::max(workers, 1), n);
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t w = 0; w < nthreads; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < n; i += nthreads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace vertfl
