#include "vertfl/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vertfl {

namespace {

const std::vector<GradientVector>& reference_set(const AttackContext& ctx) {
  if (ctx.omniscient && !ctx.all_honest.empty()) return ctx.all_honest;
  return ctx.compromised_honest;
}

}  // namespace

std::vector<GradientVector> gn_attack(const AttackContext& ctx,
                                      const std::vector<int>& attackers,
                                      std::size_t dim) {
  std::vector<GradientVector> out;
  out.reserve(attackers.size());
  for (int k : attackers) {
    RngStream rng(ctx.seed, Stream::GnNoise, static_cast<std::uint64_t>(k),
                  static_cast<std::uint64_t>(ctx.round));
    GradientVector g;
    g.owner = k;
    g.round = ctx.round;
    g.values = rng.normal_vector(dim);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GradientVector> mr_attack(const AttackContext& ctx,
                                      const std::vector<int>& attackers) {
  if (!ctx.global || !ctx.data || !ctx.shards)
    throw std::invalid_argument("mr_attack: missing global model or shards");
  const double gamma = static_cast<double>(ctx.n_selected);
  std::vector<GradientVector> out;
  out.reserve(attackers.size());
  for (int k : attackers) {
    const auto& shard = (*ctx.shards)[static_cast<std::size_t>(k)];
    // Poison objective: labels shifted by one class.
    Dataset flipped;
    flipped.dims = ctx.data->dims;
    flipped.classes = ctx.data->classes;
    flipped.features.reserve(shard.size() * ctx.data->dims);
    flipped.labels.reserve(shard.size());
    for (int idx : shard) {
      const double* r = ctx.data->row(static_cast<std::size_t>(idx));
      flipped.features.insert(flipped.features.end(), r, r + ctx.data->dims);
      flipped.labels.push_back((ctx.data->labels[idx] + 1) % ctx.data->classes);
    }
    std::vector<int> all(flipped.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);

    RngStream rng(ctx.seed, Stream::MrTrain, static_cast<std::uint64_t>(k),
                  static_cast<std::uint64_t>(ctx.round));
    GradientVector g =
        local_train(flipped, all, *ctx.global, ctx.train, rng, k, ctx.round);
    for (auto& v : g.values) v *= gamma;
    require_finite(g.values, "mr_attack gradient");
    out.push_back(std::move(g));
  }
  return out;
}

Vec agr_reference_mean(const std::vector<GradientVector>& refs) {
  if (refs.empty())
    throw std::invalid_argument("agr: empty reference gradient set");
  Vec mean(refs.front().values.size(), 0.0);
  for (const auto& g : refs)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += g.values[i];
  for (auto& v : mean) v /= static_cast<double>(refs.size());
  return mean;
}

double agr_max_pairwise_distance(const std::vector<GradientVector>& refs) {
  double best = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i)
    for (std::size_t j = i + 1; j < refs.size(); ++j)
      best = std::max(best, l2_dist(refs[i].values, refs[j].values));
  return best;
}

double agr_lambda(const std::vector<GradientVector>& refs, double tol,
                  int max_iter) {
  if (refs.size() < 2)
    throw std::invalid_argument("agr: need at least 2 reference gradients");
  const Vec g = agr_reference_mean(refs);
  const double gnorm = norm2(g);
  if (gnorm == 0.0) throw std::domain_error("agr: zero-norm reference mean");
  const double cap = agr_max_pairwise_distance(refs);

  // max_k || (g + lambda*dir) - g_k || as a function of lambda
  auto worst = [&](double lambda) {
    double m = 0.0;
    Vec crafted(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      crafted[i] = g[i] - lambda * g[i] / gnorm;
    for (const auto& r : refs) m = std::max(m, l2_dist(crafted, r.values));
    return m;
  };

  // Invariant: lo admissible, hi inadmissible (after doubling).
  int iters = 0;
  double lo = 0.0;
  double hi = 1.0;
  while (worst(hi) <= cap && iters < max_iter) {
    lo = hi;
    hi *= 2.0;
    ++iters;
  }
  if (iters >= max_iter) return lo;
  while (hi - lo > tol && iters < max_iter) {
    const double mid = 0.5 * (lo + hi);
    if (worst(mid) <= cap)
      lo = mid;
    else
      hi = mid;
    ++iters;
  }
  return lo;
}

std::vector<GradientVector> agr_attack(const AttackContext& ctx,
                                       const std::vector<int>& attackers) {
  const auto& refs = reference_set(ctx);
  const double lambda = agr_lambda(refs);
  const Vec g = agr_reference_mean(refs);
  const double gnorm = norm2(g);
  Vec crafted(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    crafted[i] = g[i] - lambda * g[i] / gnorm;

  std::vector<GradientVector> out;
  out.reserve(attackers.size());
  for (int k : attackers) {
    GradientVector gv;
    gv.owner = k;
    gv.round = ctx.round;
    gv.values = crafted;
    out.push_back(std::move(gv));
  }
  return out;
}

std::vector<GradientVector> alie_attack(const AttackContext& ctx,
                                        const std::vector<int>& attackers) {
  const auto& refs = ctx.compromised_honest;
  if (refs.empty())
    throw std::invalid_argument("alie: empty compromised gradient set");
  const std::size_t d = refs.front().values.size();
  Vec mu(d, 0.0);
  for (const auto& g : refs)
    for (std::size_t i = 0; i < d; ++i) mu[i] += g.values[i];
  for (auto& v : mu) v /= static_cast<double>(refs.size());

  Vec sigma(d, 0.0);
  for (const auto& g : refs)
    for (std::size_t i = 0; i < d; ++i) {
      const double dev = g.values[i] - mu[i];
      sigma[i] += dev * dev;
    }
  for (auto& v : sigma) v = std::sqrt(v / static_cast<double>(refs.size()));

  Vec crafted(d);
  for (std::size_t i = 0; i < d; ++i) crafted[i] = mu[i] + ctx.z_max * sigma[i];

  std::vector<GradientVector> out;
  out.reserve(attackers.size());
  for (int k : attackers) {
    GradientVector gv;
    gv.owner = k;
    gv.round = ctx.round;
    gv.values = crafted;
    out.push_back(std::move(gv));
  }
  return out;
}

std::vector<GradientVector> run_attack(AttackKind kind,
                                       const AttackContext& ctx,
                                       const std::vector<int>& attackers,
                                       std::size_t dim) {
  switch (kind) {
    case AttackKind::None:
      return {};
    case AttackKind::Gn:
      return gn_attack(ctx, attackers, dim);
    case AttackKind::Mr:
      return mr_attack(ctx, attackers);
    case AttackKind::Agr:
      return agr_attack(ctx, attackers);
    case AttackKind::Alie:
      return alie_attack(ctx, attackers);
  }
  throw std::logic_error("run_attack: unknown kind");
}

}  // namespace vertfl
