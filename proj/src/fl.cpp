#include "vertfl/fl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace vertfl {

bool attack_draw(std::uint64_t seed, int user, int round, double p) {
  RngStream rng(seed, Stream::AttackMask, static_cast<std::uint64_t>(user),
                static_cast<std::uint64_t>(round));
  return rng.bernoulli(p);
}

std::set<int> pick_compromised(std::uint64_t seed, int users, double pr) {
  const int n_comp = static_cast<int>(std::lround(pr * users));
  std::vector<int> ids(users);
  std::iota(ids.begin(), ids.end(), 0);
  RngStream rng(seed, Stream::Compromised);
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  return std::set<int>(ids.begin(), ids.begin() + n_comp);
}

std::vector<int> select_users(std::uint64_t seed, int users, int n,
                              int round) {
  std::vector<int> ids(users);
  std::iota(ids.begin(), ids.end(), 0);
  RngStream rng(seed, Stream::Select, static_cast<std::uint64_t>(round));
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  ids.resize(n);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void build_datasets(const ExperimentConfig& cfg, Dataset* train,
                    Dataset* test) {
  if (cfg.source == DataSource::Idx) {
    *train = load_idx(cfg.idx_images, cfg.idx_labels, cfg.classes);
    if (!cfg.idx_test_images.empty() && !cfg.idx_test_labels.empty())
      *test = load_idx(cfg.idx_test_images, cfg.idx_test_labels, cfg.classes);
    else
      *test = *train;
    return;
  }
  const Dataset full =
      make_synthetic(cfg.classes, cfg.dims, cfg.per_class + cfg.test_per_class,
                     cfg.seed, cfg.spread);
  split_per_class(full, cfg.per_class, train, test);
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

struct SelectionStats {
  double precision = 1.0;
  double recall = 1.0;
};

SelectionStats selection_stats(const std::vector<int>& chosen,
                               const std::vector<int>& selected,
                               const std::set<int>& compromised) {
  SelectionStats st;
  if (chosen.empty()) return st;
  int honest_chosen = 0;
  for (int k : chosen)
    if (!compromised.count(k)) ++honest_chosen;
  st.precision =
      static_cast<double>(honest_chosen) / static_cast<double>(chosen.size());
  int honest_selected = 0;
  for (int k : selected)
    if (!compromised.count(k)) ++honest_selected;
  st.recall = honest_selected == 0
                  ? 1.0
                  : static_cast<double>(honest_chosen) /
                        static_cast<double>(honest_selected);
  return st;
}

// Mean rho over the selected users inside/outside the compromised set.
void rho_means(const std::map<int, double>& scores,
               const std::set<int>& compromised, double* honest,
               double* malicious) {
  double hs = 0.0, ms = 0.0;
  int hn = 0, mn = 0;
  for (const auto& [user, r] : scores) {
    if (compromised.count(user)) {
      ms += r;
      ++mn;
    } else {
      hs += r;
      ++hn;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  *honest = hn ? hs / hn : nan;
  *malicious = mn ? ms / mn : nan;
}

GradientVector baseline_aggregate(const ExperimentConfig& cfg,
                                  const std::vector<GradientVector>& grads,
                                  int true_compromised_selected) {
  const int n = static_cast<int>(grads.size());
  switch (cfg.defense) {
    case DefenseKind::FedAvg:
      return fedavg(grads);
    case DefenseKind::Krum: {
      // The standalone baseline is given the true attacker count.
      const int f = std::clamp(true_compromised_selected, 0, std::max(0, n - 3));
      return aggregate(AggregatorKind::Krum, grads, f);
    }
    case DefenseKind::MultiKrum: {
      const int f = std::clamp(true_compromised_selected, 0, std::max(0, n - 3));
      const int m_sel = std::max(1, n - f - 2);
      return aggregate(AggregatorKind::MultiKrum, grads, f, m_sel);
    }
    case DefenseKind::Median:
      return median(grads);
    case DefenseKind::TrimmedMean: {
      const int trim =
          std::clamp(true_compromised_selected, 0, std::max(0, (n - 1) / 2));
      return aggregate(AggregatorKind::TrimmedMean, grads, 0, 0, trim);
    }
    case DefenseKind::Vert:
      return fedavg(grads);  // warm-up rounds
  }
  throw std::logic_error("baseline_aggregate: unknown defense");
}

}  // namespace

std::vector<RoundReport> run(const ExperimentConfig& cfg) {
  validate(cfg);

  Dataset train, test;
  build_datasets(cfg, &train, &test);
  const PartitionPlan plan =
      dirichlet_partition(train, cfg.users, cfg.beta, cfg.seed);
  const std::set<int> compromised =
      pick_compromised(cfg.seed, cfg.users, cfg.pr);

  RngStream init_rng(cfg.seed, Stream::ModelInit);
  ModelState w = ModelState::from_mlp(
      make_task_model(train.dims, cfg.hidden, cfg.classes, init_rng));
  const int d = static_cast<int>(w.dim());

  const bool vert_on = cfg.defense == DefenseKind::Vert;
  VertConfig vcfg;
  vcfg.m = cfg.m;
  vcfg.kappa = cfg.kappa;
  vcfg.epochs = cfg.vert_epochs;
  vcfg.s = cfg.s;
  vcfg.output_activation = cfg.output_activation;
  vcfg.successive = cfg.successive;
  vcfg.lr = cfg.lr_predictor;

  Projector proj;
  HistoryStore store(cfg.m);
  std::map<int, UserPredictorState> states;
  if (vert_on) {
    RngStream proj_rng(cfg.seed, Stream::ProjectorInit);
    proj = Projector::gaussian(cfg.s, d, proj_rng, Activation::None);
  }

  const TrainOptions local_opt{cfg.local_epochs, cfg.batch, cfg.lr_local};

  std::vector<RoundReport> reports;
  reports.reserve(cfg.rounds);

  for (int t = 1; t <= cfg.rounds; ++t) {
    const auto round_start = Clock::now();
    RoundReport rep;
    rep.t = t;
    rep.selected = select_users(cfg.seed, cfg.users, cfg.selected, t);

    // Local training: every selected user computes the gradient it would
    // submit if honest (attacks may overwrite it below).
    auto local_start = Clock::now();
    std::vector<GradientVector> submitted(rep.selected.size());
    try {
      parallel_for(rep.selected.size(), cfg.workers, [&](std::size_t i) {
        const int k = rep.selected[i];
        RngStream rng(cfg.seed, Stream::LocalTrain,
                      static_cast<std::uint64_t>(k),
                      static_cast<std::uint64_t>(t));
        submitted[i] =
            local_train(train, plan.assignments[k], w, local_opt, rng, k, t);
      });
    } catch (const std::exception& e) {
      throw std::runtime_error("round " + std::to_string(t) +
                               ": local training failed: " + e.what());
    }
    rep.times.local_train_ms = ms_since(local_start);

    int comp_selected = 0;
    for (int k : rep.selected)
      if (compromised.count(k)) ++comp_selected;

    if (cfg.attack != AttackKind::None && t >= cfg.attack_start &&
        comp_selected > 0) {
      std::vector<int> attackers;
      for (int k : rep.selected)
        if (compromised.count(k) &&
            attack_draw(cfg.seed, k, t, cfg.attack_probability))
          attackers.push_back(k);
      if (!attackers.empty()) {
        AttackContext ctx;
        for (std::size_t i = 0; i < rep.selected.size(); ++i) {
          if (compromised.count(rep.selected[i]))
            ctx.compromised_honest.push_back(submitted[i]);
          else
            ctx.all_honest.push_back(submitted[i]);
        }
        ctx.omniscient = cfg.omniscient;
        ctx.global = &w;
        ctx.data = &train;
        ctx.shards = &plan.assignments;
        ctx.train = local_opt;
        ctx.n_selected = static_cast<int>(rep.selected.size());
        ctx.z_max = cfg.z_max;
        ctx.seed = cfg.seed;
        ctx.round = t;
        std::vector<GradientVector> malicious;
        try {
          malicious = run_attack(cfg.attack, ctx, attackers, d);
        } catch (const std::exception& e) {
          throw std::runtime_error("round " + std::to_string(t) +
                                   ": attack failed: " + e.what());
        }
        for (const auto& mg : malicious)
          for (std::size_t i = 0; i < rep.selected.size(); ++i)
            if (rep.selected[i] == mg.owner) {
              submitted[i] = mg;
              break;
            }
      }
    }

    auto defense_start = Clock::now();
    GradientVector agg;
    try {
      if (vert_on && t > cfg.warmup) {
        VertRoundResult vr = vert_round(t, submitted, store, states, proj,
                                        vcfg, cfg.seed, cfg.workers);
        rep.vert_active = true;
        rep.chosen = vr.chosen;
        rep.rho = std::move(vr.scores);
        agg = std::move(vr.aggregated);
      } else {
        agg = baseline_aggregate(cfg, submitted, comp_selected);
        rep.chosen = rep.selected;
        if (vert_on)
          store.append_round(t, submitted, agg.values, {});
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("round " + std::to_string(t) +
                               ": aggregation failed: " + e.what());
    }
    rep.times.defense_ms = ms_since(defense_start);

    w = apply_global(w, agg, cfg.lr_global);

    auto eval_start = Clock::now();
    rep.accuracy = evaluate_accuracy(w, test);
    rep.times.eval_ms = ms_since(eval_start);

    const SelectionStats st =
        selection_stats(rep.chosen, rep.selected, compromised);
    rep.precision = st.precision;
    rep.recall = st.recall;
    rho_means(rep.rho, compromised, &rep.mean_rho_honest,
              &rep.mean_rho_malicious);
    rep.times.round_ms = ms_since(round_start);
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace vertfl
