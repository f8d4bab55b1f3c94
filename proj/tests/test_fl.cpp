#include <cmath>

#include <doctest.h>

#include "vertfl/fl.hpp"

using namespace vertfl;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.users = 8;
  cfg.selected = 6;
  cfg.pr = 0.0;
  cfg.attack = AttackKind::None;
  cfg.defense = DefenseKind::Vert;
  cfg.kappa = 4;
  cfg.m = 5;
  cfg.s = 8;
  cfg.classes = 3;
  cfg.dims = 8;
  cfg.per_class = 30;
  cfg.test_per_class = 10;
  cfg.hidden = 6;
  cfg.rounds = 10;
  cfg.vert_epochs = 3;
  return cfg;
}

bool reports_identical(const std::vector<RoundReport>& a,
                       const std::vector<RoundReport>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].t != b[i].t) return false;
    if (a[i].accuracy != b[i].accuracy) return false;
    if (a[i].precision != b[i].precision) return false;
    if (a[i].recall != b[i].recall) return false;
    if (a[i].selected != b[i].selected) return false;
    if (a[i].chosen != b[i].chosen) return false;
    if (a[i].rho != b[i].rho) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("local_train: epochs=0 yields the zero gradient") {
  const Dataset ds = make_synthetic(3, 6, 20, 1);
  std::vector<int> shard = {0, 1, 2, 3, 4};
  RngStream init(1, Stream::ModelInit);
  const ModelState w =
      ModelState::from_mlp(make_task_model(ds.dims, 5, ds.classes, init));
  RngStream rng(2, Stream::LocalTrain);
  const GradientVector g =
      local_train(ds, shard, w, TrainOptions{0, 10, 0.1}, rng);
  for (double v : g.values) CHECK(v == 0.0);
}

TEST_CASE("local_train: deterministic given identical shard and stream") {
  const Dataset ds = make_synthetic(3, 6, 20, 1);
  std::vector<int> shard = {0, 5, 10, 15, 20, 25};
  RngStream init(1, Stream::ModelInit);
  const ModelState w =
      ModelState::from_mlp(make_task_model(ds.dims, 5, ds.classes, init));
  RngStream r1(9, Stream::LocalTrain, 3, 7);
  RngStream r2(9, Stream::LocalTrain, 3, 7);
  const GradientVector g1 = local_train(ds, shard, w, TrainOptions{2, 4, 0.1}, r1);
  const GradientVector g2 = local_train(ds, shard, w, TrainOptions{2, 4, 0.1}, r2);
  CHECK(g1.values == g2.values);
  // The global state is untouched by training.
  RngStream init2(1, Stream::ModelInit);
  const ModelState w2 =
      ModelState::from_mlp(make_task_model(ds.dims, 5, ds.classes, init2));
  CHECK(w.params == w2.params);
}

TEST_CASE("sgd_train: loss decreases on a separable two-point shard") {
  Dataset ds;
  ds.dims = 2;
  ds.classes = 2;
  ds.features = {1.0, 0.0, -1.0, 0.0};
  ds.labels = {0, 1};
  RngStream init(3, Stream::ModelInit);
  Mlp model = make_task_model(2, 0, 2, init);
  RngStream rng(4, Stream::LocalTrain);
  const auto losses =
      sgd_train(model, ds, {0, 1}, TrainOptions{50, 2, 0.5}, rng);
  REQUIRE(losses.size() == 50);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("apply_global: eta scaling and exact recovery") {
  ModelState w;
  w.params = {1.0, -2.0};
  w.shapes = {{2, 1, Activation::None}};
  GradientVector g;
  g.values = {2.0, 0.5};
  CHECK(apply_global(w, g, 0.0).params == w.params);
  const ModelState up = apply_global(w, g, 1.0);
  CHECK(up.params == Vec{3.0, -1.5});
  GradientVector neg = g;
  for (auto& v : neg.values) v = -v;
  const ModelState back = apply_global(up, neg, 1.0);
  CHECK(std::fabs(back.params[0] - w.params[0]) <= 1e-12);
  CHECK(std::fabs(back.params[1] - w.params[1]) <= 1e-12);
}

TEST_CASE("model state round-trips through the mlp exactly") {
  RngStream rng(6);
  const Mlp m =
      Mlp::random({6, 5, 3}, {Activation::Relu, Activation::None}, rng);
  const ModelState s = ModelState::from_mlp(m);
  CHECK(s.dim() == m.param_count());
  const Mlp rebuilt = s.to_mlp();
  CHECK(rebuilt.params_flat() == m.params_flat());
  CHECK(ModelState::from_mlp(rebuilt).params == s.params);
}

TEST_CASE("single honest gradient with eta=1 replaces the global model") {
  const Dataset ds = make_synthetic(3, 6, 20, 7);
  std::vector<int> shard = {0, 1, 2, 6, 7, 8};
  RngStream init(7, Stream::ModelInit);
  ModelState w =
      ModelState::from_mlp(make_task_model(ds.dims, 4, ds.classes, init));
  RngStream rng(8, Stream::LocalTrain);
  const GradientVector g =
      local_train(ds, shard, w, TrainOptions{1, 3, 0.2}, rng);
  const ModelState next = apply_global(w, fedavg({g}), 1.0);
  // w + (w_k - w) == w_k, bit-exact is too strict for float sums; 1e-12 is
  // the contract.
  Mlp local = w.to_mlp();
  RngStream rng2(8, Stream::LocalTrain);
  sgd_train(local, ds, shard, TrainOptions{1, 3, 0.2}, rng2);
  const Vec expect = local.params_flat();
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(std::fabs(next.params[i] - expect[i]) <= 1e-12);
}

TEST_CASE("run: T=1 emits exactly one report") {
  ExperimentConfig cfg = tiny_config();
  cfg.rounds = 1;
  cfg.warmup = 0;
  const auto reports = run(cfg);
  CHECK(reports.size() == 1);
}

TEST_CASE("run: identical config and seed reproduce bit-exact reports") {
  const ExperimentConfig cfg = tiny_config();
  const auto a = run(cfg);
  const auto b = run(cfg);
  CHECK(reports_identical(a, b));
}

TEST_CASE("run: worker count never changes results") {
  ExperimentConfig cfg = tiny_config();
  cfg.workers = 1;
  const auto a = run(cfg);
  cfg.workers = 4;
  const auto b = run(cfg);
  CHECK(reports_identical(a, b));
}

TEST_CASE("run: C_opt is a kappa-subset of C_t on vert rounds") {
  ExperimentConfig cfg = tiny_config();
  cfg.pr = 0.5;
  cfg.attack = AttackKind::Gn;
  const auto reports = run(cfg);
  for (const auto& r : reports) {
    if (!r.vert_active) continue;
    CHECK(r.chosen.size() == static_cast<std::size_t>(cfg.kappa));
    for (int k : r.chosen)
      CHECK(std::find(r.selected.begin(), r.selected.end(), k) !=
            r.selected.end());
  }
}

TEST_CASE("run: with no attackers, vert tracks plain fedavg") {
  ExperimentConfig cfg = tiny_config();
  cfg.rounds = 25;
  cfg.per_class = 60;
  const auto vert_reports = run(cfg);
  cfg.defense = DefenseKind::FedAvg;
  const auto fedavg_reports = run(cfg);
  const double acc_vert = vert_reports.back().accuracy;
  const double acc_avg = fedavg_reports.back().accuracy;
  CHECK(std::fabs(acc_vert - acc_avg) <= 0.02 + 1e-12);
}

TEST_CASE("run: undefended fedavg under full GN stays near random guess") {
  ExperimentConfig cfg = tiny_config();
  cfg.pr = 1.0;
  cfg.attack = AttackKind::Gn;
  cfg.attack_start = 1;
  cfg.attack_probability = 1.0;
  cfg.defense = DefenseKind::FedAvg;
  cfg.rounds = 12;
  const auto reports = run(cfg);
  const double guess = 1.0 / cfg.classes;
  for (const auto& r : reports) CHECK(std::fabs(r.accuracy - guess) <= 0.05);
}

TEST_CASE("compromised set size tracks pr") {
  CHECK(pick_compromised(1, 20, 0.8).size() == 16);
  CHECK(pick_compromised(1, 100, 0.9).size() == 90);
  CHECK(pick_compromised(1, 10, 0.0).empty());
  const auto a = pick_compromised(2, 50, 0.5);
  const auto b = pick_compromised(2, 50, 0.5);
  CHECK(a == b);
}

TEST_CASE("per-round selection draws |C_t| distinct users") {
  const auto sel = select_users(3, 20, 16, 7);
  CHECK(sel.size() == 16);
  CHECK(std::is_sorted(sel.begin(), sel.end()));
  CHECK(std::adjacent_find(sel.begin(), sel.end()) == sel.end());
  CHECK(select_users(3, 20, 16, 7) == sel);
  CHECK(select_users(3, 20, 16, 8) != sel);
}
