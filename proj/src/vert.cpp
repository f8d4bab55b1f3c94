#include "vertfl/vert.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace vertfl {

namespace {
constexpr double kLossEps = 1e-12;  // smoothing under the sqrt of the l2 loss
}

// ---------------------------------------------------------------------------
// HistoryStore
// ---------------------------------------------------------------------------

HistoryStore::HistoryStore(int window_m) : m_(window_m) {
  if (window_m < 2)
    throw std::invalid_argument("HistoryStore: window must be >= 2");
}

void HistoryStore::append_round(int t,
                                const std::vector<GradientVector>& submitted,
                                const Vec& global_grad,
                                const std::vector<int>& flagged) {
  if (t <= latest_)
    throw std::invalid_argument("HistoryStore: rounds must be increasing");
  RoundSlot slot;
  slot.global = global_grad;
  for (const auto& g : submitted)
    slot.users[g.owner] = Entry{g.values, false};
  for (int k : flagged) {
    auto it = slot.users.find(k);
    if (it != slot.users.end()) it->second.flagged = true;
  }
  rounds_[t] = std::move(slot);
  latest_ = t;
  // keep rounds in [t - m + 1, t]
  for (auto it = rounds_.begin(); it != rounds_.end();) {
    if (it->first <= t - m_)
      it = rounds_.erase(it);
    else
      break;
  }
}

bool HistoryStore::has_round(int t) const { return rounds_.count(t) > 0; }

const Vec& HistoryStore::global_grad(int t) const {
  auto it = rounds_.find(t);
  if (it == rounds_.end()) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "HistoryStore: round %d outside window", t);
    throw std::out_of_range(buf);
  }
  return it->second.global;
}

bool HistoryStore::user_present(int user, int t) const {
  auto it = rounds_.find(t);
  return it != rounds_.end() && it->second.users.count(user) > 0;
}

bool HistoryStore::user_flagged(int user, int t) const {
  auto it = rounds_.find(t);
  if (it == rounds_.end()) return false;
  auto uit = it->second.users.find(user);
  return uit != it->second.users.end() && uit->second.flagged;
}

const Vec& HistoryStore::resolve(int user, int t) const {
  auto it = rounds_.find(t);
  if (it == rounds_.end()) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "HistoryStore: round %d outside window", t);
    throw std::out_of_range(buf);
  }
  auto uit = it->second.users.find(user);
  if (uit == it->second.users.end() || uit->second.flagged)
    return it->second.global;
  return uit->second.grad;
}

// ---------------------------------------------------------------------------
// Projector
// ---------------------------------------------------------------------------

Projector Projector::gaussian(int s, int d, RngStream& rng, Activation act) {
  if (s < 1 || d < 1) throw std::invalid_argument("Projector: bad dimensions");
  if (s > d / 4) {
    char buf[96];
    std::snprintf(buf, sizeof(buf),
                  "Projector: s=%d too large for d=%d (need s <= d/4)", s, d);
    throw std::invalid_argument(buf);
  }
  Projector p;
  p.s = s;
  p.d = d;
  p.activation = act;
  p.weights = rng.normal_vector(static_cast<std::size_t>(s) * d, 0.0,
                                1.0 / std::sqrt(static_cast<double>(d)));
  return p;
}

Vec Projector::forward(const Vec& g) const {
  if (static_cast<int>(g.size()) != d)
    throw std::invalid_argument("Projector::forward: dimension mismatch");
  Vec z(s);
  for (int i = 0; i < s; ++i) {
    const double* row = weights.data() + static_cast<std::size_t>(i) * d;
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += row[j] * g[j];
    z[i] = acc;
  }
  if (activation == Activation::Softmax) return softmax(z);
  return z;
}

Vec Projector::backward_input(const Vec& g, const Vec& dout) const {
  if (static_cast<int>(dout.size()) != s)
    throw std::invalid_argument("Projector::backward_input: bad dout length");
  Vec dz = dout;
  if (activation == Activation::Softmax) {
    const Vec y = forward(g);
    double inner = 0.0;
    for (int i = 0; i < s; ++i) inner += dout[i] * y[i];
    for (int i = 0; i < s; ++i) dz[i] = y[i] * (dout[i] - inner);
  }
  Vec dg(d, 0.0);
  for (int i = 0; i < s; ++i) {
    const double* row = weights.data() + static_cast<std::size_t>(i) * d;
    const double di = dz[i];
    for (int j = 0; j < d; ++j) dg[j] += row[j] * di;
  }
  return dg;
}

// ---------------------------------------------------------------------------
// UserPredictorState
// ---------------------------------------------------------------------------

UserPredictorState UserPredictorState::init(int d, int s,
                                            Activation output_activation,
                                            double lr, RngStream& rng) {
  UserPredictorState st;
  st.coeff_user.assign(d, 1.0);    // initial input equals the raw user gradient
  st.coeff_global.assign(d, 0.0);
  st.predictor = Mlp::random(
      {s, s, s, s},
      {Activation::Relu, Activation::Relu, output_activation}, rng);
  st.opt = OptimizerState::adam(lr);
  return st;
}

Vec UserPredictorState::params_flat() const {
  Vec flat;
  flat.reserve(coeff_user.size() + coeff_global.size() +
               predictor.param_count());
  flat.insert(flat.end(), coeff_user.begin(), coeff_user.end());
  flat.insert(flat.end(), coeff_global.begin(), coeff_global.end());
  const Vec p = predictor.params_flat();
  flat.insert(flat.end(), p.begin(), p.end());
  return flat;
}

void UserPredictorState::set_params_flat(const Vec& p) {
  const std::size_t d = coeff_user.size();
  if (p.size() != 2 * d + predictor.param_count())
    throw std::invalid_argument("UserPredictorState: bad flat length");
  std::copy(p.begin(), p.begin() + d, coeff_user.begin());
  std::copy(p.begin() + d, p.begin() + 2 * d, coeff_global.begin());
  predictor.set_params_flat(Vec(p.begin() + 2 * d, p.end()));
}

// ---------------------------------------------------------------------------
// Window construction and objective
// ---------------------------------------------------------------------------

std::vector<WindowPairRef> build_window(const HistoryStore& store, int user,
                                        int t) {
  std::vector<WindowPairRef> pairs;
  for (int t_his = t - store.window(); t_his <= t - 2; ++t_his) {
    if (!store.has_round(t_his) || !store.has_round(t_his + 1)) continue;
    WindowPairRef p;
    p.user_grad = &store.resolve(user, t_his);
    p.global_grad = &store.global_grad(t_his);
    p.next_user_grad = &store.resolve(user, t_his + 1);
    pairs.push_back(p);
  }
  return pairs;
}

Vec integrate(const Vec& coeff_user, const Vec& coeff_global, const Vec& g_user,
              const Vec& g_global) {
  const std::size_t d = coeff_user.size();
  if (coeff_global.size() != d || g_user.size() != d || g_global.size() != d)
    throw std::invalid_argument("integrate: length mismatch");
  Vec out(d);
  for (std::size_t i = 0; i < d; ++i)
    out[i] = coeff_user[i] * g_user[i] + coeff_global[i] * g_global[i];
  return out;
}

namespace {

double pair_residual_loss(const Vec& pred, const Vec& label, Vec* dpred) {
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - label[i];
    sq += r * r;
  }
  const double loss = std::sqrt(sq + kLossEps);
  if (dpred) {
    dpred->resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
      (*dpred)[i] = (pred[i] - label[i]) / loss;
  }
  return loss;
}

}  // namespace

double window_loss(const UserPredictorState& state, const Projector& proj,
                   const std::vector<WindowPairRef>& pairs) {
  double total = 0.0;
  for (const auto& p : pairs) {
    const Vec g_input =
        integrate(state.coeff_user, state.coeff_global, *p.user_grad,
                  *p.global_grad);
    const Vec pred = forward(state.predictor, proj.forward(g_input));
    const Vec label = proj.forward(*p.next_user_grad);
    total += pair_residual_loss(pred, label, nullptr);
  }
  return total;
}

WindowGrads window_gradients(const UserPredictorState& state,
                             const Projector& proj,
                             const std::vector<WindowPairRef>& pairs) {
  WindowGrads out;
  const std::size_t d = state.coeff_user.size();
  out.coeff_user.assign(d, 0.0);
  out.coeff_global.assign(d, 0.0);
  out.predictor = MlpGrads::zeros_like(state.predictor);

  for (const auto& p : pairs) {
    const Vec g_input =
        integrate(state.coeff_user, state.coeff_global, *p.user_grad,
                  *p.global_grad);
    const Vec p_in = proj.forward(g_input);
    const Vec pred = forward(state.predictor, p_in);
    const Vec label = proj.forward(*p.next_user_grad);

    Vec dpred;
    out.loss += pair_residual_loss(pred, label, &dpred);

    MlpGrads mg = backward(state.predictor, p_in, dpred);
    const Vec dg_input = proj.backward_input(g_input, mg.input);
    out.predictor.add_scaled(mg, 1.0);
    for (std::size_t i = 0; i < d; ++i) {
      out.coeff_user[i] += dg_input[i] * (*p.user_grad)[i];
      out.coeff_global[i] += dg_input[i] * (*p.global_grad)[i];
    }
  }
  return out;
}

TrainOutcome train_predictor(UserPredictorState& state,
                             const HistoryStore& store, const Projector& proj,
                             int epochs, int user, int t) {
  TrainOutcome out;
  const auto pairs = build_window(store, user, t);
  out.pairs = static_cast<int>(pairs.size());
  if (pairs.empty()) return out;  // caller falls back to warm-up scoring
  out.trained = true;
  if (epochs == 0) {
    out.loss = window_loss(state, proj, pairs);
    return out;
  }
  Vec flat = state.params_flat();
  for (int e = 0; e < epochs; ++e) {
    const WindowGrads wg = window_gradients(state, proj, pairs);
    Vec grad;
    grad.reserve(flat.size());
    grad.insert(grad.end(), wg.coeff_user.begin(), wg.coeff_user.end());
    grad.insert(grad.end(), wg.coeff_global.begin(), wg.coeff_global.end());
    const Vec pg = wg.predictor.flat();
    grad.insert(grad.end(), pg.begin(), pg.end());
    optimizer_step(state.opt, flat, grad);
    state.set_params_flat(flat);
  }
  ++state.trained_rounds;
  out.loss = window_loss(state, proj, pairs);
  return out;
}

// ---------------------------------------------------------------------------
// Scoring and selection
// ---------------------------------------------------------------------------

double predict_and_score(const UserPredictorState& state,
                         const Projector& proj, const Vec& g_prev_user,
                         const Vec& g_prev_global, const Vec& g_actual) {
  const Vec g_input =
      integrate(state.coeff_user, state.coeff_global, g_prev_user,
                g_prev_global);
  const Vec pred = forward(state.predictor, proj.forward(g_input));
  const Vec actual = proj.forward(g_actual);
  if (norm2(pred) == 0.0 || norm2(actual) == 0.0) return -1.0;
  return cosine(pred, actual);
}

std::vector<int> select_topk(const std::map<int, double>& scores, int kappa) {
  if (kappa < 0 || kappa > static_cast<int>(scores.size())) {
    char buf[96];
    std::snprintf(buf, sizeof(buf),
                  "select_topk: kappa=%d with %zu scores", kappa,
                  scores.size());
    throw std::invalid_argument(buf);
  }
  std::vector<std::pair<int, double>> items(scores.begin(), scores.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<int> chosen;
  chosen.reserve(kappa);
  for (int i = 0; i < kappa; ++i) chosen.push_back(items[i].first);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// ---------------------------------------------------------------------------
// Round driver
// ---------------------------------------------------------------------------

VertRoundResult vert_round(int t, const std::vector<GradientVector>& submitted,
                           HistoryStore& store,
                           std::map<int, UserPredictorState>& states,
                           const Projector& proj, const VertConfig& cfg,
                           std::uint64_t seed, int workers) {
  if (submitted.empty())
    throw std::invalid_argument("vert_round: no gradients");
  if (cfg.kappa > static_cast<int>(submitted.size()))
    throw std::invalid_argument("vert_round: kappa exceeds |C_t|");

  // Create missing states up front so the parallel section never mutates the
  // map structure. Init seeds depend only on (seed, user).
  for (const auto& g : submitted) {
    if (states.count(g.owner)) continue;
    RngStream rng(seed, Stream::PredictorInit,
                  static_cast<std::uint64_t>(g.owner));
    states.emplace(g.owner,
                   UserPredictorState::init(static_cast<int>(g.values.size()),
                                            cfg.s, cfg.output_activation,
                                            cfg.lr, rng));
  }

  std::vector<double> rho(submitted.size(), -1.0);
  parallel_for(submitted.size(), workers, [&](std::size_t i) {
    const GradientVector& g = submitted[i];
    UserPredictorState& st = states.at(g.owner);
    const TrainOutcome tr =
        train_predictor(st, store, proj, cfg.epochs, g.owner, t);
    if (tr.trained && store.has_round(t - 1)) {
      rho[i] = predict_and_score(st, proj, store.resolve(g.owner, t - 1),
                                 store.global_grad(t - 1), g.values);
    } else if (store.has_round(t - 1)) {
      // Not enough history to train yet; compare against the last global.
      const Vec& prev_global = store.global_grad(t - 1);
      rho[i] = (norm2(g.values) == 0.0 || norm2(prev_global) == 0.0)
                   ? -1.0
                   : cosine(g.values, prev_global);
    } else {
      rho[i] = 0.0;
    }
  });

  VertRoundResult res;
  for (std::size_t i = 0; i < submitted.size(); ++i)
    res.scores[submitted[i].owner] = rho[i];
  res.chosen = select_topk(res.scores, cfg.kappa);

  std::vector<GradientVector> picked;
  picked.reserve(res.chosen.size());
  for (const auto& g : submitted)
    if (std::binary_search(res.chosen.begin(), res.chosen.end(), g.owner))
      picked.push_back(g);

  const int f = std::max(0, (cfg.kappa - 1) / 2);
  const int m_sel = std::max(1, cfg.kappa / 2);
  const int trim = (cfg.kappa - 1) / 2;
  res.aggregated = aggregate(cfg.successive, picked, f, m_sel, trim);
  res.aggregated.round = t;

  std::vector<int> flagged;
  for (const auto& g : submitted)
    if (!std::binary_search(res.chosen.begin(), res.chosen.end(), g.owner))
      flagged.push_back(g.owner);
  store.append_round(t, submitted, res.aggregated.values, flagged);
  return res;
}

// ---------------------------------------------------------------------------
// Closed-form coefficients (linear square case)
// ---------------------------------------------------------------------------

namespace {

// Gauss-Jordan inverse with partial pivoting; n is small (s == d fixtures).
std::vector<double> invert_square(std::vector<double> a, int n) {
  std::vector<double> inv(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) inv[static_cast<std::size_t>(i) * n + i] = 1.0;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::fabs(a[static_cast<std::size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const double v = std::fabs(a[static_cast<std::size_t>(r) * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < 1e-12)
      throw std::domain_error("closed form: W_pred*W_proj is singular");
    if (pivot != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(a[static_cast<std::size_t>(pivot) * n + j],
                  a[static_cast<std::size_t>(col) * n + j]);
        std::swap(inv[static_cast<std::size_t>(pivot) * n + j],
                  inv[static_cast<std::size_t>(col) * n + j]);
      }
    }
    const double diag = a[static_cast<std::size_t>(col) * n + col];
    for (int j = 0; j < n; ++j) {
      a[static_cast<std::size_t>(col) * n + j] /= diag;
      inv[static_cast<std::size_t>(col) * n + j] /= diag;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a[static_cast<std::size_t>(r) * n + col];
      if (factor == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        a[static_cast<std::size_t>(r) * n + j] -=
            factor * a[static_cast<std::size_t>(col) * n + j];
        inv[static_cast<std::size_t>(r) * n + j] -=
            factor * inv[static_cast<std::size_t>(col) * n + j];
      }
    }
  }
  return inv;
}

// Collapses an activation-free zero-bias predictor to a single matrix.
std::vector<double> linear_predictor_matrix(const Mlp& predictor, int s) {
  std::vector<double> acc;  // running product, s x s
  for (const auto& layer : predictor.layers) {
    if (layer.activation != Activation::None)
      throw std::invalid_argument(
          "closed form: predictor must be activation-free");
    for (double b : layer.bias)
      if (b != 0.0)
        throw std::invalid_argument(
            "closed form: predictor must have zero biases");
    if (layer.in != s || layer.out != s)
      throw std::invalid_argument("closed form: predictor must be s x s");
    if (acc.empty()) {
      acc = layer.weights;
    } else {
      std::vector<double> next(static_cast<std::size_t>(s) * s, 0.0);
      for (int i = 0; i < s; ++i)
        for (int k = 0; k < s; ++k) {
          const double w = layer.weights[static_cast<std::size_t>(i) * s + k];
          if (w == 0.0) continue;
          for (int j = 0; j < s; ++j)
            next[static_cast<std::size_t>(i) * s + j] +=
                w * acc[static_cast<std::size_t>(k) * s + j];
        }
      acc = std::move(next);
    }
  }
  if (acc.empty())
    throw std::invalid_argument("closed form: empty predictor");
  return acc;
}

Vec closed_form_target(const UserPredictorState& state, const Projector& proj,
                       const Vec& g_next) {
  const int n = proj.d;
  if (proj.s != n)
    throw std::invalid_argument("closed form: requires s == d");
  if (proj.activation != Activation::None)
    throw std::invalid_argument("closed form: projector must be linear");
  const auto w_pred = linear_predictor_matrix(state.predictor, n);

  // W_pred * W_proj, then invert
  std::vector<double> prod(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double w = w_pred[static_cast<std::size_t>(i) * n + k];
      if (w == 0.0) continue;
      for (int j = 0; j < n; ++j)
        prod[static_cast<std::size_t>(i) * n + j] +=
            w * proj.weights[static_cast<std::size_t>(k) * n + j];
    }
  const auto inv = invert_square(prod, n);

  // inv * (W_proj * g_next)
  Vec proj_next(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = proj.weights.data() + static_cast<std::size_t>(i) * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += row[j] * g_next[j];
    proj_next[i] = acc;
  }
  Vec target(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = inv.data() + static_cast<std::size_t>(i) * n;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += row[j] * proj_next[j];
    target[i] = acc;
  }
  return target;
}

}  // namespace

Vec closed_form_coeff_user(const UserPredictorState& state,
                           const Projector& proj, const Vec& g_user,
                           const Vec& g_global, const Vec& g_next) {
  const Vec target = closed_form_target(state, proj, g_next);
  Vec a(target.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (g_user[i] == 0.0)
      throw std::domain_error("closed form: zero divisor in user gradient");
    a[i] = (target[i] - state.coeff_global[i] * g_global[i]) / g_user[i];
  }
  return a;
}

Vec closed_form_coeff_global(const UserPredictorState& state,
                             const Projector& proj, const Vec& g_user,
                             const Vec& g_global, const Vec& g_next) {
  const Vec target = closed_form_target(state, proj, g_next);
  Vec b(target.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (g_global[i] == 0.0)
      throw std::domain_error("closed form: zero divisor in global gradient");
    b[i] = (target[i] - state.coeff_user[i] * g_user[i]) / g_global[i];
  }
  return b;
}

VertStateFootprint vert_state_footprint(
    const std::map<int, UserPredictorState>& states, const Projector& proj) {
  VertStateFootprint fp;
  for (const auto& [user, st] : states) {
    (void)user;
    fp.coeff_elements += st.coeff_user.size() + st.coeff_global.size();
    fp.predictor_elements += st.predictor.param_count();
  }
  fp.projector_elements = proj.weights.size();
  return fp;
}

}  // namespace vertfl
