#pragma once

#include <map>
#include <vector>

#include "vertfl/aggregators.hpp"
#include "vertfl/fl_types.hpp"

namespace vertfl {

// ---------------------------------------------------------------------------
// History of user and global gradients over a sliding window of m rounds
// ---------------------------------------------------------------------------

class HistoryStore {
 public:
  explicit HistoryStore(int window_m);

  int window() const { return m_; }
  int latest_round() const { return latest_; }

  // Appends round t (strictly increasing) and prunes rounds older than the
  // window. `flagged` lists users whose submission was judged malicious.
  void append_round(int t, const std::vector<GradientVector>& submitted,
                    const Vec& global_grad, const std::vector<int>& flagged);

  bool has_round(int t) const;
  const Vec& global_grad(int t) const;
  bool user_present(int user, int t) const;
  bool user_flagged(int user, int t) const;

  // The user's stored gradient for round t, unless the user was absent that
  // round or flagged malicious, in which case that round's global gradient.
  // Throws std::out_of_range when t is outside the stored window.
  const Vec& resolve(int user, int t) const;

 private:
  struct Entry {
    Vec grad;
    bool flagged = false;
  };
  struct RoundSlot {
    std::map<int, Entry> users;
    Vec global;
  };
  int m_;
  int latest_ = 0;
  std::map<int, RoundSlot> rounds_;
};

// ---------------------------------------------------------------------------
// Frozen low-dimensional projector
// ---------------------------------------------------------------------------

struct Projector {
  int s = 0;
  int d = 0;
  Vec weights;  // s x d, row-major; never mutated after construction
  Activation activation = Activation::None;

  // N(0, 1/d) entries from the seeded stream. Enforces s <= d/4.
  static Projector gaussian(int s, int d, RngStream& rng,
                            Activation act = Activation::None);

  Vec forward(const Vec& g) const;
  // dL/dg given dL/doutput (chains through the activation).
  Vec backward_input(const Vec& g, const Vec& dout) const;
};

// ---------------------------------------------------------------------------
// Per-user predictor state
// ---------------------------------------------------------------------------

struct UserPredictorState {
  Vec coeff_user;    // A, elementwise weight on the user's own history
  Vec coeff_global;  // B, elementwise weight on the global history
  Mlp predictor;     // s -> s -> s -> s
  OptimizerState opt;
  int trained_rounds = 0;

  static UserPredictorState init(int d, int s, Activation output_activation,
                                 double lr, RngStream& rng);

  Vec params_flat() const;            // [A | B | predictor]
  void set_params_flat(const Vec& p);
};

// A training pair: inputs from round t_his, label from round t_his + 1.
// Pointers reference HistoryStore storage and stay valid for the round.
struct WindowPairRef {
  const Vec* user_grad = nullptr;
  const Vec* global_grad = nullptr;
  const Vec* next_user_grad = nullptr;
};

// Pairs with t_his in [t-m, t-2], substitution rules applied.
std::vector<WindowPairRef> build_window(const HistoryStore& store, int user,
                                        int t);

// Elementwise blend A .* g_user + B .* g_global.
Vec integrate(const Vec& coeff_user, const Vec& coeff_global,
              const Vec& g_user, const Vec& g_global);

// Windowed objective: sum over pairs of the epsilon-smoothed l2 norm of
// pred(proj(A.*g_u + B.*g)) - proj(g_next).
double window_loss(const UserPredictorState& state, const Projector& proj,
                   const std::vector<WindowPairRef>& pairs);

struct WindowGrads {
  Vec coeff_user;   // dPhi/dA
  Vec coeff_global; // dPhi/dB
  MlpGrads predictor;
  double loss = 0.0;
};

WindowGrads window_gradients(const UserPredictorState& state,
                             const Projector& proj,
                             const std::vector<WindowPairRef>& pairs);

struct TrainOutcome {
  bool trained = false;  // false when the window held no usable pairs
  double loss = 0.0;     // objective at the returned state
  int pairs = 0;
};

// `epochs` full-batch Adam passes over user `user`'s window for round t;
// gradients flow into the predictor weights and both coefficient vectors,
// the projector is untouched. epochs == 0 leaves the state unchanged and
// reports the current loss.
TrainOutcome train_predictor(UserPredictorState& state,
                             const HistoryStore& store, const Projector& proj,
                             int epochs, int user, int t);

// rho = cos(pred(proj(A.*g_prev_user + B.*g_prev_global)), proj(g_actual)),
// or -1 when either projected vector has zero norm.
double predict_and_score(const UserPredictorState& state,
                         const Projector& proj, const Vec& g_prev_user,
                         const Vec& g_prev_global, const Vec& g_actual);

// The kappa highest-scoring users; ties break toward the lower id. Returns
// ids in ascending order. Throws when kappa exceeds the score count.
std::vector<int> select_topk(const std::map<int, double>& scores, int kappa);

// ---------------------------------------------------------------------------
// Round driver
// ---------------------------------------------------------------------------

struct VertConfig {
  int m = 10;
  int kappa = 15;
  int epochs = 5;
  int s = 128;
  Activation output_activation = Activation::None;
  AggregatorKind successive = AggregatorKind::FedAvg;
  double lr = 0.001;
};

struct VertRoundResult {
  std::vector<int> chosen;  // C_opt, ascending
  GradientVector aggregated;
  std::map<int, double> scores;
};

// Scores every submitted gradient against its predictor, trains per-user
// states on the sliding window first, selects top-kappa, aggregates the
// chosen gradients with the successive aggregator, appends the round to the
// store, and flags the users left out of C_opt. States for unseen users are
// created lazily from (seed, user). Deterministic for any worker count.
VertRoundResult vert_round(int t, const std::vector<GradientVector>& submitted,
                           HistoryStore& store,
                           std::map<int, UserPredictorState>& states,
                           const Projector& proj, const VertConfig& cfg,
                           std::uint64_t seed, int workers = 1);

// ---------------------------------------------------------------------------
// Closed-form coefficients for the linear square (s == d) case
// ---------------------------------------------------------------------------

// A = ((W_pred W_proj)^{-1} W_proj g_next - B .* g_global) / g_user with all
// divisions elementwise. Requires an activation-free zero-bias predictor,
// s == d, an invertible W_pred W_proj, and no zero entries in g_user.
Vec closed_form_coeff_user(const UserPredictorState& state,
                           const Projector& proj, const Vec& g_user,
                           const Vec& g_global, const Vec& g_next);

// Symmetric solve for B given A.
Vec closed_form_coeff_global(const UserPredictorState& state,
                             const Projector& proj, const Vec& g_user,
                             const Vec& g_global, const Vec& g_next);

// Element counts of all VERT server-side state (coefficients, predictors,
// projector); used by the scaling benchmarks.
struct VertStateFootprint {
  std::size_t coeff_elements = 0;
  std::size_t predictor_elements = 0;
  std::size_t projector_elements = 0;
  std::size_t total() const {
    return coeff_elements + predictor_elements + projector_elements;
  }
};

VertStateFootprint vert_state_footprint(
    const std::map<int, UserPredictorState>& states, const Projector& proj);

}  // namespace vertfl
