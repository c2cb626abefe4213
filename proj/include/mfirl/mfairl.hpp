#pragma once
// Adversarial IRL machinery for mean-field games: the discriminator built on
// a reward network f, per-timestep adaptive samplers trained by policy
// gradient, the unconditional empirical mean field, and an exact (dynamics
// aware, test-only) sampler trainer. The context-aware variant reuses all of
// this with context features switched on; with a single context the feature
// block is empty and the two coincide.

#include <optional>
#include <vector>

#include "mfirl/mfg.hpp"
#include "mfirl/mlp.hpp"
#include "mfirl/solver.hpp"

namespace mfirl::airl {

// Reward network f(s, a, mu[, m]) with a scalar head. `with_context` feeds a
// one-hot context block (empty anyway when the codec has < 2 contexts, so a
// context-aware model on a single-context problem degenerates to this
// baseline exactly).
struct Discriminator {
  nn::FeatureCodec codec;
  bool with_context = false;
  nn::Mlp f;

  Discriminator() = default;
  Discriminator(const nn::FeatureCodec& codec_, bool with_context_, Rng& rng,
                std::vector<int> hidden = {64, 64});

  int input_dim() const;
  void encode_input(int s, int a, const Vec& mu, std::optional<int> m, Vec& out) const;
  double f_value(int s, int a, const Vec& mu, std::optional<int> m) const;
};

// D = exp(f) / (exp(f) + pi) = sigmoid(f - log pi), computed in log space.
// pi_prob = 0 with finite f gives exactly 1 (limit case).
double discriminator_value(double f_value, double pi_prob);

// Unconditional empirical mean field (average of per-trajectory indicator
// vectors), one slice per timestep. Throws on an empty set.
MeanFieldFlow empirical_mean_field(const std::vector<Trajectory>& trajectories, int num_states);

// Accumulates d(objective)/d(f parameters) into `grad` for the GAIL-style
// discriminator objective
//   (1/|E|) sum_E sum_{t<T} log D  +  (1/|B|) sum_B sum_{t<T} log(1 - D),
// where D compares f(s,a,mu_hat_t[,m]) against sampler_pi. Returns the
// objective value. `grad` may be null (evaluation only).
double discriminator_objective_grad(Discriminator& d, const std::vector<Trajectory>& expert_batch,
                                    const std::vector<Trajectory>& sampler_batch,
                                    const MeanFieldFlow& mu_hat, std::optional<int> m,
                                    const PolicyFlow& sampler_pi, Vec* grad);

// One ascent step on the objective above (Adam on its negation). Returns the
// pre-step objective; a non-finite objective or gradient skips the step.
double discriminator_update(Discriminator& d, const std::vector<Trajectory>& expert_batch,
                            const std::vector<Trajectory>& sampler_batch,
                            const MeanFieldFlow& mu_hat, std::optional<int> m,
                            const PolicyFlow& sampler_pi, nn::AdamState& opt);

// One softmax policy network per timestep t = 0..T-1 over encode(state
// [, context]); the slice at t = T is uniform (its reward is identically
// zero, so the expert's slice there is uniform too). A flow is bound to the
// context value it serves; that index is fed as an input feature when
// `with_context` and the codec has >= 2 contexts.
struct SamplerFlow {
  nn::FeatureCodec codec;
  bool with_context = false;
  std::optional<int> context;
  int horizon = 0;
  std::vector<nn::Mlp> nets;

  SamplerFlow() = default;
  SamplerFlow(const nn::FeatureCodec& codec_, int horizon_, bool with_context_,
              std::optional<int> context_, Rng& rng, std::vector<int> hidden = {64, 64});

  // Tabulates every network into an explicit policy (T+1 slices, last
  // uniform).
  PolicyFlow to_policy_flow() const;
};

// One likelihood-ratio policy-gradient step on the entropy-augmented return
//   E[ sum_{t<T} f(s_t, a_t, mu_hat_t[, m]) - log pi_t(a_t | s_t) ]
// with a per-timestep batch-mean baseline on the reward-to-go. `rollouts`
// must have been sampled from `flow` itself under mu_hat (mean-field
// override); `opts` holds one Adam state per timestep network. Returns the
// mean entropy-augmented return; non-finite values skip the step.
double sampler_update(SamplerFlow& flow, const Discriminator& d, const MeanFieldFlow& mu_hat,
                      std::optional<int> m, const std::vector<Trajectory>& rollouts,
                      std::vector<nn::AdamState>& opts);

// Exact soft-optimal sampler against f under an injected mean-field flow
// (backward induction on the true dynamics. Test/validation only: training
// never touches env.transition).
PolicyFlow exact_sampler(const TabularEnv& env, const Discriminator& d,
                         const MeanFieldFlow& mu_hat, std::optional<int> m);

struct TrainConfig {
  int iterations = 2000;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double lr_omega = 1e-4;
  double lr_theta = 1e-4;
  std::vector<int> hidden = {64, 64};
  // Real wall-clock values in the log's wall_ms column (off by default so
  // logs stay byte-reproducible from config + seed).
  bool timing = false;
};

// Everything the baseline loop mutates: one context-blind discriminator and
// sampler, their optimizers, and the training RNG streams. The empirical
// mean field is estimated once from the full demonstration set, so it is not
// state.
struct AirlState {
  nn::FeatureCodec codec;
  Discriminator d;
  SamplerFlow sampler;
  nn::AdamState opt_omega;
  std::vector<nn::AdamState> opt_theta;  // one per timestep
  Rng rng_expert{0}, rng_rollout{0};
  int iteration = 0;

  AirlState(const TabularEnv& env, const TrainConfig& config);
};

// Per-iteration rows `iter,disc_objective,sampler_return,wall_ms`.
struct StepLog {
  std::string csv_rows;
  int skipped_iterations = 0;  // iterations with a non-finite objective/return
};

// Advances `st` by `count` iterations in place. Per iteration: an expert
// batch drawn with replacement, sampler rollouts under the frozen empirical
// mean field, one discriminator ascent step, one sampler policy-gradient
// step.
StepLog train_steps(const TabularEnv& env, const solver::DemonstrationSet& demos,
                    const TrainConfig& config, AirlState& st, int count);

struct TrainResult {
  AirlState state;
  std::string csv;  // config-echo header + per-iteration rows
  int skipped_iterations = 0;
};

TrainResult train(const TabularEnv& env, const solver::DemonstrationSet& demos,
                  const TrainConfig& config);

}  // namespace mfirl::airl
