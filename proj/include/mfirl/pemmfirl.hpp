#pragma once
// Meta-IRL with latent contexts: an inference net q_psi(m|tau), the
// context-conditioned empirical mean field, the mutual-information gradient
// estimators, and the meta-training / meta-test loops. The trajectory energy
// model p_{omega,psi}(tau|m) these estimators differentiate lives in
// energy.hpp; samplers and the discriminator come from mfairl.hpp.

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfirl/mfairl.hpp"
#include "mfirl/mfg.hpp"
#include "mfirl/mlp.hpp"
#include "mfirl/rng.hpp"
#include "mfirl/solver.hpp"

namespace mfirl::pemmfirl {

// q_psi(m | tau): mean-pooled one-hot (state, action) features through a
// small net with a softmax head over the context set.
struct ContextInferenceModel {
  nn::FeatureCodec codec;
  nn::Mlp encoder;

  ContextInferenceModel() = default;
  ContextInferenceModel(const nn::FeatureCodec& codec, Rng& rng,
                        const std::vector<int>& hidden = {64, 64});
  int num_contexts() const { return encoder.out_dim(); }
  Vec infer(const Trajectory& tau) const;
  Vec infer(const Trajectory& tau, nn::Mlp::Trace& trace) const;
};

// Stable log-softmax of the final-layer logits recorded in a forward trace.
Vec log_probs_from_trace(const nn::Mlp& net, const nn::Mlp::Trace& trace);

struct DegenerateContext : std::runtime_error {
  DegenerateContext(int m, double total)
      : std::runtime_error("conditional mean field: context " + std::to_string(m) +
                           " has total responsibility " + std::to_string(total) +
                           " below 1e-12"),
        context(m) {}
  int context;
};

// The normalized estimator mu_hat_psi^t(s|m) built from one batch of
// demonstrations, with everything needed to differentiate through it: raw
// responsibilities resp[m][j] = q_psi(m|tau_j), their totals, and the encoder
// trace of every demo.
struct ConditionalMeanFieldEstimate {
  const std::vector<Trajectory>* demos = nullptr;
  int num_states = 0;
  std::vector<Vec> resp;                 // [context][demo]
  Vec total;                             // [context]
  std::vector<MeanFieldFlow> by_context; // [context], each horizon()+1 slices
  std::vector<nn::Mlp::Trace> traces;    // [demo]
};

// Throws DegenerateContext when some context's total responsibility falls
// below 1e-12 (the caller skips the iteration).
ConditionalMeanFieldEstimate conditional_empirical_mean_field(const ContextInferenceModel& q,
                                                              const std::vector<Trajectory>& demos,
                                                              int num_states);

// Same estimator with externally supplied responsibilities (tests feed the
// exact posterior here). No encoder traces are cached, so the result carries
// no psi-derivative information.
ConditionalMeanFieldEstimate conditional_empirical_mean_field(
    const std::function<Vec(const Trajectory&)>& responsibilities, int num_contexts,
    const std::vector<Trajectory>& demos, int num_states);

// One summand of a linear combination of kappa vectors.
struct KappaTerm {
  const Trajectory* tau = nullptr;
  int context = 0;
  double coeff = 1.0;
};

struct KappaStats {
  int clamped = 0;  // expert states where mu_hat was clamped at 1e-12
};

// grad += sum_i coeff_i * kappa(tau_i, m_i), where
//   kappa(tau, m) = sum_t [ <d f/d mu, d mu_hat^t(.|m)/d psi>          (t < T)
//                         + d mu_hat^t(s^t|m)/d psi / mu_hat^t(s^t|m) ] (t <= T)
// differentiated through the normalized estimator. The sum collapses into one
// backward pass per demonstration regardless of the number of terms.
KappaStats accumulate_kappa_sum(airl::Discriminator& d, ContextInferenceModel& q,
                                const ConditionalMeanFieldEstimate& est,
                                const std::vector<KappaTerm>& terms, Vec& grad);

Vec kappa(airl::Discriminator& d, ContextInferenceModel& q,
          const ConditionalMeanFieldEstimate& est, const Trajectory& tau, int context,
          KappaStats* stats = nullptr);

// A batch of (context, trajectory) pairs attributed to p_{omega,psi}(tau|m):
// sampler rollouts during training, exact energy-model draws in tests.
struct SampledBatch {
  std::vector<int> context;
  std::vector<Trajectory> tau;
  size_t size() const { return tau.size(); }
};

// d/d omega of the information term L = E[log q_psi(m|tau_hat)], estimated on
// the batch with leave-one-out centering inside each same-context group (a
// group of one contributes exactly zero).
Vec grad_L_omega(airl::Discriminator& d, ContextInferenceModel& q,
                 const ConditionalMeanFieldEstimate& est, const SampledBatch& batch);

// d/d psi of L: the leave-one-out-centered kappa term plus the direct score
// term d log q / d psi.
Vec grad_L_psi(airl::Discriminator& d, ContextInferenceModel& q,
               const ConditionalMeanFieldEstimate& est, const SampledBatch& batch,
               KappaStats* stats = nullptr);

// d/d psi of K = E_m[KL(expert || p_{omega,psi})], estimated from expert
// pairs (tau_E_i, m_i) and a sampled batch: mean kappa over the same-context
// sampled group minus kappa at the expert trajectory.
Vec grad_K_psi(airl::Discriminator& d, ContextInferenceModel& q,
               const ConditionalMeanFieldEstimate& est,
               const std::vector<Trajectory>& expert_batch, const std::vector<int>& contexts,
               const SampledBatch& sampled, KappaStats* stats = nullptr);

// m_tilde_i ~ q_psi(.|tau_E_i) for each trajectory of the batch.
std::vector<int> synthetic_contexts(const ContextInferenceModel& q,
                                    const std::vector<Trajectory>& expert_batch, Rng& rng);

struct TrainConfig {
  int iterations = 2000;
  int batch_size = 64;
  int num_contexts = 2;  // |M| is assumed known to the learner
  std::uint64_t seed = 0;
  double lr_omega = 1e-4;
  double lr_psi = 1e-4;
  double lr_theta = 1e-4;
  std::vector<int> hidden = {64, 64};
  // Real wall-clock values in the log's wall_ms column. Off by default: logs
  // are byte-reproducible from (config, seed), timings are a diagnostic.
  bool timing = false;
};

struct PemmfirlState {
  nn::FeatureCodec codec;
  airl::Discriminator d;                    // f_omega
  ContextInferenceModel q;                  // q_psi
  std::vector<airl::SamplerFlow> samplers;  // pi_theta, one flow per context
  nn::AdamState opt_omega, opt_psi;
  std::vector<std::vector<nn::AdamState>> opt_theta;  // [context][t]
  Rng rng_expert{0}, rng_context{0}, rng_rollout{0};  // advancing streams
  int iteration = 0;

  // Network inits and the three training streams all derive from config.seed;
  // a state plus the demo set fully determines the remainder of a run (which
  // is what makes checkpoint resume exact).
  PemmfirlState(const TabularEnv& env, const TrainConfig& config);
};

// Per-iteration rows appended by meta_train_steps:
// `iter,disc_objective,sampler_return,wall_ms`.
struct StepLog {
  std::string csv_rows;
  int skipped_iterations = 0;
  int kappa_clamped = 0;
};

// Advances `st` by `count` iterations in place (rows numbered from
// st.iteration + 1). meta_train and checkpoint resume both sit on this.
StepLog meta_train_steps(const TabularEnv& env, const solver::DemonstrationSet& demos,
                         const TrainConfig& config, PemmfirlState& st, int count);

struct TrainResult {
  PemmfirlState state;
  std::string csv;  // config-echo header + per-iteration rows
  int skipped_iterations = 0;
  int kappa_clamped = 0;
};

// Algorithm loop, lines 4-11 per iteration. The environment is used only as
// a simulator (sample_trajectory under the estimated mean field); the demo
// trajectories' hidden_context labels and prior are never read.
TrainResult meta_train(const TabularEnv& env, const solver::DemonstrationSet& demos,
                       const TrainConfig& config);

// Best-permutation alignment of learner context labels against the hidden
// labels of a demo set: to_true[learner_label] = true label.
struct LabelAlignment {
  std::vector<int> to_true;
  std::vector<int> to_learner;
  double accuracy = 0.0;
};

LabelAlignment align_labels(const ContextInferenceModel& q,
                            const std::vector<Trajectory>& demos);

// Equilibria induced by the learned reward: one ERMFNE solve per context
// against f(s,a,mu,m) (or one context-blind solve replicated when the
// discriminator ignores context). Solves run damped and fall back to the
// last iterate on non-convergence.
std::map<int, solver::Ermfne> reward_induced_equilibria(const TabularEnv& env,
                                                        airl::Discriminator& d, int num_contexts,
                                                        double tol = 1e-8, int max_iter = 2000,
                                                        double damping = 0.5);

struct MetaTestRecord {
  int seed = 0;
  int true_context = -1;
  int inferred_context = -1;  // learner label space
  double return_gap = 0.0;    // J(expert; r_m) - J(chosen policy; r_m)
  double policy_deviation = 0.0;
  std::string csv_row() const;
};

// Meta-test for one demonstration trajectory: infer m_hat ~ q(.|tau_E), plan
// with the chosen reward conditioned on m_hat (ground-truth r when learned_f
// is null, otherwise the learned f), then evaluate against the expert
// equilibrium of the trajectory's true context.
MetaTestRecord meta_test(const ContextInferenceModel& q, airl::Discriminator* learned_f,
                         const TabularEnv& env, const std::map<int, solver::Ermfne>& expert_eqs,
                         const Trajectory& tau_e, Rng& rng);

}  // namespace mfirl::pemmfirl
