#pragma once
// Entropy-regularized equilibrium computation. The fixed point alternates an
// exact soft best response (backward induction with terminal value zero)
// against the population update until successive mean-field flows stop moving
// and the final (flow, policy) pair is self-consistent at the same tolerance.

#include <map>
#include <stdexcept>

#include "mfirl/mfg.hpp"

namespace mfirl::solver {

// Optional reward replacement r'(s, a, mu). Used to plan against learned
// reward functions and for the test-only exact sampler; when set it fully
// replaces env.reward (context conditioning is baked into the callable).
using RewardOverride = std::function<double(int s, int a, const MeanField& mu)>;

struct Ermfne {
  MeanFieldFlow mean_field_flow;
  PolicyFlow policy_flow;
  int context_index = 0;
  int iterations_used = 0;
  double final_residual = 0.0;
};

struct NonConvergence : std::runtime_error {
  NonConvergence(double r, int it)
      : std::runtime_error("ERMFNE fixed point did not converge: residual " + std::to_string(r) +
                           " after " + std::to_string(it) + " iterations (consider damping)"),
        residual(r),
        iterations(it) {}
  double residual;
  int iterations;
};

// Exact soft-optimal policy against the frozen flow `mf`:
//   Q_t(s,a) = r(s,a,mu_t) + sum_s' P(s'|s,a,mu_t) V_{t+1}(s'),
//   V_t(s)   = log sum_a exp Q_t(s,a),  pi_t = exp(Q_t - V_t),  V_T = 0.
// The slice at t = T (zero reward) is uniform. Deterministic: re-running on
// the same inputs reproduces the policy bit for bit.
PolicyFlow soft_best_response(const TabularEnv& env, const MeanFieldFlow& mf, int context_index,
                              const RewardOverride* override_reward = nullptr);

// Fixed point of mu -> rollout(soft_best_response(mu)), with optional damping
// mu_next = (1-damping)*rollout + damping*mu. Stops when the mean-squared
// change between successive flows and the self-consistency residual of the
// final pair are both <= tol. Throws NonConvergence after max_iter sweeps,
// unless `converged` is non-null: then the flag is set and the last iterate
// is returned instead (used when planning against learned rewards, which may
// cycle).
Ermfne solve_ermfne(const TabularEnv& env, int context_index, double tol = 1e-10,
                    int max_iter = 10000, double damping = 0.0,
                    const RewardOverride* override_reward = nullptr, bool* converged = nullptr);

// Expected entropy-regularized objective of (mf, pf):
//   sum_{t<T} E[r + H(pi_t(.|s_t))] + E[H(pi_T(.|s_T))]
// evaluated exactly by backward recursion (no sampling).
double entropy_regularized_return(const TabularEnv& env, const MeanFieldFlow& mf,
                                  const PolicyFlow& pf, int context_index,
                                  const RewardOverride* override_reward = nullptr);

// Expected plain return sum_{t<T} E[r(s_t,a_t,mu_t,m)] of an equilibrium pair,
// computed by exact forward propagation of the agent marginal through the
// pair's own transition kernels. `context_value` picks the reward parameter
// (it may differ from the context the pair was solved for).
double expected_return(const TabularEnv& env, const Ermfne& eq, double context_value);

struct DemonstrationSet {
  std::vector<Trajectory> trajectories;  // hidden_context set on each
  Vec prior;                             // context prior used when drawing
  int horizon = 0;
};

// Draw `count` expert trajectories: context ~ prior, then a rollout from that
// context's equilibrium (transitions driven by the equilibrium flow).
DemonstrationSet generate_demonstrations(const std::map<int, Ermfne>& equilibria,
                                         const TabularEnv& env, const Vec& prior, int count,
                                         Rng& rng);

// Solve every context of the environment.
std::map<int, Ermfne> solve_all_contexts(const TabularEnv& env, double tol = 1e-10,
                                         int max_iter = 10000, double damping = 0.0);

}  // namespace mfirl::solver
