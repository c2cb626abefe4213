#pragma once
// The energy-based trajectory model p(tau|m) built from an injected mean-field
// flow and a reward network:
//
//   weight(tau) = [ prod_{t=0}^{T} mu_t(s_t) ] * exp( sum_{t=0}^{T-1} f(s_t, a_t, mu_t[, m]) ).
//
// The final step carries no f term (its reward is zero by convention), so the
// action factor at t = T is uniform. Because the weight factorizes across
// timesteps, the partition function is an exact product of per-step sums,
// sampling reduces to independent per-step categorical draws, and enumeration
// is never required for exactness (tests still cross-check against it).
//
// Two normalized readings coexist:
//  * log_prob: one global Z over whole trajectories — the form the
//    mutual-information objective and its score-function gradients use.
//  * per_state_log_prob: state factors mu_t with per-state softmax action
//    factors — the distribution an optimal entropy-regularized sampler
//    induces when the dynamics are mean-field-driven (the equivalence the
//    sampler-route tests assert).
// The two agree exactly iff sum_a exp f(s, a, mu_t) is constant in s at every
// step.

#include <optional>

#include "mfirl/mfairl.hpp"
#include "mfirl/mfg.hpp"

namespace mfirl::energy {

struct EnergyModel {
  int num_states = 0, num_actions = 0, horizon = 0;
  MeanFieldFlow mu;                 // injected flow, T+1 slices
  std::vector<std::vector<Vec>> f;  // f[t][s][a], t = 0..T-1

  // Normalized per-step joint tables rho_t(s,a) (flattened s*A+a) and their
  // log-normalizers; slot T holds mu_T(s)/A.
  std::vector<Vec> step_probs;
  Vec step_log_z;

  double log_weight(const Trajectory& tau) const;  // unnormalized, global
  double log_z() const;
  double log_prob(const Trajectory& tau) const { return log_weight(tau) - log_z(); }
  double per_state_log_prob(const Trajectory& tau) const;
  Trajectory sample(Rng& rng) const;
};

// Tabulates f over every (t, s, a) under mu_hat and precomputes the per-step
// tables. mu_hat must have at least 2 slices.
EnergyModel build_energy_model(const airl::Discriminator& d, const MeanFieldFlow& mu_hat,
                               std::optional<int> m);

}  // namespace mfirl::energy
