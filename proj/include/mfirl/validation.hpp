#pragma once
// Numerical validation harnesses shared by the unit tests, the acceptance
// suite and the `oracle-check` CLI subcommand. Everything here is independent
// of the training loops: central finite differences, straight-line network
// re-evaluation, and small randomized instances with enumerable trajectory
// spaces.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mfirl/energy.hpp"
#include "mfirl/mfairl.hpp"
#include "mfirl/mfg.hpp"
#include "mfirl/mlp.hpp"
#include "mfirl/pemmfirl.hpp"
#include "mfirl/rng.hpp"
#include "mfirl/solver.hpp"

namespace mfirl::validation {

// Central finite differences of a scalar function of a flat coordinate
// vector. `params` is restored before returning.
Vec fd_gradient(const std::function<double(const Vec&)>& fn, Vec& params, double h = 1e-5);

// Relative error between an analytic and a finite-difference gradient.
// Per-coordinate denominators are floored at 1e-3 of the gradient's max
// magnitude so that coordinates whose true value is negligible (where central
// differences are pure roundoff) cannot dominate; an all-zero pair scores 0.
struct GradCompare {
  double max_rel_err = 0.0;
  int worst_index = -1;
  double analytic_at_worst = 0.0;
  double fd_at_worst = 0.0;
};
GradCompare compare_gradients(const Vec& analytic, const Vec& fd);

// Straight-line re-evaluation of an Mlp forward pass: naive nested loops,
// coded separately from Mlp::forward on purpose.
Vec straight_line_forward(const nn::Mlp& net, const Vec& input);

// One randomized gradient check: draws a net (random depth/widths/head),
// draws an input kept away from activation kinks, compares backprop against
// central differences for all parameters and the input.
struct GradCheckCase {
  std::vector<int> dims;
  bool softmax = false;
  double param_rel_err = 0.0;
  double input_rel_err = 0.0;
};
GradCheckCase gradient_check_case(Rng& rng, double h = 1e-5);

// Runs `n` cases; returns the worst parameter/input relative error seen.
struct GradCheckSummary {
  int cases = 0;
  double max_param_rel_err = 0.0;
  double max_input_rel_err = 0.0;
};
GradCheckSummary run_gradient_checks(int n, std::uint64_t seed);

// Two-state instance whose transitions depend on the mean field only (not on
// the acting agent's state or action). Under such dynamics every policy
// induces the same state marginals, the soft-optimal sampler against any f is
// the per-state myopic softmax, and the sampler-route trajectory distribution
// has a closed per-step product form - the setting where the energy model's
// per-state reading is exact.
TabularEnv mean_field_driven_env(int horizon);

// The MKV iterates of that kernel (identical under every policy).
MeanFieldFlow mean_field_driven_flow(const TabularEnv& env);

// Enumerates all trajectories and compares the sampler-route distribution
// (mu_hat with the exact soft-optimal sampler against f) to the energy model
// under both normalizations. Total variation distances in [0, 1].
struct SamplerRouteComparison {
  double tv_per_state = 0.0;  // vs the per-state-normalized reading
  double tv_global_z = 0.0;   // vs the single-Z reading (diagnostic)
};
SamplerRouteComparison compare_sampler_route(const TabularEnv& env, const MeanFieldFlow& mu_hat,
                                             const airl::Discriminator& d, std::optional<int> m);

// A randomized two-context game small enough to enumerate every trajectory:
// |S| in {2, 3}, |A| = 2, T in {2, 3}. Initial distribution and transition
// rows are bounded away from zero, so a modest demo set covers every state at
// every timestep (sets are redrawn until they do) and no mean-field clamp can
// fire anywhere downstream.
struct TinyInstance {
  TabularEnv env;
  Vec prior;                                 // uniform over the two contexts
  std::map<int, solver::Ermfne> equilibria;  // exact expert behavior
  std::vector<Trajectory> demos;             // full per-slice state support
  std::vector<Trajectory> space;             // every (s,a) path of horizon T
  airl::Discriminator d;                     // random context-aware f_omega
  pemmfirl::ContextInferenceModel q;         // random q_psi
};
TinyInstance make_tiny_instance(Rng& rng, int num_demos = 16);

// Exactly enumerated objectives at the instance's current parameters. Both
// rebuild the conditional mean field from inst.demos, so finite differences
// in psi see the full chain (responsibilities -> mu_hat -> energies).
//   enumerate_L = sum_m p(m) sum_tau p_{omega,psi}(tau|m) log q_psi(m|tau)
//   enumerate_K = -sum_m p(m) sum_tau p_E(tau|m) log p_{omega,psi}(tau|m)
// (K drops the expert entropy, which is constant in both parameter sets).
double enumerate_L(const TinyInstance& inst);
double enumerate_K(const TinyInstance& inst);

// Monte Carlo bias check of the three gradient estimators against central
// finite differences of the enumerated objectives. Every resample draws
// stratified batches - context counts exactly proportional to the uniform
// prior, so no leave-one-out group degenerates to a singleton - with
// synthetic trajectories from the exact energy model and expert trajectories
// from the true joint p(m) p_E(.|m). Estimates are projected onto the
// finite-difference direction plus `extra_dirs` fixed random unit vectors;
// each reported z is the worst |projection mean - reference| / SE over them.
struct EstimatorCheck {
  double z_l_omega = 0.0;
  double z_l_psi = 0.0;
  double z_k_psi = 0.0;
  int kappa_clamped = 0;  // stays 0 on full-support instances
  double max_z() const { return std::max({z_l_omega, z_l_psi, z_k_psi}); }
};
EstimatorCheck check_estimators(TinyInstance& inst, int resamples, int batch_size, Rng& rng,
                                int extra_dirs = 2);

}  // namespace mfirl::validation
