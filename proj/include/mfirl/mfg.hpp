#pragma once
// Core mean-field game objects: mean fields, policy flows, trajectories, the
// population update, and exact trajectory-distribution arithmetic for finite
// state/action spaces.
//
// Conventions used throughout the library:
//  * A horizon-T problem produces flows with T+1 slices (t = 0..T).
//  * The reward at the final step t = T is zero, so the policy slice at T is
//    present (it is sampled when generating trajectories) but never enters a
//    reward sum; last-step policies are uniform for soft-optimal agents.
//  * log-probabilities of impossible events are -infinity, never NaN.

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mfirl/rng.hpp"

namespace mfirl {

using Vec = std::vector<double>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Distribution over states at one time step.
struct MeanField {
  Vec p;
  int size() const { return static_cast<int>(p.size()); }
};

bool is_distribution(const Vec& p, double tol = 1e-9);

// mu[0..T]
struct MeanFieldFlow {
  std::vector<MeanField> at;
  int horizon() const { return static_cast<int>(at.size()) - 1; }
};

// One action distribution per state.
struct PolicySlice {
  std::vector<Vec> act;  // act[s][a]
  int num_states() const { return static_cast<int>(act.size()); }
};

// pi[0..T]
struct PolicyFlow {
  std::vector<PolicySlice> at;
  int horizon() const { return static_cast<int>(at.size()) - 1; }
};

// State-action path s0,a0,...,sT,aT. hidden_context is the index of the
// generating context, or -1 when unknown/withheld. Training code must never
// read it; it exists for evaluation bookkeeping only.
struct Trajectory {
  std::vector<std::pair<int, int>> steps;
  int hidden_context = -1;
  int horizon() const { return static_cast<int>(steps.size()) - 1; }
};

// Finite-population-limit game description. `transition` fills a row of
// next-state probabilities for (s, a) given the current mean field; `reward`
// takes the context *value* (not index) as its last argument.
struct TabularEnv {
  std::string name;
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  Vec contexts;  // context values, index = context id
  MeanField initial_mean_field;
  std::function<double(int s, int a, const MeanField& mu, double m)> reward;
  std::function<void(int s, int a, const MeanField& mu, Vec& row)> transition;

  Vec transition_row(int s, int a, const MeanField& mu) const {
    Vec row(num_states, 0.0);
    transition(s, a, mu, row);
    return row;
  }
  int num_contexts() const { return static_cast<int>(contexts.size()); }
};

// One-step population update: mu'(s') = sum_s mu(s) sum_a pi(a|s) P(s'|s,a,mu).
MeanField mkv_step(const MeanField& mu, const PolicySlice& pi, const TabularEnv& env);

// Same propagation but with the transition kernel frozen at `mu_dyn` while the
// pushed-forward marginal is `nu`; used for exact return evaluation of pairs
// that need not be self-consistent. mkv_step(mu,pi) == step_marginal(mu,pi,mu).
MeanField step_marginal(const MeanField& nu, const PolicySlice& pi, const MeanField& mu_dyn,
                        const TabularEnv& env);

// Roll the population forward from env.initial_mean_field under pi.
MeanFieldFlow mkv_rollout(const TabularEnv& env, const PolicyFlow& pi);

// log p(tau) = log mu0(s0) + sum_t log pi_t(a_t|s_t) + sum_{t<T} log P(s_{t+1}|s_t,a_t,mu_t).
// The trajectory ends at (sT, aT); there is no transition factor out of step T.
double trajectory_log_prob(const Trajectory& tau, const MeanFieldFlow& mf, const PolicyFlow& pf,
                           const TabularEnv& env);

// Draw one trajectory. Transitions (and the initial state) use `mf_override`
// when given, otherwise the rollout flow induced by `pf` itself. The override
// injection point is what lets a learner generate trajectories against an
// estimated mean field without touching analytic dynamics.
Trajectory sample_trajectory(const TabularEnv& env, const MeanFieldFlow* mf_override,
                             const PolicyFlow& pf, Rng& rng);

// All (s,a) sequences of the given horizon, in lexicographic order. Refuses
// (std::length_error naming the cap) when (|S||A|)^(horizon+1) exceeds cap.
std::vector<Trajectory> enumerate_trajectories(const TabularEnv& env, int horizon,
                                               std::size_t cap = 1000000);

// Mean squared one-step inconsistency between a flow and the population update
// of its own policy, averaged per the convergence statistic: the default range
// is t = 1..T-1 with denominator (T-1)|S|; full_range extends to t = T with
// denominator T|S|. Exactly zero for flows produced by mkv_rollout.
double consistency_residual(const MeanFieldFlow& mf, const PolicyFlow& pf, const TabularEnv& env,
                            bool full_range = false);

// Mean squared change between two flows over t = 1..T-1 (the fixed-point
// termination statistic); falls back to the full range when T < 2.
double flow_change(const MeanFieldFlow& a, const MeanFieldFlow& b);

void check(bool cond, const std::string& msg);

}  // namespace mfirl
