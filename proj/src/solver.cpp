#include "mfirl/solver.hpp"

#include <algorithm>
#include <cmath>

namespace mfirl::solver {

namespace {

double log_sum_exp(const Vec& q) {
  double hi = *std::max_element(q.begin(), q.end());
  if (hi == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : q) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

}  // namespace

PolicyFlow soft_best_response(const TabularEnv& env, const MeanFieldFlow& mf, int context_index,
                              const RewardOverride* override_reward) {
  const int T = env.horizon;
  check(mf.horizon() == T, "soft_best_response: flow horizon mismatch");
  check(override_reward != nullptr ||
            (context_index >= 0 && context_index < env.num_contexts()),
        "soft_best_response: context index out of range");
  const double m = override_reward ? 0.0 : env.contexts[context_index];

  PolicyFlow pf;
  pf.at.resize(T + 1);
  pf.at[T].act.assign(env.num_states, Vec(env.num_actions, 1.0 / env.num_actions));

  Vec v_next(env.num_states, 0.0);  // V_T = 0
  Vec v_cur(env.num_states), q(env.num_actions), row(env.num_states);
  for (int t = T - 1; t >= 0; --t) {
    pf.at[t].act.assign(env.num_states, Vec(env.num_actions));
    for (int s = 0; s < env.num_states; ++s) {
      for (int a = 0; a < env.num_actions; ++a) {
        env.transition(s, a, mf.at[t], row);
        double ev = 0.0;
        for (int sp = 0; sp < env.num_states; ++sp) ev += row[sp] * v_next[sp];
        const double r = override_reward ? (*override_reward)(s, a, mf.at[t])
                                         : env.reward(s, a, mf.at[t], m);
        q[a] = r + ev;
      }
      const double v = log_sum_exp(q);
      v_cur[s] = v;
      for (int a = 0; a < env.num_actions; ++a) pf.at[t].act[s][a] = std::exp(q[a] - v);
    }
    v_next = v_cur;
  }
  return pf;
}

Ermfne solve_ermfne(const TabularEnv& env, int context_index, double tol, int max_iter,
                    double damping, const RewardOverride* override_reward, bool* converged) {
  check(tol > 0.0, "solve_ermfne: tol must be positive");
  check(max_iter >= 1, "solve_ermfne: max_iter must be >= 1");
  check(damping >= 0.0 && damping < 1.0, "solve_ermfne: damping must be in [0, 1)");

  MeanFieldFlow mu;
  mu.at.assign(env.horizon + 1, env.initial_mean_field);

  double last_residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    PolicyFlow pi = soft_best_response(env, mu, context_index, override_reward);
    MeanFieldFlow rolled = mkv_rollout(env, pi);
    MeanFieldFlow next = rolled;
    if (damping > 0.0) {
      for (int t = 0; t <= env.horizon; ++t)
        for (int s = 0; s < env.num_states; ++s)
          next.at[t].p[s] = (1.0 - damping) * rolled.at[t].p[s] + damping * mu.at[t].p[s];
    }
    const double change = flow_change(next, mu);
    mu = next;
    if (change <= tol) {
      // Final pair: the policy is recomputed from the returned flow so that
      // re-running the best response reproduces it exactly, and the pair must
      // itself be self-consistent at the tolerance.
      PolicyFlow final_pi = soft_best_response(env, mu, context_index, override_reward);
      const double residual = consistency_residual(mu, final_pi, env);
      last_residual = residual;
      if (residual <= tol) {
        Ermfne eq;
        eq.mean_field_flow = std::move(mu);
        eq.policy_flow = std::move(final_pi);
        eq.context_index = context_index;
        eq.iterations_used = it;
        eq.final_residual = residual;
        if (converged) *converged = true;
        return eq;
      }
    } else {
      last_residual = change;
    }
  }
  if (converged) {
    // Caller asked for the last iterate instead of an exception; the flag
    // records that the pair missed the tolerance.
    *converged = false;
    Ermfne eq;
    eq.policy_flow = soft_best_response(env, mu, context_index, override_reward);
    eq.final_residual = consistency_residual(mu, eq.policy_flow, env);
    eq.mean_field_flow = std::move(mu);
    eq.context_index = context_index;
    eq.iterations_used = max_iter;
    return eq;
  }
  throw NonConvergence(last_residual, max_iter);
}

double entropy_regularized_return(const TabularEnv& env, const MeanFieldFlow& mf,
                                  const PolicyFlow& pf, int context_index,
                                  const RewardOverride* override_reward) {
  const int T = env.horizon;
  check(mf.horizon() == T && pf.horizon() == T, "entropy_regularized_return: horizon mismatch");
  const double m = override_reward ? 0.0 : env.contexts.at(context_index);

  // W_t(s): value-to-go of the fixed policy including entropy bonuses.
  Vec w_next(env.num_states, 0.0), w_cur(env.num_states), row(env.num_states);
  for (int s = 0; s < env.num_states; ++s) {
    double h = 0.0;
    for (double p : pf.at[T].act[s])
      if (p > 0.0) h -= p * std::log(p);
    w_next[s] = h;
  }
  for (int t = T - 1; t >= 0; --t) {
    for (int s = 0; s < env.num_states; ++s) {
      double w = 0.0;
      for (int a = 0; a < env.num_actions; ++a) {
        const double p = pf.at[t].act[s][a];
        if (p == 0.0) continue;
        env.transition(s, a, mf.at[t], row);
        double ev = 0.0;
        for (int sp = 0; sp < env.num_states; ++sp) ev += row[sp] * w_next[sp];
        const double r = override_reward ? (*override_reward)(s, a, mf.at[t])
                                         : env.reward(s, a, mf.at[t], m);
        w += p * (r - std::log(p) + ev);
      }
      w_cur[s] = w;
    }
    w_next = w_cur;
  }
  double j = 0.0;
  for (int s = 0; s < env.num_states; ++s) j += mf.at[0].p[s] * w_next[s];
  return j;
}

double expected_return(const TabularEnv& env, const Ermfne& eq, double context_value) {
  const int T = env.horizon;
  MeanField nu = eq.mean_field_flow.at[0];
  double j = 0.0;
  for (int t = 0; t < T; ++t) {
    const MeanField& mu_t = eq.mean_field_flow.at[t];
    for (int s = 0; s < env.num_states; ++s) {
      if (nu.p[s] == 0.0) continue;
      for (int a = 0; a < env.num_actions; ++a) {
        const double w = nu.p[s] * eq.policy_flow.at[t].act[s][a];
        if (w != 0.0) j += w * env.reward(s, a, mu_t, context_value);
      }
    }
    nu = step_marginal(nu, eq.policy_flow.at[t], mu_t, env);
  }
  return j;
}

DemonstrationSet generate_demonstrations(const std::map<int, Ermfne>& equilibria,
                                         const TabularEnv& env, const Vec& prior, int count,
                                         Rng& rng) {
  check(!equilibria.empty(), "generate_demonstrations: no equilibria");
  check(prior.size() == equilibria.size(), "generate_demonstrations: prior size mismatch");
  check(is_distribution(prior), "generate_demonstrations: prior is not a distribution");
  check(count >= 0, "generate_demonstrations: negative count");

  std::vector<int> keys;
  for (const auto& [k, eq] : equilibria) {
    check(eq.mean_field_flow.horizon() == env.horizon,
          "generate_demonstrations: equilibrium horizon mismatch");
    keys.push_back(k);
  }
  DemonstrationSet out;
  out.prior = prior;
  out.horizon = env.horizon;
  out.trajectories.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int which = rng.categorical(prior);
    const Ermfne& eq = equilibria.at(keys[which]);
    Trajectory tau = sample_trajectory(env, &eq.mean_field_flow, eq.policy_flow, rng);
    tau.hidden_context = keys[which];
    out.trajectories.push_back(std::move(tau));
  }
  return out;
}

std::map<int, Ermfne> solve_all_contexts(const TabularEnv& env, double tol, int max_iter,
                                         double damping) {
  std::map<int, Ermfne> out;
  for (int m = 0; m < env.num_contexts(); ++m)
    out.emplace(m, solve_ermfne(env, m, tol, max_iter, damping));
  return out;
}

}  // namespace mfirl::solver
