#include "mfirl/mfg.hpp"

#include <cmath>
#include <stdexcept>

namespace mfirl {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool is_distribution(const Vec& p, double tol) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) return false;  // catches negatives and NaN
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

MeanField step_marginal(const MeanField& nu, const PolicySlice& pi, const MeanField& mu_dyn,
                        const TabularEnv& env) {
  check(nu.size() == env.num_states && mu_dyn.size() == env.num_states,
        "step_marginal: mean field size does not match env");
  check(pi.num_states() == env.num_states, "step_marginal: policy slice size does not match env");
  MeanField out;
  out.p.assign(env.num_states, 0.0);
  Vec row(env.num_states);
  for (int s = 0; s < env.num_states; ++s) {
    if (nu.p[s] == 0.0) continue;
    for (int a = 0; a < env.num_actions; ++a) {
      const double w = nu.p[s] * pi.act[s][a];
      if (w == 0.0) continue;
      env.transition(s, a, mu_dyn, row);
      for (int sp = 0; sp < env.num_states; ++sp) out.p[sp] += w * row[sp];
    }
  }
  return out;
}

MeanField mkv_step(const MeanField& mu, const PolicySlice& pi, const TabularEnv& env) {
  check(is_distribution(mu.p), "mkv_step: mu is not a distribution");
  for (int s = 0; s < env.num_states; ++s)
    check(is_distribution(pi.act[s]), "mkv_step: policy row is not a distribution");
  return step_marginal(mu, pi, mu, env);
}

MeanFieldFlow mkv_rollout(const TabularEnv& env, const PolicyFlow& pi) {
  check(pi.horizon() == env.horizon, "mkv_rollout: policy flow horizon mismatch");
  MeanFieldFlow mf;
  mf.at.resize(env.horizon + 1);
  mf.at[0] = env.initial_mean_field;
  for (int t = 0; t < env.horizon; ++t) mf.at[t + 1] = step_marginal(mf.at[t], pi.at[t], mf.at[t], env);
  return mf;
}

double trajectory_log_prob(const Trajectory& tau, const MeanFieldFlow& mf, const PolicyFlow& pf,
                           const TabularEnv& env) {
  const int T = tau.horizon();
  check(T >= 0, "trajectory_log_prob: empty trajectory");
  check(mf.horizon() == T && pf.horizon() == T,
        "trajectory_log_prob: flow horizons do not match trajectory");
  auto safe_log = [](double v) { return v > 0.0 ? std::log(v) : kNegInf; };

  double lp = safe_log(mf.at[0].p[tau.steps[0].first]);
  Vec row(env.num_states);
  for (int t = 0; t <= T; ++t) {
    const auto [s, a] = tau.steps[t];
    check(s >= 0 && s < env.num_states && a >= 0 && a < env.num_actions,
          "trajectory_log_prob: state/action out of range");
    lp += safe_log(pf.at[t].act[s][a]);
    if (t < T) {
      env.transition(s, a, mf.at[t], row);
      lp += safe_log(row[tau.steps[t + 1].first]);
    }
    if (lp == kNegInf) return kNegInf;  // impossible trajectory; stop early
  }
  return lp;
}

Trajectory sample_trajectory(const TabularEnv& env, const MeanFieldFlow* mf_override,
                             const PolicyFlow& pf, Rng& rng) {
  check(pf.horizon() == env.horizon, "sample_trajectory: policy flow horizon mismatch");
  MeanFieldFlow rolled;
  const MeanFieldFlow* mf = mf_override;
  if (mf == nullptr) {
    rolled = mkv_rollout(env, pf);
    mf = &rolled;
  }
  check(mf->horizon() == env.horizon, "sample_trajectory: mean field flow horizon mismatch");

  Trajectory tau;
  tau.steps.reserve(env.horizon + 1);
  int s = rng.categorical(mf->at[0].p);
  Vec row(env.num_states);
  for (int t = 0; t <= env.horizon; ++t) {
    const int a = rng.categorical(pf.at[t].act[s]);
    tau.steps.emplace_back(s, a);
    if (t < env.horizon) {
      env.transition(s, a, mf->at[t], row);
      s = rng.categorical(row);
    }
  }
  return tau;
}

std::vector<Trajectory> enumerate_trajectories(const TabularEnv& env, int horizon, std::size_t cap) {
  check(horizon >= 0, "enumerate_trajectories: negative horizon");
  const std::size_t pairs = static_cast<std::size_t>(env.num_states) * env.num_actions;
  std::size_t total = 1;
  for (int t = 0; t <= horizon; ++t) {
    if (total > cap / pairs) {
      throw std::length_error("enumerate_trajectories: (|S||A|)^(T+1) exceeds cap of " +
                              std::to_string(cap));
    }
    total *= pairs;
  }
  std::vector<Trajectory> out;
  out.reserve(total);
  Trajectory cur;
  cur.steps.assign(horizon + 1, {0, 0});
  // odometer over (s,a) pairs, most significant digit at t = 0
  while (true) {
    out.push_back(cur);
    int t = horizon;
    for (; t >= 0; --t) {
      auto& [s, a] = cur.steps[t];
      if (++a < env.num_actions) break;
      a = 0;
      if (++s < env.num_states) break;
      s = 0;
    }
    if (t < 0) break;
  }
  return out;
}

double consistency_residual(const MeanFieldFlow& mf, const PolicyFlow& pf, const TabularEnv& env,
                            bool full_range) {
  const int T = mf.horizon();
  check(pf.horizon() == T, "consistency_residual: horizon mismatch");
  int t_end = full_range ? T : T - 1;
  if (t_end < 1) t_end = T;  // degenerate horizons: use whatever steps exist
  double sum = 0.0;
  int count = 0;
  for (int t = 1; t <= t_end; ++t) {
    const MeanField pred = step_marginal(mf.at[t - 1], pf.at[t - 1], mf.at[t - 1], env);
    for (int s = 0; s < env.num_states; ++s) {
      const double d = mf.at[t].p[s] - pred.p[s];
      sum += d * d;
    }
    count += env.num_states;
  }
  return count > 0 ? sum / count : 0.0;
}

double flow_change(const MeanFieldFlow& a, const MeanFieldFlow& b) {
  const int T = a.horizon();
  check(b.horizon() == T, "flow_change: horizon mismatch");
  int t_begin = 1, t_end = T - 1;
  if (t_end < t_begin) { t_begin = 0; t_end = T; }
  double sum = 0.0;
  int count = 0;
  for (int t = t_begin; t <= t_end; ++t) {
    const int n = a.at[t].size();
    for (int s = 0; s < n; ++s) {
      const double d = a.at[t].p[s] - b.at[t].p[s];
      sum += d * d;
    }
    count += n;
  }
  return count > 0 ? sum / count : 0.0;
}

}  // namespace mfirl
