#include "mfirl/energy.hpp"

#include <cmath>

namespace mfirl::energy {

double EnergyModel::log_weight(const Trajectory& tau) const {
  check(tau.horizon() == horizon, "energy model: trajectory horizon mismatch");
  double acc = 0.0;
  for (int t = 0; t <= horizon; ++t) {
    const auto [s, a] = tau.steps[t];
    const double ms = mu.at[t].p[s];
    if (ms <= 0.0) return kNegInf;
    acc += std::log(ms);
    if (t < horizon) acc += f[t][s][a];
  }
  return acc;
}

double EnergyModel::log_z() const {
  double acc = 0.0;
  for (double z : step_log_z) acc += z;
  return acc;
}

double EnergyModel::per_state_log_prob(const Trajectory& tau) const {
  check(tau.horizon() == horizon, "energy model: trajectory horizon mismatch");
  double acc = 0.0;
  for (int t = 0; t <= horizon; ++t) {
    const auto [s, a] = tau.steps[t];
    const double ms = mu.at[t].p[s];
    if (ms <= 0.0) return kNegInf;
    acc += std::log(ms);
    if (t < horizon) {
      const Vec& row = f[t][s];
      double mx = row[0];
      for (double v : row) mx = std::max(mx, v);
      double sum = 0.0;
      for (double v : row) sum += std::exp(v - mx);
      acc += row[a] - mx - std::log(sum);
    } else {
      acc -= std::log(static_cast<double>(num_actions));
    }
  }
  return acc;
}

Trajectory EnergyModel::sample(Rng& rng) const {
  Trajectory tau;
  tau.steps.reserve(horizon + 1);
  for (int t = 0; t <= horizon; ++t) {
    const int idx = rng.categorical(step_probs[t]);
    tau.steps.emplace_back(idx / num_actions, idx % num_actions);
  }
  return tau;
}

EnergyModel build_energy_model(const airl::Discriminator& d, const MeanFieldFlow& mu_hat,
                               std::optional<int> m) {
  EnergyModel em;
  em.num_states = d.codec.num_states;
  em.num_actions = d.codec.num_actions;
  em.horizon = mu_hat.horizon();
  check(em.horizon >= 1, "energy model: need at least two mean-field slices");
  em.mu = mu_hat;

  const int S = em.num_states, A = em.num_actions, T = em.horizon;
  em.f.assign(T, std::vector<Vec>(S, Vec(A, 0.0)));
  Vec in;
  nn::Mlp::Trace tr;
  for (int t = 0; t < T; ++t)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        d.encode_input(s, a, mu_hat.at[t].p, m, in);
        em.f[t][s][a] = d.f.forward(in, tr)[0];
      }

  em.step_probs.assign(T + 1, Vec(static_cast<size_t>(S) * A, 0.0));
  em.step_log_z.assign(T + 1, 0.0);
  for (int t = 0; t < T; ++t) {
    double mx = em.f[t][0][0];
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) mx = std::max(mx, em.f[t][s][a]);
    double sum = 0.0;
    for (int s = 0; s < S; ++s) {
      const double ms = mu_hat.at[t].p[s];
      for (int a = 0; a < A; ++a) {
        const double w = ms * std::exp(em.f[t][s][a] - mx);
        em.step_probs[t][static_cast<size_t>(s) * A + a] = w;
        sum += w;
      }
    }
    check(sum > 0.0, "energy model: degenerate step weight");
    for (double& w : em.step_probs[t]) w /= sum;
    em.step_log_z[t] = mx + std::log(sum);
  }
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      em.step_probs[T][static_cast<size_t>(s) * A + a] = mu_hat.at[T].p[s] / A;
  em.step_log_z[T] = std::log(static_cast<double>(A));
  return em;
}

}  // namespace mfirl::energy
