#include "mfirl/envs.hpp"

#include <algorithm>
#include <cmath>

namespace mfirl::env {

double mean_state(const MeanField& mu) {
  double m = 0.0;
  for (int s = 0; s < mu.size(); ++s) m += s * mu.p[s];
  return m;
}

Vec discretize_jump(int s, bool halved, int num_states) {
  check(s >= 0 && s < num_states, "discretize_jump: state out of range");
  Vec p(num_states, 0.0);
  const double span = num_states - s;  // chi*(span) in [0, span)
  const double denom = halved ? 2.0 : 1.0;
  // floor(chi * span / denom) = k  <=>  chi in [k*denom/span, (k+1)*denom/span)
  for (int k = 0; s + k < num_states; ++k) {
    const double lo = k * denom / span;
    if (lo >= 1.0) break;
    const double hi = std::min((k + 1) * denom / span, 1.0);
    p[s + k] += hi - lo;
  }
  return p;
}

TabularEnv virus_env(int horizon) {
  check(horizon >= 1, "virus_env: horizon must be >= 1");
  TabularEnv e;
  e.name = "virus";
  e.num_states = 2;   // 0 = susceptible, 1 = infected
  e.num_actions = 2;  // 0 = go out, 1 = social distance
  e.horizon = horizon;
  e.contexts = {0.5, 1.0};
  e.initial_mean_field.p = {0.5, 0.5};
  e.reward = [](int s, int a, const MeanField&, double m) {
    return -(s == 1 ? 1.0 : 0.0) - m * (a == 1 ? 1.0 : 0.0);
  };
  e.transition = [](int s, int a, const MeanField& mu, Vec& row) {
    row.assign(2, 0.0);
    if (s == 1) {  // recovery is action- and population-independent
      row[0] = 0.3;
      row[1] = 0.7;
    } else if (a == 0) {  // going out: both sides must be out for contact
      const double p_inf = 0.9 * 0.9 * mu.p[1];
      row[0] = 1.0 - p_inf;
      row[1] = p_inf;
    } else {  // distancing fully blocks infection
      row[0] = 1.0;
    }
  };
  return e;
}

TabularEnv malware_env(int horizon) {
  check(horizon >= 1, "malware_env: horizon must be >= 1");
  TabularEnv e;
  e.name = "malware";
  e.num_states = 10;  // vulnerability level, 0 = just patched
  e.num_actions = 2;  // 0 = do nothing, 1 = intervene
  e.horizon = horizon;
  e.contexts = {0.2, 0.4};
  e.initial_mean_field.p.assign(10, 0.1);
  e.reward = [](int s, int a, const MeanField& mu, double m) {
    return -(m + mean_state(mu)) * s / 10.0 - 0.5 * a;
  };
  e.transition = [](int s, int a, const MeanField&, Vec& row) {
    if (a == 1) {
      row.assign(10, 0.0);
      row[0] = 1.0;
    } else {
      row = discretize_jump(s, false, 10);
    }
  };
  return e;
}

TabularEnv invest_env(int horizon) {
  check(horizon >= 1, "invest_env: horizon must be >= 1");
  TabularEnv e;
  e.name = "invest";
  e.num_states = 10;  // product quality
  e.num_actions = 2;  // 0 = hold, 1 = invest
  e.horizon = horizon;
  e.contexts = {0.2, 0.5};
  e.initial_mean_field.p.assign(10, 0.1);
  e.reward = [](int s, int a, const MeanField& mu, double m) {
    return 0.3 * s / 10.0 - 0.2 * mean_state(mu) - m * a;
  };
  e.transition = [](int s, int a, const MeanField& mu, Vec& row) {
    if (a == 0) {
      row.assign(10, 0.0);
      row[s] = 1.0;
    } else {
      // crowded markets (mean quality >= 4) halve the attainable improvement
      row = discretize_jump(s, mean_state(mu) >= 4.0, 10);
    }
  };
  return e;
}

TabularEnv build_env(const std::string& name, int horizon) {
  if (name == "virus") return virus_env(horizon);
  if (name == "malware") return malware_env(horizon);
  if (name == "invest") return invest_env(horizon);
  throw std::invalid_argument("unknown environment '" + name +
                              "'; valid environments: virus, malware, invest");
}

}  // namespace mfirl::env
