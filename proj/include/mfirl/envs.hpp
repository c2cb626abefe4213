#pragma once
// The three simulated benchmark games. All share uniform initial mean fields,
// uniform context priors, and horizon-50 demonstrations by default.

#include <string>

#include "mfirl/mfg.hpp"

namespace mfirl::env {

// <mu> = sum_s s * mu(s) for ordinal state spaces.
double mean_state(const MeanField& mu);

// Exact distribution of s + floor(chi * (n - s)) for chi ~ U[0,1), or of
// s + floor(chi * (n - s) / 2) when halved. Returned as a length-n probability
// vector; the randomness is integrated out analytically rather than sampled.
Vec discretize_jump(int s, bool halved, int num_states = 10);

TabularEnv virus_env(int horizon);
TabularEnv malware_env(int horizon);
TabularEnv invest_env(int horizon);

// name in {"virus", "malware", "invest"}; throws std::invalid_argument naming
// the valid set otherwise.
TabularEnv build_env(const std::string& name, int horizon);

}  // namespace mfirl::env
