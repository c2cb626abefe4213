#pragma once

#include <map>

#include "mfirl/mfg.hpp"
#include "mfirl/solver.hpp"

namespace mfirl::metrics {

struct EvaluationReport {
  double policy_deviation = 0.0;
  double expected_return_gap = 0.0;
  Vec per_context_deviation;
  Vec per_context_gap;
  int seed = 0;
  double wall_ms = 0.0;
};

// Prior-weighted sum over time and states of KL(expert || learned). Returns
// +infinity when the learned policy puts zero mass where the expert has some.
double policy_deviation(const std::map<int, PolicyFlow>& expert,
                        const std::map<int, PolicyFlow>& learned, const Vec& prior,
                        Vec* per_context = nullptr);

// Diagnostic variant weighting each state's KL by the expert's mean-field
// mass at (t, s) instead of counting every state equally.
double weighted_policy_deviation(const std::map<int, PolicyFlow>& expert,
                                 const std::map<int, PolicyFlow>& learned,
                                 const std::map<int, MeanFieldFlow>& expert_flow,
                                 const Vec& prior);

// |E_m[J(expert_eq; r, m) - J(learned_eq; r, m)]| with both expected returns
// evaluated exactly by marginal propagation under the ground-truth reward.
double expected_return_gap(const TabularEnv& env, const std::map<int, solver::Ermfne>& expert_eq,
                           const std::map<int, solver::Ermfne>& learned_eq, const Vec& prior,
                           Vec* per_context = nullptr);

}  // namespace mfirl::metrics
