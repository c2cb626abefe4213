#include "mfirl/metrics.hpp"

#include <cmath>
#include <limits>

namespace mfirl::metrics {

namespace {

double kl(const Vec& p, const Vec& q) {
  check(p.size() == q.size(), "kl: mismatched action sets");
  double acc = 0.0;
  for (size_t a = 0; a < p.size(); ++a) {
    if (p[a] == 0.0) continue;
    if (q[a] == 0.0) return std::numeric_limits<double>::infinity();
    acc += p[a] * std::log(p[a] / q[a]);
  }
  return acc;
}

}  // namespace

double policy_deviation(const std::map<int, PolicyFlow>& expert,
                        const std::map<int, PolicyFlow>& learned, const Vec& prior,
                        Vec* per_context) {
  check(!expert.empty() && expert.size() == learned.size() && prior.size() == expert.size(),
        "policy_deviation: contexts must align across expert, learned, prior");
  if (per_context) per_context->assign(prior.size(), 0.0);
  double total = 0.0;
  size_t idx = 0;
  for (const auto& [m, pe] : expert) {
    const auto it = learned.find(m);
    check(it != learned.end(), "policy_deviation: learned flow missing a context");
    const PolicyFlow& pl = it->second;
    check(pe.at.size() == pl.at.size(), "policy_deviation: horizon mismatch");
    double dev = 0.0;
    for (size_t t = 0; t < pe.at.size(); ++t) {
      check(pe.at[t].act.size() == pl.at[t].act.size(), "policy_deviation: state mismatch");
      for (size_t s = 0; s < pe.at[t].act.size(); ++s)
        dev += kl(pe.at[t].act[s], pl.at[t].act[s]);
    }
    if (per_context) (*per_context)[idx] = dev;
    total += prior[idx] * dev;
    ++idx;
  }
  return total;
}

double weighted_policy_deviation(const std::map<int, PolicyFlow>& expert,
                                 const std::map<int, PolicyFlow>& learned,
                                 const std::map<int, MeanFieldFlow>& expert_flow,
                                 const Vec& prior) {
  check(expert.size() == expert_flow.size(), "weighted_policy_deviation: flow contexts mismatch");
  double total = 0.0;
  size_t idx = 0;
  for (const auto& [m, pe] : expert) {
    const PolicyFlow& pl = learned.at(m);
    const MeanFieldFlow& mu = expert_flow.at(m);
    check(mu.at.size() == pe.at.size(), "weighted_policy_deviation: horizon mismatch");
    double dev = 0.0;
    for (size_t t = 0; t < pe.at.size(); ++t)
      for (size_t s = 0; s < pe.at[t].act.size(); ++s)
        dev += mu.at[t].p[s] * kl(pe.at[t].act[s], pl.at[t].act[s]);
    total += prior[idx++] * dev;
  }
  return total;
}

double expected_return_gap(const TabularEnv& env, const std::map<int, solver::Ermfne>& expert_eq,
                           const std::map<int, solver::Ermfne>& learned_eq, const Vec& prior,
                           Vec* per_context) {
  check(expert_eq.size() == learned_eq.size() && prior.size() == expert_eq.size(),
        "expected_return_gap: contexts must align");
  if (per_context) per_context->assign(prior.size(), 0.0);
  double diff = 0.0;
  size_t idx = 0;
  for (const auto& [m, eq_e] : expert_eq) {
    check(m >= 0 && m < env.num_contexts(), "expected_return_gap: context out of range");
    const double je = solver::expected_return(env, eq_e, env.contexts[m]);
    const double jl = solver::expected_return(env, learned_eq.at(m), env.contexts[m]);
    if (per_context) (*per_context)[idx] = je - jl;
    diff += prior[idx] * (je - jl);
    ++idx;
  }
  return std::abs(diff);
}

}  // namespace mfirl::metrics
