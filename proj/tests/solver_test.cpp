#include <doctest.h>

#include <cmath>

#include "mfirl/envs.hpp"
#include "mfirl/solver.hpp"

using namespace mfirl;
using namespace mfirl::solver;

namespace {

// 1-step context-free bandit: r(s,0)=1, r(s,1)=0, transitions ignore mu.
TabularEnv bandit_env() {
  TabularEnv e;
  e.name = "bandit";
  e.num_states = 1;
  e.num_actions = 2;
  e.horizon = 1;
  e.contexts = {0.0};
  e.initial_mean_field.p = {1.0};
  e.reward = [](int, int a, const MeanField&, double) { return a == 0 ? 1.0 : 0.0; };
  e.transition = [](int, int, const MeanField&, Vec& row) { row.assign(1, 1.0); };
  return e;
}

PolicyFlow random_flow(Rng& rng, const TabularEnv& e) {
  PolicyFlow pf;
  pf.at.resize(e.horizon + 1);
  for (auto& slice : pf.at) {
    slice.act.resize(e.num_states);
    for (auto& row : slice.act) {
      row.resize(e.num_actions);
      double sum = 0.0;
      for (double& v : row) sum += (v = 0.05 + rng.uniform01());
      for (double& v : row) v /= sum;
    }
  }
  return pf;
}

}  // namespace

TEST_CASE("soft best response closed form on a one-step bandit") {
  TabularEnv e = bandit_env();
  MeanFieldFlow mf;
  mf.at.assign(2, e.initial_mean_field);
  PolicyFlow pf = soft_best_response(e, mf, 0);
  const double expect = std::exp(1.0) / (std::exp(1.0) + 1.0);  // 0.7311
  CHECK(pf.at[0].act[0][0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(pf.at[1].act[0][0] == doctest::Approx(0.5));  // last step: zero reward, uniform
}

TEST_CASE("soft best response is deterministic bit for bit") {
  TabularEnv e = env::virus_env(20);
  Ermfne eq = solve_ermfne(e, 1);
  PolicyFlow again = soft_best_response(e, eq.mean_field_flow, 1);
  for (int t = 0; t <= 20; ++t)
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) CHECK(again.at[t].act[s][a] == eq.policy_flow.at[t].act[s][a]);
}

TEST_CASE("soft best response beats random policies on the regularized objective") {
  TabularEnv e = env::virus_env(10);
  MeanFieldFlow mf;
  mf.at.assign(11, e.initial_mean_field);
  PolicyFlow br = soft_best_response(e, mf, 0);
  const double best = entropy_regularized_return(e, mf, br, 0);
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    PolicyFlow rival = random_flow(rng, e);
    CHECK(entropy_regularized_return(e, mf, rival, 0) <= best + 1e-12);
  }
}

TEST_CASE("solve_ermfne converges on virus and the pair is self-consistent") {
  TabularEnv e = env::virus_env(50);
  Ermfne eq = solve_ermfne(e, 1, 1e-10);
  CHECK(eq.final_residual <= 1e-10);
  CHECK(consistency_residual(eq.mean_field_flow, eq.policy_flow, e) <= 1e-10);
  for (const MeanField& mu : eq.mean_field_flow.at) CHECK(is_distribution(mu.p, 1e-9));

  PolicyFlow re = soft_best_response(e, eq.mean_field_flow, 1);
  for (int t = 0; t <= 50; ++t)
    for (int s = 0; s < 2; ++s)
      CHECK(re.at[t].act[s] == eq.policy_flow.at[t].act[s]);
}

TEST_CASE("solve_ermfne converges on all contexts of all three environments") {
  for (const char* name : {"virus", "malware", "invest"}) {
    TabularEnv e = env::build_env(name, 30);
    for (int m = 0; m < e.num_contexts(); ++m) {
      Ermfne eq = solve_ermfne(e, m, 1e-10);
      CHECK(eq.final_residual <= 1e-10);
    }
  }
}

TEST_CASE("population-decoupled games converge in at most two sweeps") {
  TabularEnv e = env::malware_env(15);
  // malware transitions ignore mu; make the reward ignore it too
  e.reward = [](int s, int a, const MeanField&, double m) { return -m * s / 10.0 - 0.5 * a; };
  Ermfne eq = solve_ermfne(e, 0);
  CHECK(eq.iterations_used <= 2);
}

TEST_CASE("non-convergence reports the last residual") {
  TabularEnv e = env::virus_env(50);
  try {
    solve_ermfne(e, 1, 1e-10, 1);
    FAIL("expected NonConvergence");
  } catch (const NonConvergence& err) {
    CHECK(err.iterations == 1);
    CHECK(err.residual > 1e-10);
    CHECK(std::string(err.what()).find("damping") != std::string::npos);
  }
}

TEST_CASE("reward override changes the computed equilibrium") {
  TabularEnv e = env::virus_env(10);
  RewardOverride zero = [](int, int, const MeanField&) { return 0.0; };
  Ermfne eq = solve_ermfne(e, 0, 1e-10, 10000, 0.0, &zero);
  // with zero reward every policy slice is uniform
  for (int t = 0; t <= 10; ++t)
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a)
        CHECK(eq.policy_flow.at[t].act[s][a] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("generate_demonstrations draws contexts from the prior") {
  TabularEnv e = env::virus_env(50);
  auto eqs = solve_all_contexts(e);
  Rng rng(3);
  DemonstrationSet demos = generate_demonstrations(eqs, e, {0.5, 0.5}, 2000, rng);
  CHECK(demos.trajectories.size() == 2000);

  int n0 = 0;
  for (const Trajectory& tau : demos.trajectories) {
    CHECK(tau.steps.size() == 51);
    CHECK((tau.hidden_context == 0 || tau.hidden_context == 1));
    n0 += tau.hidden_context == 0;
  }
  // binomial(2000, 0.5): 3 sigma is about 67
  CHECK(std::abs(n0 - 1000) < 68);

  Rng again(3);
  DemonstrationSet redo = generate_demonstrations(eqs, e, {0.5, 0.5}, 2000, again);
  CHECK(redo.trajectories[77].steps == demos.trajectories[77].steps);
}

TEST_CASE("expected_return matches Monte Carlo on virus") {
  TabularEnv e = env::virus_env(20);
  Ermfne eq = solve_ermfne(e, 0);
  const double exact = expected_return(e, eq, e.contexts[0]);

  Rng rng(31);
  const int N = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < N; ++i) {
    Trajectory tau = sample_trajectory(e, &eq.mean_field_flow, eq.policy_flow, rng);
    double ret = 0.0;
    for (int t = 0; t < 20; ++t)
      ret += e.reward(tau.steps[t].first, tau.steps[t].second, eq.mean_field_flow.at[t],
                      e.contexts[0]);
    sum += ret;
    sumsq += ret * ret;
  }
  const double mean = sum / N;
  const double se = std::sqrt((sumsq / N - mean * mean) / N);
  CHECK(std::abs(mean - exact) < 3.0 * se);
}

TEST_CASE("entropy_regularized_return matches Monte Carlo") {
  TabularEnv e = env::virus_env(12);
  Rng rng(41);
  PolicyFlow pf = random_flow(rng, e);
  MeanFieldFlow mf = mkv_rollout(e, pf);
  const double exact = entropy_regularized_return(e, mf, pf, 1);

  const int N = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < N; ++i) {
    Trajectory tau = sample_trajectory(e, &mf, pf, rng);
    double ret = 0.0;
    for (int t = 0; t <= 12; ++t) {
      const auto [s, a] = tau.steps[t];
      if (t < 12) ret += e.reward(s, a, mf.at[t], e.contexts[1]);
      ret -= std::log(pf.at[t].act[s][a]);
    }
    sum += ret;
    sumsq += ret * ret;
  }
  const double mean = sum / N;
  const double se = std::sqrt((sumsq / N - mean * mean) / N);
  CHECK(std::abs(mean - exact) < 3.0 * se);
}
