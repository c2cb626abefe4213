#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>

#include "mfirl/envs.hpp"
#include "mfirl/mfg.hpp"

using namespace mfirl;

namespace {

PolicySlice uniform_slice(int S, int A) {
  PolicySlice ps;
  ps.act.assign(S, Vec(A, 1.0 / A));
  return ps;
}

PolicyFlow constant_flow(const PolicySlice& ps, int T) {
  PolicyFlow pf;
  pf.at.assign(T + 1, ps);
  return pf;
}

// Random 2-state/2-action env with strictly positive kernels; mean-field
// coupling enters through a convex blend so rows stay on the simplex.
TabularEnv random_env2(Rng& rng, int T) {
  TabularEnv e;
  e.name = "rand2";
  e.num_states = 2;
  e.num_actions = 2;
  e.horizon = T;
  e.contexts = {1.0};
  double u = 0.2 + 0.6 * rng.uniform01();
  e.initial_mean_field.p = {u, 1.0 - u};
  auto base = std::make_shared<std::vector<Vec>>();
  for (int i = 0; i < 4; ++i) {
    double q = 0.1 + 0.8 * rng.uniform01();
    base->push_back({q, 1.0 - q});
  }
  double lam = 0.5 * rng.uniform01();
  e.transition = [base, lam](int s, int a, const MeanField& mu, Vec& row) {
    const Vec& b = (*base)[s * 2 + a];
    row.resize(2);
    row[0] = (1.0 - lam) * b[0] + lam * mu.p[0];
    row[1] = 1.0 - row[0];
  };
  e.reward = [](int, int, const MeanField&, double) { return 0.0; };
  return e;
}

PolicyFlow random_policy_flow(Rng& rng, int S, int A, int T) {
  PolicyFlow pf;
  pf.at.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    pf.at[t].act.resize(S);
    for (int s = 0; s < S; ++s) {
      Vec row(A);
      double sum = 0.0;
      for (double& v : row) {
        v = 0.05 + rng.uniform01();
        sum += v;
      }
      for (double& v : row) v /= sum;
      pf.at[t].act[s] = row;
    }
  }
  return pf;
}

}  // namespace

TEST_CASE("mkv_step matches hand-computed virus updates") {
  TabularEnv e = env::virus_env(2);
  MeanField mu{{0.5, 0.5}};

  // everyone distances: mu'(S) = 0.5*1 + 0.5*0.3
  PolicySlice distance;
  distance.act = {{0.0, 1.0}, {0.0, 1.0}};
  MeanField next = mkv_step(mu, distance, e);
  CHECK(next.p[0] == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(next.p[1] == doctest::Approx(0.35).epsilon(1e-12));

  // everyone goes out: infection prob from S is 0.81 * mu(I)
  PolicySlice out;
  out.act = {{1.0, 0.0}, {1.0, 0.0}};
  next = mkv_step(mu, out, e);
  const double p_inf = 0.81 * 0.5;
  CHECK(next.p[1] == doctest::Approx(0.5 * p_inf + 0.5 * 0.7).epsilon(1e-12));
  CHECK(next.p[0] + next.p[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mkv_step preserves the simplex on random inputs") {
  Rng rng(17);
  for (int rep = 0; rep < 1000; ++rep) {
    TabularEnv e = random_env2(rng, 1);
    Vec mu(2);
    mu[0] = rng.uniform01();
    mu[1] = 1.0 - mu[0];
    PolicyFlow pf = random_policy_flow(rng, 2, 2, 1);
    MeanField next = mkv_step(MeanField{mu}, pf.at[0], e);
    CHECK(is_distribution(next.p, 1e-9));
  }
}

TEST_CASE("mkv_step rejects malformed inputs") {
  TabularEnv e = env::virus_env(2);
  PolicySlice u = uniform_slice(2, 2);
  CHECK_THROWS_AS(mkv_step(MeanField{{0.7, 0.7}}, u, e), std::invalid_argument);
  CHECK_THROWS_AS(mkv_step(MeanField{{-0.1, 1.1}}, u, e), std::invalid_argument);
  PolicySlice bad = u;
  bad.act[0] = {0.9, 0.9};
  CHECK_THROWS_AS(mkv_step(MeanField{{0.5, 0.5}}, bad, e), std::invalid_argument);
}

TEST_CASE("trajectory probabilities sum to one and match direct products") {
  Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const int T = 2;
    TabularEnv e = random_env2(rng, T);
    PolicyFlow pf = random_policy_flow(rng, 2, 2, T);
    MeanFieldFlow mf = mkv_rollout(e, pf);

    double total = 0.0;
    for (const Trajectory& tau : enumerate_trajectories(e, T)) {
      const double lp = trajectory_log_prob(tau, mf, pf, e);
      // independent product computed inline
      double ref = mf.at[0].p[tau.steps[0].first];
      for (int t = 0; t <= T; ++t) {
        ref *= pf.at[t].act[tau.steps[t].first][tau.steps[t].second];
        if (t < T) ref *= e.transition_row(tau.steps[t].first, tau.steps[t].second, mf.at[t])[tau.steps[t + 1].first];
      }
      CHECK(std::exp(lp) == doctest::Approx(ref).epsilon(1e-12));
      total += std::exp(lp);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("zero-probability factors give -inf log prob") {
  TabularEnv e = env::virus_env(1);
  PolicyFlow pf;
  pf.at.resize(2);
  pf.at[0].act = {{1.0, 0.0}, {1.0, 0.0}};
  pf.at[1].act = {{1.0, 0.0}, {1.0, 0.0}};
  MeanFieldFlow mf = mkv_rollout(e, pf);
  Trajectory tau;
  tau.steps = {{0, 1}, {0, 0}};  // action 1 has policy probability zero
  CHECK(trajectory_log_prob(tau, mf, pf, e) == kNegInf);
  CHECK(!std::isnan(trajectory_log_prob(tau, mf, pf, e)));
}

TEST_CASE("enumerate_trajectories counts and cap") {
  TabularEnv e2 = env::virus_env(1);
  CHECK(enumerate_trajectories(e2, 1).size() == 16);  // (2*2)^2

  TabularEnv e3 = e2;
  e3.num_states = 3;
  CHECK(enumerate_trajectories(e3, 2).size() == 216);  // (3*2)^3

  TabularEnv big = env::malware_env(50);
  try {
    enumerate_trajectories(big, 50);
    FAIL("expected length_error");
  } catch (const std::length_error& err) {
    CHECK(std::string(err.what()).find("1000000") != std::string::npos);
  }
}

TEST_CASE("sampled trajectories converge to the exact distribution") {
  Rng rng(5);
  const int T = 2;
  TabularEnv e = random_env2(rng, T);
  PolicyFlow pf = random_policy_flow(rng, 2, 2, T);
  MeanFieldFlow mf = mkv_rollout(e, pf);

  std::map<std::vector<std::pair<int, int>>, int> counts;
  const int N = 100000;
  Rng sample_rng(99);
  for (int i = 0; i < N; ++i) counts[sample_trajectory(e, &mf, pf, sample_rng).steps]++;

  double tv = 0.0;
  for (const Trajectory& tau : enumerate_trajectories(e, T)) {
    const double p = std::exp(trajectory_log_prob(tau, mf, pf, e));
    const double q = counts.count(tau.steps) ? counts[tau.steps] / double(N) : 0.0;
    tv += std::abs(p - q);
  }
  CHECK(tv / 2.0 < 0.02);
}

TEST_CASE("consistency residual is zero for rolled-out flows") {
  Rng rng(7);
  TabularEnv e = random_env2(rng, 6);
  PolicyFlow pf = random_policy_flow(rng, 2, 2, 6);
  MeanFieldFlow mf = mkv_rollout(e, pf);
  CHECK(consistency_residual(mf, pf, e) == 0.0);
  CHECK(consistency_residual(mf, pf, e, true) == 0.0);

  // perturbing one slice produces a positive residual
  mf.at[3].p = {mf.at[3].p[0] + 0.01, mf.at[3].p[1] - 0.01};
  CHECK(consistency_residual(mf, pf, e) > 0.0);
}

TEST_CASE("sample_trajectory without override uses the rollout flow") {
  TabularEnv e = env::virus_env(3);
  PolicyFlow pf = constant_flow(uniform_slice(2, 2), 3);
  Rng a(42), b(42);
  MeanFieldFlow mf = mkv_rollout(e, pf);
  Trajectory t1 = sample_trajectory(e, nullptr, pf, a);
  Trajectory t2 = sample_trajectory(e, &mf, pf, b);
  CHECK(t1.steps == t2.steps);
}
