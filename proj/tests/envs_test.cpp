#include <doctest.h>

#include <cmath>

#include "mfirl/envs.hpp"

using namespace mfirl;
using namespace mfirl::env;

TEST_CASE("mean_state") {
  MeanField uniform10;
  uniform10.p.assign(10, 0.1);
  CHECK(mean_state(uniform10) == doctest::Approx(4.5).epsilon(1e-12));

  MeanField point;
  point.p.assign(10, 0.0);
  point.p[7] = 1.0;
  CHECK(mean_state(point) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("discretize_jump full jumps are uniform over the reachable range") {
  Vec p = discretize_jump(5, false);
  for (int s = 0; s < 10; ++s) {
    if (s >= 5)
      CHECK(p[s] == doctest::Approx(0.2).epsilon(1e-12));
    else
      CHECK(p[s] == 0.0);
  }

  Vec top = discretize_jump(9, false);
  CHECK(top[9] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("discretize_jump halved jumps pile mass on short moves") {
  // span 2 halved: floor(chi * 2 / 2) = floor(chi) = 0 a.s.
  Vec p8 = discretize_jump(8, true);
  CHECK(p8[8] == doctest::Approx(1.0).epsilon(1e-12));

  // span 5 halved: k=0 on chi in [0,0.4), k=1 on [0.4,0.8), k=2 on [0.8,1)
  Vec p5 = discretize_jump(5, true);
  CHECK(p5[5] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(p5[6] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(p5[7] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(p5[8] == 0.0);

  for (int s = 0; s < 10; ++s) {
    double sum = 0.0;
    for (double v : discretize_jump(s, true)) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("virus transitions and rewards") {
  TabularEnv e = virus_env(50);
  CHECK(e.num_states == 2);
  CHECK(e.contexts == Vec{0.5, 1.0});

  MeanField mu{{0.4, 0.6}};
  Vec row = e.transition_row(1, 0, mu);
  CHECK(row[0] == doctest::Approx(0.3));
  row = e.transition_row(1, 1, mu);
  CHECK(row[0] == doctest::Approx(0.3));  // recovery ignores the action

  row = e.transition_row(0, 0, mu);
  CHECK(row[1] == doctest::Approx(0.81 * 0.6).epsilon(1e-12));
  row = e.transition_row(0, 1, mu);
  CHECK(row[1] == 0.0);

  CHECK(e.reward(1, 1, mu, 1.0) == doctest::Approx(-2.0));
  CHECK(e.reward(0, 0, mu, 0.5) == doctest::Approx(0.0));
  CHECK(e.reward(0, 1, mu, 0.5) == doctest::Approx(-0.5));
}

TEST_CASE("virus infection risk is monotone in the infected share") {
  TabularEnv e = virus_env(10);
  double prev = -1.0;
  for (double q = 0.0; q <= 1.0; q += 0.05) {
    MeanField mu{{1.0 - q, q}};
    double p_inf = e.transition_row(0, 0, mu)[1];
    CHECK(p_inf >= prev);
    prev = p_inf;
  }
}

TEST_CASE("malware rewards and transitions") {
  TabularEnv e = malware_env(50);
  MeanField point9;
  point9.p.assign(10, 0.0);
  point9.p[9] = 1.0;
  CHECK(e.reward(9, 0, point9, 0.2) == doctest::Approx(-8.28).epsilon(1e-12));

  MeanField uniform;
  uniform.p.assign(10, 0.1);
  CHECK(e.reward(0, 1, uniform, 0.4) == doctest::Approx(-0.5));

  Vec row = e.transition_row(6, 1, uniform);
  CHECK(row[0] == doctest::Approx(1.0));
  row = e.transition_row(6, 0, uniform);
  CHECK(row == discretize_jump(6, false));
}

TEST_CASE("invest rewards and regime-switching transitions") {
  TabularEnv e = invest_env(50);
  MeanField uniform;
  uniform.p.assign(10, 0.1);
  CHECK(e.reward(0, 1, uniform, 0.5) == doctest::Approx(-1.4).epsilon(1e-12));

  // hold always keeps the state
  Vec row = e.transition_row(4, 0, uniform);
  CHECK(row[4] == doctest::Approx(1.0));

  // mean 4.5 >= 4: halved jumps; a sparse market gives full jumps
  CHECK(e.transition_row(5, 1, uniform) == discretize_jump(5, true));
  MeanField sparse;
  sparse.p.assign(10, 0.0);
  sparse.p[0] = 1.0;
  CHECK(e.transition_row(5, 1, sparse) == discretize_jump(5, false));
}

TEST_CASE("invest transition is piecewise constant in the mean field") {
  TabularEnv e = invest_env(10);
  // two mean fields on the same side of the threshold give identical rows
  MeanField a, b;
  a.p.assign(10, 0.0);
  b.p.assign(10, 0.0);
  a.p[5] = 1.0;                  // mean 5
  b.p[4] = 0.5; b.p[9] = 0.5;    // mean 6.5
  CHECK(e.transition_row(3, 1, a) == e.transition_row(3, 1, b));
}

TEST_CASE("build_env dispatch and validation") {
  CHECK(build_env("virus", 50).name == "virus");
  CHECK(build_env("malware", 10).horizon == 10);
  CHECK(build_env("invest", 10).contexts == Vec{0.2, 0.5});
  try {
    build_env("stocks", 10);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& err) {
    std::string w = err.what();
    CHECK(w.find("virus") != std::string::npos);
    CHECK(w.find("malware") != std::string::npos);
    CHECK(w.find("invest") != std::string::npos);
  }
  CHECK_THROWS_AS(build_env("virus", 0), std::invalid_argument);
}
