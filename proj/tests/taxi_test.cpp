#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfirl/solver.hpp"
#include "mfirl/taxi.hpp"

using namespace mfirl;
using namespace mfirl::taxi;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << content;
  REQUIRE(out.good());
  return path;
}

TripRecord trip(double pickup, double dropoff, double plon, double plat, double dlon, double dlat,
                double miles = 1.0) {
  return TripRecord{pickup, dropoff, plon, plat, dlon, dlat, miles};
}

// 2x2 grid with hand-set model arrays; small enough to solve in tests.
GridModel tiny_model() {
  GridBox box;
  box.lon_min = 0.0;
  box.lon_max = 0.1;
  box.lat_min = 0.0;
  box.lat_max = 0.1;
  box.granularity = 0.05;
  GridModel m;
  m.box = box;
  m.epochs_observed = 10;
  m.demand_rate = {2.0, 1.0, 0.5, 3.0};
  m.destination = {{0.7, 0.1, 0.1, 0.1},
                   {0.25, 0.25, 0.25, 0.25},
                   {0.1, 0.2, 0.3, 0.4},
                   {0.05, 0.05, 0.8, 0.1}};
  m.initial_taxis = {0.4, 0.3, 0.2, 0.1};
  m.mean_trip_distance = {1.0, 2.0, 0.5, 1.5};
  m.eta_s = {1.0, 1.2, 1.1, 1.0};
  m.eta = 2.33;
  return m;
}

ProfitKernel unit_kernel() {
  return [](int, int, const MeanField&, std::optional<double>) { return 1.0; };
}

}  // namespace

TEST_CASE("grid binning pins the row-major lat/lon convention") {
  const GridBox box;  // default NYC box
  CHECK(box.cols() == 10);
  CHECK(box.rows() == 10);
  CHECK(box.cells() == 100);

  CHECK(bin_to_cell(-73.9, 40.7, box) == 0);
  CHECK(bin_to_cell(-73.8, 40.8, box) == 99);  // box max maps to the last cell
  CHECK(bin_to_cell(-73.845, 40.753, box) == 55);
  CHECK(bin_to_cell(-73.8001, 40.7, box) == 9);
  CHECK(bin_to_cell(-73.9, 40.7999, box) == 90);

  CHECK_THROWS_AS(bin_to_cell(-770.4, 40.75, box), std::invalid_argument);
  CHECK_THROWS_AS(bin_to_cell(-73.85, 40.9, box), std::invalid_argument);
}

TEST_CASE("cell centers bin back to their own cell") {
  const GridBox box;
  for (int c = 0; c < box.cells(); ++c) {
    const auto [lon, lat] = cell_center(c, box);
    CHECK(bin_to_cell(lon, lat, box) == c);
  }
  CHECK(grid_distance(0, 0, box) == 0.0);
  CHECK(grid_distance(0, 9, box) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(grid_distance(0, 11, box) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(grid_distance(27, 36, box) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("cleaning rules fire in order with zero false accepts or rejects") {
  const GridBox box;
  const double lon = -73.845, lat = 40.753;
  std::vector<TripRecord> raw;
  // four valid rows, one exactly at the one-minute boundary
  raw.push_back(trip(0.0, 600.0, lon, lat, lon + 0.01, lat));
  raw.push_back(trip(100.0, 160.0, lon, lat, lon, lat + 0.02));
  raw.push_back(trip(300.0, 1000.0, -73.9, 40.7, -73.8, 40.8));  // box corners are inside
  raw.push_back(trip(50.0, 110.0, lon, lat, lon, lat));
  // rule 1: dropoff before pickup
  raw.push_back(trip(500.0, 400.0, lon, lat, lon, lat));
  // rule 2: under one minute (equal timestamps land here, not in rule 1)
  raw.push_back(trip(500.0, 530.0, lon, lat, lon, lat));
  raw.push_back(trip(500.0, 500.0, lon, lat, lon, lat));
  // rule 3: an endpoint outside the box
  raw.push_back(trip(0.0, 600.0, -770.4, lat, lon, lat));
  raw.push_back(trip(0.0, 600.0, lon, lat, lon, 40.9));
  // rule order: violates rule 1 and rule 3; must count under rule 1 only
  raw.push_back(trip(900.0, 100.0, -770.4, lat, lon, lat));

  const IngestResult cleaned = clean_trips(raw, box);
  CHECK(cleaned.report.accepted == 4);
  CHECK(cleaned.report.bad_timestamps == 2);
  CHECK(cleaned.report.too_short == 2);
  CHECK(cleaned.report.out_of_box == 2);
  CHECK(cleaned.report.unreadable == 0);
  CHECK(cleaned.report.total() == static_cast<long long>(raw.size()));
  CHECK(cleaned.trips.size() == 4);
  for (const TripRecord& t : cleaned.trips) {
    CHECK(t.dropoff_time > t.pickup_time);
    CHECK(t.dropoff_time - t.pickup_time >= 60.0);
    CHECK(bin_to_cell(t.pickup_lon, t.pickup_lat, box) >= 0);
    CHECK(bin_to_cell(t.dropoff_lon, t.dropoff_lat, box) >= 0);
  }

  // idempotence: re-cleaning the accepted set rejects nothing
  const IngestResult again = clean_trips(cleaned.trips, box);
  CHECK(again.report.accepted == 4);
  CHECK(again.report.total() == 4);
}

TEST_CASE("ingestion maps headers by name and counts unreadable rows") {
  const GridBox box;
  SUBCASE("shuffled column order") {
    const std::string csv =
        "distance,pickup_lat,pickup_lon,dropoff_lat,dropoff_lon,dropoff_time,pickup_time\n"
        "3.25,40.753,-73.845,40.71,-73.82,900,120\n";
    const std::string path = write_temp("taxi_shuffled.csv", csv);
    const IngestResult r = ingest_trips(path, box);
    REQUIRE(r.trips.size() == 1);
    CHECK(r.trips[0].pickup_time == 120.0);
    CHECK(r.trips[0].dropoff_time == 900.0);
    CHECK(r.trips[0].pickup_lon == -73.845);
    CHECK(r.trips[0].pickup_lat == 40.753);
    CHECK(r.trips[0].dropoff_lon == -73.82);
    CHECK(r.trips[0].dropoff_lat == 40.71);
    CHECK(r.trips[0].distance == 3.25);
  }
  SUBCASE("tab delimiter") {
    const std::string csv =
        "pickup_time\tdropoff_time\tpickup_lon\tpickup_lat\tdropoff_lon\tdropoff_lat\tdistance\n"
        "0\t600\t-73.845\t40.753\t-73.845\t40.753\t1\n";
    const std::string path = write_temp("taxi_tabs.tsv", csv);
    CHECK(ingest_trips(path, box).trips.size() == 1);
  }
  SUBCASE("missing required column is a structural error") {
    const std::string path = write_temp(
        "taxi_missing.csv",
        "pickup_time,dropoff_time,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat\n0,600,0,0,0,0\n");
    try {
      ingest_trips(path, box);
      FAIL("expected a header error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("distance") != std::string::npos);
    }
  }
  SUBCASE("malformed rows are tallied, never fatal") {
    const std::string csv =
        "pickup_time,dropoff_time,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat,distance\n"
        "0,600,-73.845,40.753,-73.845,40.753,1\n"
        "bogus,600,-73.845,40.753,-73.845,40.753,1\n"
        "1,2,3\n"
        "nan,600,-73.845,40.753,-73.845,40.753,1\n";
    const std::string path = write_temp("taxi_malformed.csv", csv);
    const IngestResult r = ingest_trips(path, box);
    CHECK(r.report.accepted == 1);
    CHECK(r.report.unreadable == 3);
  }
}

TEST_CASE("synthetic fixture ingests exactly and reproduces the anchor histograms") {
  const GridBox box;
  FixtureConfig fc;
  fc.dirty_bad_timestamps = 2;
  fc.dirty_too_short = 3;
  fc.dirty_out_of_box = 4;
  fc.dirty_unreadable = 5;
  const std::string csv = synthetic_trips_csv(fc);
  CHECK(csv == synthetic_trips_csv(fc));  // deterministic in the seed

  const std::string path = write_temp("taxi_fixture.csv", csv);
  const IngestResult r = ingest_trips(path, box);
  const long long clean_count = fc.trips_cell27 + fc.trips_cell52 + 98LL * fc.background_per_cell;
  CHECK(r.report.accepted == clean_count);
  CHECK(r.report.bad_timestamps == 2);
  CHECK(r.report.too_short == 3);
  CHECK(r.report.out_of_box == 4);
  CHECK(r.report.unreadable == 5);

  const GridModel m = build_grid_model(r.trips, box, 3);
  CHECK(m.epochs_observed == fc.epochs);
  CHECK(m.uniform_fallback_origins.empty());
  CHECK(m.demand_rate[27] == fc.trips_cell27 / static_cast<double>(fc.epochs));

  // anchor 27: each recovered share is within 1/1000 of the request
  CHECK(std::abs(m.destination[27][27] - 0.4110) <= 2e-3);
  CHECK(std::abs(m.destination[27][36] - 0.2083) <= 2e-3);
  CHECK(std::abs(m.destination[27][37] - 0.1761) <= 2e-3);
  double ring27 = 0.0;
  for (int c : {16, 17, 18, 26, 27, 28, 36, 37, 38}) ring27 += m.destination[27][c];
  CHECK(std::abs(ring27 - 0.9527) <= 0.012);

  // anchor 52
  CHECK(std::abs(m.destination[52][52] - 0.0837) <= 2e-3);
  CHECK(std::abs(m.destination[52][41] - 0.2763) <= 2e-3);
  CHECK(std::abs(m.destination[52][42] - 0.2023) <= 2e-3);
  double ring52 = 0.0;
  for (int c : {41, 42, 43, 51, 52, 53, 61, 62, 63}) ring52 += m.destination[52][c];
  CHECK(std::abs(ring52 - 0.8755) <= 0.015);

  // every destination row is a distribution
  for (int o = 0; o < box.cells(); ++o) {
    double sum = 0.0;
    for (double v : m.destination[o]) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(is_distribution(m.initial_taxis));
}

TEST_CASE("grid model handles point masses, fallbacks, and bad windows") {
  GridBox box;
  box.lon_min = 0.0;
  box.lon_max = 0.1;
  box.lat_min = 0.0;
  box.lat_max = 0.1;
  box.granularity = 0.05;  // 2x2

  SUBCASE("point-mass destination row is exact") {
    std::vector<TripRecord> trips;
    for (int k = 0; k < 3; ++k)
      trips.push_back(trip(30.0 * k, 30.0 * k + 120.0, 0.02, 0.02, 0.07, 0.02, 2.0 + k));
    const GridModel m = build_grid_model(trips, box, 1);
    CHECK(m.destination[0][1] == 1.0);
    CHECK(m.destination[0][0] == 0.0);
    CHECK(m.mean_trip_distance[0] == 3.0);
    CHECK(m.initial_taxis[0] == 1.0);
    CHECK(m.epochs_observed == 1);
    CHECK(m.demand_rate[0] == 3.0);
    // cells 1..3 saw no pickups: uniform fallback rows, flagged
    REQUIRE(m.uniform_fallback_origins == std::vector<int>{1, 2, 3});
    for (int o = 1; o < 4; ++o)
      for (double v : m.destination[o]) CHECK(v == 0.25);
    // the global mean distance backfills zero-trip origins
    CHECK(m.mean_trip_distance[1] == 3.0);
  }

  SUBCASE("empty initial window demands a larger window") {
    std::vector<TripRecord> trips{trip(400.0, 700.0, 0.02, 0.02, 0.07, 0.02)};
    try {
      build_grid_model(trips, box, 1);
      FAIL("expected an initial-window error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("initial window") != std::string::npos);
    }
    // the same trips are fine once the window covers epoch 1
    CHECK(build_grid_model(trips, box, 2).initial_taxis[0] == 1.0);
  }

  SUBCASE("no trips at all") {
    CHECK_THROWS_AS(build_grid_model({}, box, 1), std::invalid_argument);
  }
}

TEST_CASE("grid model JSON round-trips bit for bit") {
  GridModel m = tiny_model();
  m.uniform_fallback_origins = {2};
  m.eta_s = {1.0, 1.25, 1.5, 1.75};
  const std::string path =
      (std::filesystem::temp_directory_path() / "taxi_model.json").string();
  save_grid_model(m, path);
  const GridModel r = load_grid_model(path);

  CHECK(r.box.lon_min == m.box.lon_min);
  CHECK(r.box.granularity == m.box.granularity);
  CHECK(r.epoch_seconds == m.epoch_seconds);
  CHECK(r.epochs_observed == m.epochs_observed);
  CHECK(r.demand_rate == m.demand_rate);
  CHECK(r.destination == m.destination);
  CHECK(r.initial_taxis == m.initial_taxis);
  CHECK(r.mean_trip_distance == m.mean_trip_distance);
  CHECK(r.uniform_fallback_origins == m.uniform_fallback_origins);
  CHECK(r.eta_s == m.eta_s);
  CHECK(r.eta == m.eta);

  CHECK_THROWS_AS(load_grid_model("/nonexistent/taxi_model.json"), std::invalid_argument);
}

TEST_CASE("availability is the capped demand-to-supply ratio") {
  const GridModel m = tiny_model();
  MeanField mu{{0.25, 0.25, 0.25, 0.25}};
  // demand 2.0 at cell 0, supply 0.25*4=1 -> capped at 1
  CHECK(availability(0, mu, m, 4.0) == 1.0);
  // demand 0.5 at cell 2, supply 1 -> ratio 0.5
  CHECK(availability(2, mu, m, 4.0) == 0.5);
  // no taxis there but demand positive -> certain match
  MeanField empty{{1.0, 0.0, 0.0, 0.0}};
  CHECK(availability(2, empty, m, 4.0) == 1.0);
  // zero demand -> no match regardless of supply
  GridModel z = m;
  z.demand_rate[1] = 0.0;
  CHECK(availability(1, mu, z, 4.0) == 0.0);
}

TEST_CASE("pricing reward reproduces hand values and the formula structure") {
  GridModel m = tiny_model();
  m.eta_s = {1.0, 1.0, 1.0, 1.0};
  const MeanField mu{{0.25, 0.25, 0.25, 0.25}};
  const ProfitKernel one = unit_kernel();

  // eta = 2.33 against a unit multiplier: factor 2.33^0.5265 - 1 ~ 0.5613
  const double factor = pricing_reward(0, 1, mu, std::nullopt, m, one);
  CHECK(factor == doctest::Approx(std::exp(0.5265 * std::log(2.33)) - 1.0).epsilon(1e-12));
  CHECK(factor == doctest::Approx(0.5613).epsilon(2e-4));

  // eta_s equal to the cap: zero reward everywhere
  GridModel flat = m;
  flat.eta_s.assign(4, flat.eta);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(pricing_reward(i, j, mu, std::nullopt, flat, one) == 0.0);

  // linear in the kernel
  const ProfitKernel scaled = [](int, int, const MeanField&, std::optional<double>) {
    return 3.5;
  };
  CHECK(pricing_reward(2, 3, mu, std::nullopt, m, scaled) ==
        doctest::Approx(3.5 * pricing_reward(2, 3, mu, std::nullopt, m, one)).epsilon(1e-12));

  // monotone decreasing in eta_s at the taxi's cell for positive kernels
  double prev = std::numeric_limits<double>::infinity();
  for (double s : {1.0, 1.3, 1.7, 2.0, 2.32}) {
    GridModel g = m;
    g.eta_s[0] = s;
    const double r = pricing_reward(0, 2, mu, std::nullopt, g, one);
    CHECK(r < prev);
    prev = r;
  }

  // the full default kernel, by hand at one point:
  // fare = base + per_mile * mean_dist[j]; avail = min(1, demand_j/(mu_j fleet))
  KernelConfig kc;
  kc.base_fare = 2.0;
  kc.per_mile = 1.5;
  kc.fleet = 4.0;
  kc.movement_cost = 0.1;
  const ProfitKernel def = default_kernel(m, kc);
  const double avail2 = 0.5;  // demand 0.5 / (0.25 * 4)
  const double expect_f = (2.0 + 1.5 * 0.5) * avail2 - 0.1 * grid_distance(0, 2, m.box);
  CHECK(def(0, 2, mu, std::nullopt) == doctest::Approx(expect_f).epsilon(1e-12));
  const double surcharge = std::pow(2.33, 0.5265) - 1.0;
  CHECK(pricing_reward(0, 2, mu, std::nullopt, m, def) ==
        doctest::Approx(surcharge * expect_f).epsilon(1e-12));

  // context value 2 raises the per-mile rate and cuts the flat fare
  const double base2 = 2.0 * (1.0 - kc.base_fare_context_loss);
  const double rate2 = 1.5 * (1.0 + kc.per_mile_context_gain);
  const double expect_f2 = (base2 + rate2 * 0.5) * avail2 - 0.1 * grid_distance(0, 2, m.box);
  CHECK(def(0, 2, mu, 2.0) == doctest::Approx(expect_f2).epsilon(1e-12));
}

TEST_CASE("pricing env validates the cap and mixes transitions by availability") {
  GridModel m = tiny_model();
  PricingEnvConfig cfg;
  cfg.horizon = 4;
  cfg.kernel.fleet = 4.0;

  SUBCASE("eta at or below eta_s anywhere is a construction error") {
    GridModel bad = m;
    bad.eta_s[3] = bad.eta;
    try {
      make_pricing_env(bad, cfg);
      FAIL("expected a cap error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("cell 3") != std::string::npos);
    }
  }

  SUBCASE("transition rows mix the destination draw with a failed-match stay") {
    const TabularEnv env = make_pricing_env(m, cfg);
    CHECK(env.num_states == 4);
    CHECK(env.num_actions == 4);
    CHECK(env.horizon == 4);
    const MeanField mu{{0.25, 0.25, 0.25, 0.25}};
    for (int s = 0; s < 4; ++s)
      for (int a = 0; a < 4; ++a) {
        const Vec row = env.transition_row(s, a, mu);
        const double p = availability(a, mu, m, 4.0);
        double sum = 0.0;
        for (int sp = 0; sp < 4; ++sp) {
          const double want = p * m.destination[a][sp] + (sp == a ? 1.0 - p : 0.0);
          CHECK(row[sp] == doctest::Approx(want).epsilon(1e-15));
          sum += row[sp];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      }
    // the env reward is the pricing reward under the default kernel
    const ProfitKernel def = default_kernel(m, cfg.kernel);
    CHECK(env.reward(1, 3, mu, 1.0) ==
          doctest::Approx(pricing_reward(1, 3, mu, 1.0, m, def)).epsilon(1e-12));
  }

  SUBCASE("an action radius silences far pickups in the soft policy") {
    PricingEnvConfig r = cfg;
    r.action_radius = 1;
    const TabularEnv env = make_pricing_env(m, r);
    MeanFieldFlow flat;
    flat.at.assign(env.horizon + 1, MeanField{{0.25, 0.25, 0.25, 0.25}});
    const PolicyFlow pf = solver::soft_best_response(env, flat, 0);
    // cells 1 and 2 are diagonal from each other (distance sqrt 2 > 1)
    for (int t = 0; t < env.horizon; ++t) {
      CHECK(pf.at[t].act[1][2] == 0.0);
      CHECK(pf.at[t].act[2][1] == 0.0);
      double sum = 0.0;
      for (double v : pf.at[t].act[1]) sum += v;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("profit ledger adds up and a method equal to the baseline changes nothing") {
  const GridModel m = tiny_model();
  PricingEnvConfig cfg;
  cfg.horizon = 6;
  cfg.kernel.fleet = 4.0;
  const TabularEnv env = make_pricing_env(m, cfg);
  const ProfitKernel kernel = default_kernel(m, cfg.kernel);

  bool conv = false;
  const solver::Ermfne eq = solver::solve_ermfne(env, 0, 1e-10, 2000, 0.5, nullptr, &conv);
  REQUIRE(conv);

  const ProfitReport rep = evaluate_profit(m, env, eq, 1.0, kernel, m.eta, 4.0);
  REQUIRE(static_cast<int>(rep.per_epoch.size()) == cfg.horizon);
  // conservation: totals equal an independent (reversed) accumulation of rows
  double rides = 0.0, profit = 0.0;
  for (auto it = rep.per_epoch.rbegin(); it != rep.per_epoch.rend(); ++it) {
    rides += it->rides;
    profit += it->profit;
  }
  CHECK(rides == doctest::Approx(rep.total_rides).epsilon(1e-12));
  CHECK(profit == doctest::Approx(rep.total_profit).epsilon(1e-12));
  CHECK(rep.avg_profit_per_ride == rep.total_profit / rep.total_rides);
  CHECK(rep.total_rides > 0.0);

  // forcing the learned policy to equal the baseline zeroes every column
  const Vec prior{0.5, 0.5};
  const std::vector<const solver::Ermfne*> same{&eq, &eq};
  for (double eta : {5.0, 10.0, 15.0, 20.0}) {
    const ProfitComparison cmp = compare_profit(m, env, kernel, prior, eq, same, eta, 4.0);
    CHECK(cmp.decay_rate == 0.0);
    CHECK(cmp.profit_increase_rate == 0.0);
    CHECK(cmp.fare_delta_per_ride == 0.0);
  }
}

TEST_CASE("reduced-scale pricing experiment runs end to end") {
  const GridModel m = tiny_model();
  PricingExperimentConfig cfg;
  cfg.env.horizon = 6;
  cfg.env.contexts = {1.0, 2.0};
  cfg.env.kernel.fleet = 4.0;
  cfg.prior = {0.5, 0.5};
  cfg.eta_sweep = {5.0, 10.0};
  cfg.demo_count = 12;
  cfg.num_seeds = 2;
  cfg.seed = 7;
  cfg.solve_tol = 1e-8;
  cfg.solve_max_iter = 300;
  cfg.pemmfirl.iterations = 20;
  cfg.pemmfirl.batch_size = 8;
  cfg.pemmfirl.hidden = {16};
  cfg.mfairl.iterations = 20;
  cfg.mfairl.batch_size = 8;
  cfg.mfairl.hidden = {16};

  const PricingOutcome out = run_pricing_experiment(m, cfg);
  CHECK(out.pemmfirl_profits.size() == 2);
  CHECK(out.mfairl_profits.size() == 2);
  for (double p : out.pemmfirl_profits) CHECK(std::isfinite(p));
  for (double p : out.mfairl_profits) CHECK(std::isfinite(p));
  CHECK(std::isfinite(out.baseline_profit_per_ride));
  CHECK(out.baseline_profit_per_ride > 0.0);
  CHECK(std::isfinite(out.pemmfirl_median));
  CHECK(std::isfinite(out.mfairl_median));

  // table: header plus one row per swept eta, all parseable
  std::istringstream table(out.table_csv);
  std::string line;
  REQUIRE(static_cast<bool>(std::getline(table, line)));
  CHECK(line == "eta,decay_rate,profit_increase_rate,fare_delta_per_ride");
  int rows = 0;
  while (std::getline(table, line)) {
    double eta, decay, inc, delta;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &eta, &decay, &inc, &delta) == 4);
    CHECK(eta == cfg.eta_sweep[rows]);
    CHECK(std::isfinite(decay));
    CHECK(std::isfinite(inc));
    CHECK(std::isfinite(delta));
    rows += 1;
  }
  CHECK(rows == 2);
  CHECK(out.reference_note.find("not asserted") != std::string::npos);

  // byte-identical on a rerun: the experiment is deterministic in its config
  const PricingOutcome rerun = run_pricing_experiment(m, cfg);
  CHECK(rerun.table_csv == out.table_csv);
  CHECK(rerun.pemmfirl_profits == out.pemmfirl_profits);
  CHECK(rerun.mfairl_profits == out.mfairl_profits);
}
