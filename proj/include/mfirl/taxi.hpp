#pragma once
// Spatial taxi-ride pricing: trip-record ingestion and cleaning, the
// grid-based empirical model, the price-multiplier reward with a pluggable
// profit kernel, and the pricing experiment harness built on solver/pemmfirl.
//
// Geometry: a lon/lat box cut into square cells, indexed row-major with rows
// following latitude and columns following longitude (cell = row*cols + col).
// Time: one epoch is five minutes; trip timestamps are numeric seconds from
// the start of the observation window.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfirl/mfairl.hpp"
#include "mfirl/mfg.hpp"
#include "mfirl/pemmfirl.hpp"
#include "mfirl/rng.hpp"
#include "mfirl/solver.hpp"

namespace mfirl::taxi {

struct GridBox {
  double lon_min = -73.9, lon_max = -73.8;
  double lat_min = 40.7, lat_max = 40.8;
  double granularity = 0.01;

  int cols() const;
  int rows() const;
  int cells() const { return rows() * cols(); }
};

// Row-major cell index. Lower edges inclusive, upper edges exclusive, except
// the box maximum which maps to the last row/column. Out of box -> throws.
int bin_to_cell(double lon, double lat, const GridBox& box);
std::pair<double, double> cell_center(int cell, const GridBox& box);  // (lon, lat)
double grid_distance(int i, int j, const GridBox& box);  // Euclidean, cell units

struct TripRecord {
  double pickup_time = 0.0;  // seconds
  double dropoff_time = 0.0;
  double pickup_lon = 0.0, pickup_lat = 0.0;
  double dropoff_lon = 0.0, dropoff_lat = 0.0;
  double distance = 0.0;  // miles
};

// Rejection tally; the rules apply in this order and each row is counted
// under the first rule it violates.
struct CleaningReport {
  long long accepted = 0;
  long long bad_timestamps = 0;  // dropoff before pickup
  long long too_short = 0;       // duration under one minute
  long long out_of_box = 0;      // any endpoint outside the box
  long long unreadable = 0;      // malformed rows: counted and skipped, never fatal
  long long total() const {
    return accepted + bad_timestamps + too_short + out_of_box + unreadable;
  }
};

struct IngestResult {
  std::vector<TripRecord> trips;
  CleaningReport report;
};

// In-memory cleaning pass (idempotent: a cleaned set re-cleans to itself).
IngestResult clean_trips(const std::vector<TripRecord>& raw, const GridBox& box);

// Streaming single-pass ingestion of delimiter-separated text (comma or tab,
// detected from the header). Columns are header-mapped and order-insensitive:
// pickup_time, dropoff_time, pickup_lon, pickup_lat, dropoff_lon,
// dropoff_lat, distance; unknown columns are ignored.
IngestResult ingest_trips(const std::string& path, const GridBox& box);

struct GridModel {
  GridBox box;
  double epoch_seconds = 300.0;
  int epochs_observed = 0;
  Vec demand_rate;               // [cell] expected ride requests per epoch
  std::vector<Vec> destination;  // [origin][dest], each row on the simplex
  Vec initial_taxis;             // simplex, from the first K epochs' pickups
  Vec mean_trip_distance;        // [origin] mean trip miles
  std::vector<int> uniform_fallback_origins;  // zero-trip origins, flagged
  Vec eta_s;                     // per-cell price multiplier (config input)
  double eta = 2.33;             // price cap
};

// Destination histograms, per-epoch demand rates, initial taxi distribution
// from pickups in the first `initial_window_epochs` epochs. Zero-trip origins
// fall back to a uniform destination row and are flagged; an empty initial
// window is an error asking for a larger window.
GridModel build_grid_model(const std::vector<TripRecord>& trips, const GridBox& box,
                           int initial_window_epochs);

void save_grid_model(const GridModel& model, const std::string& path);  // JSON
GridModel load_grid_model(const std::string& path);

// Probability that an empty taxi choosing pickup cell j gets a match:
// min(1, demand_j / (mu(j) * fleet)), the demand-availability factor.
double availability(int j, const MeanField& mu, const GridModel& model, double fleet);

// Profit kernel f(i, j, mu[, m]); m is the context value when conditioned.
using ProfitKernel =
    std::function<double(int i, int j, const MeanField& mu, std::optional<double> m)>;

struct KernelConfig {
  double base_fare = 2.0;
  double per_mile = 1.5;
  double fleet = 1.0;          // taxis competing per unit of demand
  double movement_cost = 0.1;  // per cell of grid distance i -> j
  // Context-value modulation (value 1 is the base kernel): longer trips pay
  // more under higher context values, flat fares pay less.
  double per_mile_context_gain = 2.0;
  double base_fare_context_loss = 0.6;
};

// (base + per_mile * mean trip distance from j) * availability(j)
//   - movement_cost * grid_distance(i, j),
// with base/per_mile modulated by the context value when one is given.
ProfitKernel default_kernel(const GridModel& model, const KernelConfig& config);

// (eta^0.5265 - eta_s(i)^0.5265) * f(i, j, mu[, m]); the multiplier is read
// at the taxi's current cell i. Evaluates the formula as given (eta == eta_s
// yields zero); the eta > eta_s configuration check runs at env construction.
double pricing_reward(int i, int j, const MeanField& mu, std::optional<double> m,
                      const GridModel& model, const ProfitKernel& kernel);

struct PricingEnvConfig {
  int horizon = 120;            // five-minute steps
  Vec contexts = {1.0, 2.0};    // context values fed to the kernel
  std::optional<int> action_radius;  // restrict pickup cells near the taxi
  KernelConfig kernel;
};

// TabularEnv over cells: state = empty-taxi position, action = pickup cell.
// On a match the taxi relocates to a drawn destination of j; otherwise it
// moves to j. Throws at construction when eta <= eta_s anywhere.
TabularEnv make_pricing_env(const GridModel& model, const PricingEnvConfig& config,
                            ProfitKernel kernel = nullptr);

// Exact expected profit ledger of one (policy, flow) pair under the kernel at
// an optional eta override: per-epoch expected matched rides and profit.
struct EpochLedgerRow {
  int epoch = 0;
  double rides = 0.0;
  double profit = 0.0;
};
struct ProfitReport {
  double total_rides = 0.0;
  double total_profit = 0.0;
  double avg_profit_per_ride = 0.0;
  std::vector<EpochLedgerRow> per_epoch;
};
ProfitReport evaluate_profit(const GridModel& model, const TabularEnv& env,
                             const solver::Ermfne& pair, std::optional<double> m,
                             const ProfitKernel& kernel, double eta, double fleet);

// Prior-weighted comparison of a method (one pair per true context) against a
// context-blind baseline pair, evaluated at `eta`:
//   decay_rate            = rides_method / rides_baseline - 1   (eta-free)
//   profit_increase_rate  = avg_method / avg_baseline - 1
//   fare_delta_per_ride   = avg_method - avg_baseline
struct ProfitComparison {
  double decay_rate = 0.0;
  double profit_increase_rate = 0.0;
  double fare_delta_per_ride = 0.0;
};
ProfitComparison compare_profit(const GridModel& model, const TabularEnv& env,
                                const ProfitKernel& kernel, const Vec& prior,
                                const solver::Ermfne& baseline,
                                const std::vector<const solver::Ermfne*>& method_by_context,
                                double eta, double fleet);

// Synthetic trip fixture. Destination quotas for the two anchor origins are
// allocated deterministically (counts = rounded shares), background cells get
// light seeded local traffic, and optional dirty rows exercise each cleaning
// rule an exact number of times.
struct FixtureConfig {
  int epochs = 48;
  int trips_cell27 = 1000;
  int trips_cell52 = 800;
  int background_per_cell = 12;
  std::uint64_t seed = 20260815;
  int dirty_bad_timestamps = 0;
  int dirty_too_short = 0;
  int dirty_out_of_box = 0;
  int dirty_unreadable = 0;
};
std::string synthetic_trips_csv(const FixtureConfig& config);

struct PricingExperimentConfig {
  PricingEnvConfig env;
  Vec eta_sweep = {5.0, 10.0, 15.0, 20.0};
  Vec prior = {0.5, 0.5};
  int demo_count = 64;
  int num_seeds = 5;
  std::uint64_t seed = 1;
  double solve_tol = 1e-8;
  int solve_max_iter = 400;
  double solve_damping = 0.5;
  pemmfirl::TrainConfig pemmfirl;
  airl::TrainConfig mfairl;
};

struct PricingOutcome {
  double baseline_profit_per_ride = 0.0;  // at model.eta
  Vec pemmfirl_profits;                   // per seed, at model.eta
  Vec mfairl_profits;
  double pemmfirl_median = 0.0;
  double mfairl_median = 0.0;
  std::string table_csv;  // eta, decay_rate, profit_increase_rate, fare_delta_per_ride
  std::string reference_note;  // published reference rows, not asserted
};

// Baseline equilibrium on the empirical model, context-labeled expert
// demonstrations under the context-conditioned kernel, meta-training and the
// context-blind baseline over num_seeds seeds on identical demos, profit
// evaluation and the swept comparison table (rows for the median-profit
// seed's model).
PricingOutcome run_pricing_experiment(const GridModel& model,
                                      const PricingExperimentConfig& config);

}  // namespace mfirl::taxi
