#include "mfirl/taxi.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mfirl::taxi {

namespace {

constexpr double kFareExponent = 0.5265;
// Reward handed to actions outside the configured pickup radius: large enough
// that softmax weight underflows to exactly zero, finite so value backups
// never touch infinity.
constexpr double kRestrictedReward = -1e30;

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool in_box(double lon, double lat, const GridBox& box) {
  return lon >= box.lon_min && lon <= box.lon_max && lat >= box.lat_min && lat <= box.lat_max;
}

enum class RowFate { kAccepted, kBadTimestamps, kTooShort, kOutOfBox };

// First violated rule wins; the rule order is part of the contract.
RowFate classify(const TripRecord& r, const GridBox& box) {
  if (r.dropoff_time < r.pickup_time) return RowFate::kBadTimestamps;
  if (r.dropoff_time - r.pickup_time < 60.0) return RowFate::kTooShort;
  if (!in_box(r.pickup_lon, r.pickup_lat, box) || !in_box(r.dropoff_lon, r.dropoff_lat, box))
    return RowFate::kOutOfBox;
  return RowFate::kAccepted;
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_double(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  const char* last = t.data() + t.size();
  const auto res = std::from_chars(t.data(), last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

double restricted_pricing_reward(int s, int a, const MeanField& mu, std::optional<double> m,
                                 const GridModel& model, const ProfitKernel& kernel,
                                 const std::optional<int>& radius) {
  if (radius && grid_distance(s, a, model.box) > *radius) return kRestrictedReward;
  return pricing_reward(s, a, mu, m, model, kernel);
}

}  // namespace

int GridBox::cols() const {
  check(granularity > 0.0 && lon_max > lon_min && lat_max > lat_min,
        "grid box: inverted or degenerate extent");
  return std::max(1, static_cast<int>(std::llround((lon_max - lon_min) / granularity)));
}

int GridBox::rows() const {
  check(granularity > 0.0 && lon_max > lon_min && lat_max > lat_min,
        "grid box: inverted or degenerate extent");
  return std::max(1, static_cast<int>(std::llround((lat_max - lat_min) / granularity)));
}

int bin_to_cell(double lon, double lat, const GridBox& box) {
  check(in_box(lon, lat, box), "bin_to_cell: (" + fmt_double(lon) + ", " + fmt_double(lat) +
                                   ") lies outside the grid box");
  const int col =
      std::min(box.cols() - 1, static_cast<int>(std::floor((lon - box.lon_min) / box.granularity)));
  const int row =
      std::min(box.rows() - 1, static_cast<int>(std::floor((lat - box.lat_min) / box.granularity)));
  return row * box.cols() + col;
}

std::pair<double, double> cell_center(int cell, const GridBox& box) {
  check(cell >= 0 && cell < box.cells(), "cell_center: cell index out of range");
  const int row = cell / box.cols(), col = cell % box.cols();
  return {box.lon_min + (col + 0.5) * box.granularity,
          box.lat_min + (row + 0.5) * box.granularity};
}

double grid_distance(int i, int j, const GridBox& box) {
  check(i >= 0 && i < box.cells() && j >= 0 && j < box.cells(),
        "grid_distance: cell index out of range");
  const int c = box.cols();
  const double dr = i / c - j / c, dc = i % c - j % c;
  return std::sqrt(dr * dr + dc * dc);
}

IngestResult clean_trips(const std::vector<TripRecord>& raw, const GridBox& box) {
  IngestResult out;
  for (const TripRecord& r : raw) {
    switch (classify(r, box)) {
      case RowFate::kAccepted:
        out.report.accepted += 1;
        out.trips.push_back(r);
        break;
      case RowFate::kBadTimestamps:
        out.report.bad_timestamps += 1;
        break;
      case RowFate::kTooShort:
        out.report.too_short += 1;
        break;
      case RowFate::kOutOfBox:
        out.report.out_of_box += 1;
        break;
    }
  }
  return out;
}

IngestResult ingest_trips(const std::string& path, const GridBox& box) {
  std::ifstream in(path);
  check(in.good(), "ingest_trips: cannot open " + path);
  std::string line;
  check(static_cast<bool>(std::getline(in, line)), "ingest_trips: empty file " + path);
  const char delim = line.find('\t') != std::string::npos ? '\t' : ',';

  static const char* kColumns[7] = {"pickup_time",  "dropoff_time", "pickup_lon", "pickup_lat",
                                    "dropoff_lon", "dropoff_lat",  "distance"};
  int col_index[7];
  std::fill(col_index, col_index + 7, -1);
  const std::vector<std::string> header = split(line, delim);
  for (size_t i = 0; i < header.size(); ++i) {
    const std::string name = trim(header[i]);
    for (int k = 0; k < 7; ++k)
      if (name == kColumns[k]) col_index[k] = static_cast<int>(i);
  }
  for (int k = 0; k < 7; ++k)
    check(col_index[k] >= 0,
          "ingest_trips: header of " + path + " is missing column '" + std::string(kColumns[k]) +
              "'");

  std::vector<TripRecord> raw;
  long long unreadable = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> fields = split(line, delim);
    double v[7];
    bool ok = true;
    for (int k = 0; k < 7 && ok; ++k)
      ok = col_index[k] < static_cast<int>(fields.size()) && parse_double(fields[col_index[k]], v[k]);
    if (!ok) {
      unreadable += 1;
      continue;
    }
    raw.push_back(TripRecord{v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
  }

  IngestResult out = clean_trips(raw, box);
  out.report.unreadable = unreadable;
  return out;
}

GridModel build_grid_model(const std::vector<TripRecord>& trips, const GridBox& box,
                           int initial_window_epochs) {
  check(!trips.empty(), "build_grid_model: no trips to build a model from");
  check(initial_window_epochs >= 1, "build_grid_model: the initial window needs >= 1 epoch");
  GridModel m;
  m.box = box;
  const int n = box.cells();

  std::vector<Vec> counts(n, Vec(n, 0.0));
  Vec pickups(n, 0.0), dist_sum(n, 0.0), initial(n, 0.0);
  double max_time = 0.0, global_dist = 0.0;
  for (const TripRecord& t : trips) {
    const int o = bin_to_cell(t.pickup_lon, t.pickup_lat, box);
    const int d = bin_to_cell(t.dropoff_lon, t.dropoff_lat, box);
    counts[o][d] += 1.0;
    pickups[o] += 1.0;
    dist_sum[o] += t.distance;
    global_dist += t.distance;
    max_time = std::max(max_time, t.pickup_time);
    if (t.pickup_time < initial_window_epochs * m.epoch_seconds) initial[o] += 1.0;
  }

  m.epochs_observed = static_cast<int>(std::floor(max_time / m.epoch_seconds)) + 1;
  m.demand_rate = pickups;
  for (double& v : m.demand_rate) v /= m.epochs_observed;

  m.destination.assign(n, Vec(n, 0.0));
  m.mean_trip_distance.assign(n, global_dist / static_cast<double>(trips.size()));
  for (int o = 0; o < n; ++o) {
    if (pickups[o] > 0.0) {
      for (int d = 0; d < n; ++d) m.destination[o][d] = counts[o][d] / pickups[o];
      m.mean_trip_distance[o] = dist_sum[o] / pickups[o];
    } else {
      for (int d = 0; d < n; ++d) m.destination[o][d] = 1.0 / n;
      m.uniform_fallback_origins.push_back(o);
    }
  }

  double init_total = 0.0;
  for (double v : initial) init_total += v;
  check(init_total > 0.0, "build_grid_model: no pickups in the first " +
                              std::to_string(initial_window_epochs) +
                              " epoch(s); widen the initial window");
  m.initial_taxis = initial;
  for (double& v : m.initial_taxis) v /= init_total;

  m.eta_s.assign(n, 1.0);
  return m;
}

void save_grid_model(const GridModel& model, const std::string& path) {
  nlohmann::json j;
  j["box"] = {{"lon_min", model.box.lon_min},
              {"lon_max", model.box.lon_max},
              {"lat_min", model.box.lat_min},
              {"lat_max", model.box.lat_max},
              {"granularity", model.box.granularity}};
  j["epoch_seconds"] = model.epoch_seconds;
  j["epochs_observed"] = model.epochs_observed;
  j["demand_rate"] = model.demand_rate;
  j["destination"] = model.destination;
  j["initial_taxis"] = model.initial_taxis;
  j["mean_trip_distance"] = model.mean_trip_distance;
  j["uniform_fallback_origins"] = model.uniform_fallback_origins;
  j["eta_s"] = model.eta_s;
  j["eta"] = model.eta;
  std::ofstream out(path);
  check(out.good(), "save_grid_model: cannot open " + path);
  out << j.dump(1) << "\n";
  out.flush();
  check(out.good(), "save_grid_model: write to " + path + " failed");
}

GridModel load_grid_model(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "load_grid_model: cannot open " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  GridModel m;
  const nlohmann::json& b = j.at("box");
  m.box.lon_min = b.at("lon_min").get<double>();
  m.box.lon_max = b.at("lon_max").get<double>();
  m.box.lat_min = b.at("lat_min").get<double>();
  m.box.lat_max = b.at("lat_max").get<double>();
  m.box.granularity = b.at("granularity").get<double>();
  m.epoch_seconds = j.at("epoch_seconds").get<double>();
  m.epochs_observed = j.at("epochs_observed").get<int>();
  m.demand_rate = j.at("demand_rate").get<Vec>();
  m.destination = j.at("destination").get<std::vector<Vec>>();
  m.initial_taxis = j.at("initial_taxis").get<Vec>();
  m.mean_trip_distance = j.at("mean_trip_distance").get<Vec>();
  m.uniform_fallback_origins = j.at("uniform_fallback_origins").get<std::vector<int>>();
  m.eta_s = j.at("eta_s").get<Vec>();
  m.eta = j.at("eta").get<double>();

  const int n = m.box.cells();
  bool sized = static_cast<int>(m.demand_rate.size()) == n &&
               static_cast<int>(m.destination.size()) == n &&
               static_cast<int>(m.initial_taxis.size()) == n &&
               static_cast<int>(m.mean_trip_distance.size()) == n &&
               static_cast<int>(m.eta_s.size()) == n;
  for (const Vec& row : m.destination) sized = sized && static_cast<int>(row.size()) == n;
  check(sized, "load_grid_model: " + path + " does not match its own grid box size");
  return m;
}

double availability(int j, const MeanField& mu, const GridModel& model, double fleet) {
  check(j >= 0 && j < static_cast<int>(model.demand_rate.size()) && j < mu.size(),
        "availability: cell index out of range");
  const double demand = model.demand_rate[j];
  if (demand <= 0.0) return 0.0;
  const double supply = mu.p[j] * fleet;
  return supply <= demand ? 1.0 : demand / supply;
}

ProfitKernel default_kernel(const GridModel& model, const KernelConfig& config) {
  return [model, config](int i, int j, const MeanField& mu, std::optional<double> m) {
    const double mv = m.value_or(1.0);
    const double base = config.base_fare * (1.0 - config.base_fare_context_loss * (mv - 1.0));
    const double rate = config.per_mile * (1.0 + config.per_mile_context_gain * (mv - 1.0));
    const double fare = base + rate * model.mean_trip_distance[j];
    return fare * availability(j, mu, model, config.fleet) -
           config.movement_cost * grid_distance(i, j, model.box);
  };
}

double pricing_reward(int i, int j, const MeanField& mu, std::optional<double> m,
                      const GridModel& model, const ProfitKernel& kernel) {
  check(i >= 0 && i < static_cast<int>(model.eta_s.size()), "pricing_reward: state out of range");
  const double surcharge =
      std::pow(model.eta, kFareExponent) - std::pow(model.eta_s[i], kFareExponent);
  return surcharge * kernel(i, j, mu, m);
}

TabularEnv make_pricing_env(const GridModel& model, const PricingEnvConfig& config,
                            ProfitKernel kernel) {
  const int n = model.box.cells();
  check(static_cast<int>(model.eta_s.size()) == n && static_cast<int>(model.demand_rate.size()) == n,
        "make_pricing_env: model arrays do not match the grid");
  check(static_cast<int>(model.initial_taxis.size()) == n,
        "make_pricing_env: initial taxi distribution does not match the grid");
  check(config.horizon >= 1, "make_pricing_env: horizon must be >= 1");
  for (int c = 0; c < n; ++c)
    check(model.eta > model.eta_s[c], "make_pricing_env: price cap eta (" + fmt_double(model.eta) +
                                          ") must exceed eta_s at every cell; cell " +
                                          std::to_string(c) + " has eta_s " +
                                          fmt_double(model.eta_s[c]));
  if (!kernel) kernel = default_kernel(model, config.kernel);

  TabularEnv env;
  env.name = "taxi-pricing";
  env.num_states = n;
  env.num_actions = n;
  env.horizon = config.horizon;
  env.contexts = config.contexts;
  env.initial_mean_field = MeanField{model.initial_taxis};

  const std::optional<int> radius = config.action_radius;
  env.reward = [model, kernel, radius](int s, int a, const MeanField& mu, double m) {
    return restricted_pricing_reward(s, a, mu, m, model, kernel, radius);
  };
  const double fleet = config.kernel.fleet;
  env.transition = [model, fleet](int s, int a, const MeanField& mu, Vec& row) {
    (void)s;
    const double p = availability(a, mu, model, fleet);
    const Vec& dest = model.destination[a];
    for (size_t sp = 0; sp < dest.size(); ++sp) row[sp] = p * dest[sp];
    row[a] += 1.0 - p;
  };
  return env;
}

ProfitReport evaluate_profit(const GridModel& model, const TabularEnv& env,
                             const solver::Ermfne& pair, std::optional<double> m,
                             const ProfitKernel& kernel, double eta, double fleet) {
  const int n = model.box.cells();
  check(env.num_states == n && env.num_actions == n,
        "evaluate_profit: environment does not match the grid");
  const int T = pair.mean_field_flow.horizon();
  check(pair.policy_flow.horizon() == T, "evaluate_profit: flow/policy horizon mismatch");

  ProfitReport rep;
  const double cap = std::pow(eta, kFareExponent);
  for (int t = 0; t < T; ++t) {
    const MeanField& mu = pair.mean_field_flow.at[t];
    const PolicySlice& pi = pair.policy_flow.at[t];
    EpochLedgerRow row;
    row.epoch = t;
    for (int i = 0; i < n; ++i) {
      const double w = mu.p[i];
      if (w <= 0.0) continue;
      const double surcharge = cap - std::pow(model.eta_s[i], kFareExponent);
      for (int j = 0; j < n; ++j) {
        const double wij = w * pi.act[i][j];
        if (wij <= 0.0) continue;
        row.rides += wij * availability(j, mu, model, fleet);
        row.profit += wij * surcharge * kernel(i, j, mu, m);
      }
    }
    rep.total_rides += row.rides;
    rep.total_profit += row.profit;
    rep.per_epoch.push_back(row);
  }
  rep.avg_profit_per_ride = rep.total_rides > 0.0 ? rep.total_profit / rep.total_rides : 0.0;
  return rep;
}

namespace {

struct Tally {
  double rides = 0.0, profit = 0.0;
  double avg() const { return rides > 0.0 ? profit / rides : 0.0; }
};

Tally prior_weighted(const GridModel& model, const TabularEnv& env, const ProfitKernel& kernel,
                     const Vec& prior, const std::vector<const solver::Ermfne*>& by_context,
                     double eta, double fleet) {
  check(prior.size() == by_context.size() && prior.size() == env.contexts.size(),
        "profit comparison: prior, context list, and method pairs must line up");
  Tally t;
  for (size_t k = 0; k < prior.size(); ++k) {
    const ProfitReport rep =
        evaluate_profit(model, env, *by_context[k], env.contexts[k], kernel, eta, fleet);
    t.rides += prior[k] * rep.total_rides;
    t.profit += prior[k] * rep.total_profit;
  }
  return t;
}

double median(Vec v) {
  check(!v.empty(), "median of an empty vector");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ProfitComparison compare_profit(const GridModel& model, const TabularEnv& env,
                                const ProfitKernel& kernel, const Vec& prior,
                                const solver::Ermfne& baseline,
                                const std::vector<const solver::Ermfne*>& method_by_context,
                                double eta, double fleet) {
  std::vector<const solver::Ermfne*> base_by_context(prior.size(), &baseline);
  const Tally base = prior_weighted(model, env, kernel, prior, base_by_context, eta, fleet);
  const Tally method = prior_weighted(model, env, kernel, prior, method_by_context, eta, fleet);
  check(base.rides > 0.0 && base.profit != 0.0,
        "compare_profit: baseline serves no rides or earns zero profit");

  ProfitComparison cmp;
  cmp.decay_rate = method.rides / base.rides - 1.0;
  cmp.profit_increase_rate = method.avg() / base.avg() - 1.0;
  cmp.fare_delta_per_ride = method.avg() - base.avg();
  return cmp;
}

namespace {

std::vector<int> ring_cells(int c, const GridBox& box, bool include_self) {
  const int cols = box.cols(), rows = box.rows();
  const int r = c / cols, col = c % cols;
  std::vector<int> out;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      if (!include_self && dr == 0 && dc == 0) continue;
      const int rr = r + dr, cc = col + dc;
      if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
      out.push_back(rr * cols + cc);
    }
  return out;
}

// Apportion `total` trips over shares so each count is within one trip of
// share*total (largest remainder), which keeps recovered histograms within
// 1/total of the requested proportions.
std::vector<int> largest_remainder(const std::vector<double>& share, int total) {
  const int k = static_cast<int>(share.size());
  std::vector<int> count(k, 0);
  std::vector<std::pair<double, int>> rem(k);
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    const double exact = share[i] * total;
    count[i] = static_cast<int>(std::floor(exact));
    rem[i] = {exact - count[i], i};
    assigned += count[i];
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (int i = 0; i < total - assigned; ++i) count[rem[i % k].second] += 1;
  return count;
}

void emit_origin_trips(std::string& csv, int origin, const std::vector<int>& dest_cells,
                       const std::vector<int>& dest_counts, int epochs, const GridBox& box,
                       Rng& rng) {
  int k = 0;
  for (size_t d = 0; d < dest_cells.size(); ++d) {
    const auto [dlon, dlat] = cell_center(dest_cells[d], box);
    const auto [olon, olat] = cell_center(origin, box);
    for (int c = 0; c < dest_counts[d]; ++c, ++k) {
      const int epoch = k % epochs;
      const double pickup = epoch * 300.0 + 30.0 + 5.0 * ((k * 7) % 48);
      const double plon = olon + rng.uniform(-0.004, 0.004);
      const double plat = olat + rng.uniform(-0.004, 0.004);
      const double qlon = dlon + rng.uniform(-0.004, 0.004);
      const double qlat = dlat + rng.uniform(-0.004, 0.004);
      const double miles =
          69.0 * std::sqrt((plon - qlon) * (plon - qlon) + (plat - qlat) * (plat - qlat)) + 0.2 +
          rng.uniform(0.0, 0.1);
      const double dropoff = pickup + 60.0 + miles * 240.0;
      csv += fmt_double(pickup);
      csv += ',';
      csv += fmt_double(dropoff);
      csv += ',';
      csv += fmt_double(plon);
      csv += ',';
      csv += fmt_double(plat);
      csv += ',';
      csv += fmt_double(qlon);
      csv += ',';
      csv += fmt_double(qlat);
      csv += ',';
      csv += fmt_double(miles);
      csv += '\n';
    }
  }
}

struct AnchorShare {
  int cell;
  double share;
};

// Destination mix for an anchor origin: named heavy cells, the remaining ring
// share split evenly, a small far-field share split over four spread cells.
void emit_anchor(std::string& csv, int origin, int trips,
                 const std::vector<AnchorShare>& named, double ring_share,
                 const std::vector<int>& far_cells, double far_share, int epochs,
                 const GridBox& box, Rng& rng) {
  std::vector<int> cells;
  std::vector<double> shares;
  for (const AnchorShare& a : named) {
    cells.push_back(a.cell);
    shares.push_back(a.share);
  }
  std::vector<int> ring_rest = ring_cells(origin, box, true);
  std::erase_if(ring_rest, [&](int c) {
    return std::find(cells.begin(), cells.end(), c) != cells.end();
  });
  for (int c : ring_rest) {
    cells.push_back(c);
    shares.push_back(ring_share / ring_rest.size());
  }
  for (int c : far_cells) {
    cells.push_back(c);
    shares.push_back(far_share / far_cells.size());
  }
  emit_origin_trips(csv, origin, cells, largest_remainder(shares, trips), epochs, box, rng);
}

}  // namespace

std::string synthetic_trips_csv(const FixtureConfig& config) {
  check(config.epochs >= 1, "synthetic_trips_csv: need at least one epoch");
  const GridBox box;  // the default 10x10 box
  Rng rng(config.seed);
  std::string csv =
      "pickup_time,dropoff_time,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat,distance\n";

  // Anchor origin 27: heavy self-loop plus the two cells one row up, 95.27%
  // of trips within one ring.
  emit_anchor(csv, 27, config.trips_cell27,
              {{27, 0.4110}, {36, 0.2083}, {37, 0.1761}}, 0.1573, {3, 45, 60, 93}, 0.0473,
              config.epochs, box, rng);
  // Anchor origin 52: weak self-loop, most trips to the row below, 87.55%
  // within one ring.
  emit_anchor(csv, 52, config.trips_cell52,
              {{52, 0.0837}, {41, 0.2763}, {42, 0.2023}}, 0.3132, {8, 20, 77, 95}, 0.1245,
              config.epochs, box, rng);

  // Light background traffic: every other cell sends a few local trips.
  for (int c = 0; c < box.cells(); ++c) {
    if (c == 27 || c == 52 || config.background_per_cell <= 0) continue;
    const std::vector<int> ring = ring_cells(c, box, true);
    std::vector<int> counts(ring.size(), 0);
    for (int k = 0; k < config.background_per_cell; ++k)
      counts[rng.uniform_int(static_cast<int>(ring.size()))] += 1;
    emit_origin_trips(csv, c, ring, counts, config.epochs, box, rng);
  }

  // Dirty rows, one violation class each; the out-of-box longitude is the
  // canonical impossible value seen in raw dumps.
  for (int k = 0; k < config.dirty_bad_timestamps; ++k)
    csv += "1000,900,-73.845,40.753,-73.845,40.753,1\n";
  for (int k = 0; k < config.dirty_too_short; ++k)
    csv += "1000,1030,-73.845,40.753,-73.845,40.753,0.1\n";
  for (int k = 0; k < config.dirty_out_of_box; ++k)
    csv += "1000,1600,-770.4,40.753,-73.845,40.753,2\n";
  for (int k = 0; k < config.dirty_unreadable; ++k)
    csv += "bogus,1600,-73.845,40.753,-73.845,40.753,2\n";
  return csv;
}

PricingOutcome run_pricing_experiment(const GridModel& model,
                                      const PricingExperimentConfig& config) {
  const int num_contexts = static_cast<int>(config.prior.size());
  check(num_contexts >= 1 && static_cast<int>(config.env.contexts.size()) == num_contexts,
        "run_pricing_experiment: prior and context values must line up");
  check(config.num_seeds >= 1, "run_pricing_experiment: need at least one seed");

  const TabularEnv env = make_pricing_env(model, config.env);
  const ProfitKernel kernel = default_kernel(model, config.env.kernel);
  const double fleet = config.env.kernel.fleet;

  // Baseline: equilibrium of the empirical model under the context-free
  // profit (the kernel at its base context value).
  const std::optional<int> radius = config.env.action_radius;
  const solver::RewardOverride base_reward = [&](int s, int a, const MeanField& mu) {
    return restricted_pricing_reward(s, a, mu, std::nullopt, model, kernel, radius);
  };
  bool conv = false;
  const solver::Ermfne baseline =
      solver::solve_ermfne(env, 0, config.solve_tol, config.solve_max_iter, config.solve_damping,
                           &base_reward, &conv);

  // Context-conditioned experts and their demonstrations.
  std::map<int, solver::Ermfne> experts;
  for (int k = 0; k < num_contexts; ++k)
    experts[k] = solver::solve_ermfne(env, k, config.solve_tol, config.solve_max_iter,
                                      config.solve_damping, nullptr, &conv);
  Rng demo_rng(config.seed);
  const solver::DemonstrationSet demos =
      solver::generate_demonstrations(experts, env, config.prior, config.demo_count, demo_rng);

  PricingOutcome out;
  std::vector<std::vector<const solver::Ermfne*>> pem_models(config.num_seeds);
  std::vector<std::vector<std::map<int, solver::Ermfne>>> keep;  // owns the solved pairs
  keep.resize(config.num_seeds);

  for (int seed = 0; seed < config.num_seeds; ++seed) {
    pemmfirl::TrainConfig pc = config.pemmfirl;
    pc.num_contexts = num_contexts;
    pc.seed = config.pemmfirl.seed + static_cast<std::uint64_t>(seed);
    pemmfirl::TrainResult pr = pemmfirl::meta_train(env, demos, pc);
    const pemmfirl::LabelAlignment align =
        pemmfirl::align_labels(pr.state.q, demos.trajectories);
    keep[seed].push_back(pemmfirl::reward_induced_equilibria(
        env, pr.state.d, num_contexts, config.solve_tol, config.solve_max_iter,
        config.solve_damping));
    std::vector<const solver::Ermfne*> by_context(num_contexts);
    for (int k = 0; k < num_contexts; ++k)
      by_context[k] = &keep[seed].back().at(align.to_learner[k]);
    pem_models[seed] = by_context;
    out.pemmfirl_profits.push_back(
        prior_weighted(model, env, kernel, config.prior, by_context, model.eta, fleet).avg());

    airl::TrainConfig ac = config.mfairl;
    ac.seed = config.mfairl.seed + static_cast<std::uint64_t>(seed);
    airl::TrainResult ar = airl::train(env, demos, ac);
    keep[seed].push_back(pemmfirl::reward_induced_equilibria(
        env, ar.state.d, num_contexts, config.solve_tol, config.solve_max_iter,
        config.solve_damping));
    std::vector<const solver::Ermfne*> blind(num_contexts);
    for (int k = 0; k < num_contexts; ++k) blind[k] = &keep[seed].back().at(k);
    out.mfairl_profits.push_back(
        prior_weighted(model, env, kernel, config.prior, blind, model.eta, fleet).avg());
  }

  std::vector<const solver::Ermfne*> base_by_context(num_contexts, &baseline);
  out.baseline_profit_per_ride =
      prior_weighted(model, env, kernel, config.prior, base_by_context, model.eta, fleet).avg();
  out.pemmfirl_median = median(out.pemmfirl_profits);
  out.mfairl_median = median(out.mfairl_profits);

  // Table rows come from the seed whose profit sits closest to the median.
  int table_seed = 0;
  for (int seed = 1; seed < config.num_seeds; ++seed)
    if (std::abs(out.pemmfirl_profits[seed] - out.pemmfirl_median) <
        std::abs(out.pemmfirl_profits[table_seed] - out.pemmfirl_median))
      table_seed = seed;

  out.table_csv = "eta,decay_rate,profit_increase_rate,fare_delta_per_ride\n";
  for (double eta : config.eta_sweep) {
    const ProfitComparison cmp = compare_profit(model, env, kernel, config.prior, baseline,
                                                pem_models[table_seed], eta, fleet);
    out.table_csv += fmt_double(eta) + "," + fmt_double(cmp.decay_rate) + "," +
                     fmt_double(cmp.profit_increase_rate) + "," +
                     fmt_double(cmp.fare_delta_per_ride) + "\n";
  }

  out.reference_note =
      "reference values from the original NYC study (not asserted; the source dataset is not "
      "bundled): eta=5: decay -0.4%, profit +2.8%, fare delta +$0.1308 | eta=10: -0.5%, +2.3%, "
      "+$0.1074 | eta=15: -0.6%, +3.4%, +$0.1589 | eta=20: -0.7%, +3.1%, +$0.1448";
  return out;
}

}  // namespace mfirl::taxi
