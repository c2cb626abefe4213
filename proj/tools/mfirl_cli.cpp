// mfirl: experiment runner for the mean-field IRL library. Subcommands cover
// the full pipeline (solve equilibria, draw demonstrations, train, evaluate,
// plot) plus the taxi data tooling and the numeric oracle checks. Every
// output file can be regenerated bit for bit from its embedded config + seed.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfirl/checkpoint.hpp"
#include "mfirl/config.hpp"
#include "mfirl/envs.hpp"
#include "mfirl/metrics.hpp"
#include "mfirl/mfairl.hpp"
#include "mfirl/mfg.hpp"
#include "mfirl/pemmfirl.hpp"
#include "mfirl/runner.hpp"
#include "mfirl/solver.hpp"
#include "mfirl/svg.hpp"
#include "mfirl/taxi.hpp"
#include "mfirl/validation.hpp"

namespace fs = std::filesystem;
using namespace mfirl;

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Everything any subcommand consumes. Values resolve in three layers:
// config-file keys, then MFIRL_* environment overrides, then explicit flags.
struct Opts {
  std::string config_path;
  std::string env = "virus";
  std::string taxi_model;  // when set, the environment is the pricing MFG
  int horizon = 50;
  int contexts = 2;
  std::string algo = "pemmfirl";
  std::string seeds = "0";
  int iterations = 2000;
  int batch_size = 64;
  int count = 1000;  // demo count
  double lr_omega = 1e-4, lr_psi = 1e-4, lr_theta = 1e-4;
  double tol = 1e-10;
  int max_iter = 10000;
  double damping = 0.0;
  int workers = 2;
  std::string outdir = "out";
  // taxi knobs
  double fleet = 60.0, base_fare = 2.0, per_mile = 1.5, movement_cost = 0.1;
  std::string etas = "5,10,15,20";
  int window = 3;
  int num_seeds = 5;
  int demo_count = 64;
  bool self_check = false;
  // stop after this many new iterations per invocation (0 = run to the end);
  // models interruption, so it is not part of the experiment echo
  int step_limit = 0;

  config::KeyValues kv;  // raw provenance
};

Opts load_opts(int argc, char** argv) {
  Opts o;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) o.config_path = argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) o.config_path = arg.substr(9);
  }
  if (!o.config_path.empty()) o.kv = config::parse_file(o.config_path);
  config::apply_env_overrides(o.kv);

  o.env = o.kv.get("env", o.env);
  o.taxi_model = o.kv.get("taxi_model", o.taxi_model);
  o.horizon = o.kv.get_int("horizon", o.horizon);
  o.contexts = o.kv.get_int("contexts", o.contexts);
  o.algo = o.kv.get("algo", o.algo);
  o.seeds = o.kv.get("seeds", o.seeds);
  o.iterations = o.kv.get_int("iterations", o.iterations);
  o.batch_size = o.kv.get_int("batch_size", o.batch_size);
  o.count = o.kv.get_int("count", o.count);
  o.lr_omega = o.kv.get_double("lr_omega", o.lr_omega);
  o.lr_psi = o.kv.get_double("lr_psi", o.lr_psi);
  o.lr_theta = o.kv.get_double("lr_theta", o.lr_theta);
  o.tol = o.kv.get_double("tol", o.tol);
  o.max_iter = o.kv.get_int("max_iter", o.max_iter);
  o.damping = o.kv.get_double("damping", o.damping);
  o.workers = o.kv.get_int("workers", o.workers);
  o.outdir = o.kv.get("outdir", o.outdir);
  o.fleet = o.kv.get_double("fleet", o.fleet);
  o.base_fare = o.kv.get_double("base_fare", o.base_fare);
  o.per_mile = o.kv.get_double("per_mile", o.per_mile);
  o.movement_cost = o.kv.get_double("movement_cost", o.movement_cost);
  o.etas = o.kv.get("etas", o.etas);
  o.window = o.kv.get_int("window", o.window);
  o.num_seeds = o.kv.get_int("num_seeds", o.num_seeds);
  o.demo_count = o.kv.get_int("demo_count", o.demo_count);
  return o;
}

// Canonical echo of every experiment-defining field, preceded by the raw
// config lines; this block heads every file the run writes. Placement and
// scheduling knobs (outdir, workers, step limits) are deliberately left out:
// they cannot change any computed number, and leaving them out keeps reruns
// of the same experiment byte-identical wherever they land.
std::string echo_effective(const Opts& o) {
  std::string out = o.kv.echo();
  const auto field = [&out](const std::string& k, const std::string& v) {
    out += "# " + k + " = " + v + "\n";
  };
  field("env", o.env);
  field("taxi_model", o.taxi_model);
  field("horizon", std::to_string(o.horizon));
  field("contexts", std::to_string(o.contexts));
  field("algo", o.algo);
  field("seeds", o.seeds);
  field("iterations", std::to_string(o.iterations));
  field("batch_size", std::to_string(o.batch_size));
  field("count", std::to_string(o.count));
  field("lr_omega", fmt_double(o.lr_omega));
  field("lr_psi", fmt_double(o.lr_psi));
  field("lr_theta", fmt_double(o.lr_theta));
  field("tol", fmt_double(o.tol));
  field("max_iter", std::to_string(o.max_iter));
  field("damping", fmt_double(o.damping));
  return out;
}

TabularEnv build_environment(const Opts& o) {
  if (!o.taxi_model.empty()) {
    const taxi::GridModel model = taxi::load_grid_model(o.taxi_model);
    taxi::PricingEnvConfig cfg;
    cfg.horizon = o.horizon;
    cfg.contexts.resize(o.contexts);
    for (int k = 0; k < o.contexts; ++k) cfg.contexts[k] = k + 1.0;
    cfg.kernel.fleet = o.fleet;
    cfg.kernel.base_fare = o.base_fare;
    cfg.kernel.per_mile = o.per_mile;
    cfg.kernel.movement_cost = o.movement_cost;
    return taxi::make_pricing_env(model, cfg);
  }
  return env::build_env(o.env, o.horizon);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  check(out.good(), "cannot open " + path + " for writing");
  out << text;
  out.flush();
  check(out.good(), "write to " + path + " failed");
}

std::string equilibrium_path(const Opts& o, int context) {
  return o.outdir + "/equilibrium_ctx" + std::to_string(context) + ".csv";
}

std::string equilibrium_csv(const Opts& o, const solver::Ermfne& eq, int context) {
  const int T = eq.mean_field_flow.horizon();
  const int S = eq.mean_field_flow.at[0].size();
  const int A = static_cast<int>(eq.policy_flow.at[0].act[0].size());
  std::string out = echo_effective(o);
  out += "# context = " + std::to_string(context) + "\n";
  out += "# residual = " + fmt_double(eq.final_residual) + "\n";
  out += "# iterations_used = " + std::to_string(eq.iterations_used) + "\n";
  out += "t,s,mu";
  for (int a = 0; a < A; ++a) out += ",pi" + std::to_string(a);
  out += "\n";
  for (int t = 0; t <= T; ++t)
    for (int s = 0; s < S; ++s) {
      out += std::to_string(t) + "," + std::to_string(s) + "," +
             fmt_double(eq.mean_field_flow.at[t].p[s]);
      for (int a = 0; a < A; ++a) out += "," + fmt_double(eq.policy_flow.at[t].act[s][a]);
      out += "\n";
    }
  return out;
}

solver::Ermfne load_equilibrium(const std::string& path, int* horizon_out) {
  std::ifstream in(path);
  check(in.good(), "missing equilibrium file " + path + "; run `mfirl solve` first");
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("t,s,mu", 0) == 0) continue;
    std::vector<double> row;
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
    check(row.size() >= 4, "malformed equilibrium row in " + path);
    rows.push_back(row);
  }
  check(!rows.empty(), "equilibrium file " + path + " has no data rows");
  int T = 0, S = 0;
  const int A = static_cast<int>(rows.front().size()) - 3;
  for (const auto& r : rows) {
    T = std::max(T, static_cast<int>(r[0]));
    S = std::max(S, static_cast<int>(r[1]) + 1);
  }
  solver::Ermfne eq;
  eq.mean_field_flow.at.assign(T + 1, MeanField{Vec(S, 0.0)});
  eq.policy_flow.at.assign(T + 1, PolicySlice{std::vector<Vec>(S, Vec(A, 0.0))});
  for (const auto& r : rows) {
    const int t = static_cast<int>(r[0]), s = static_cast<int>(r[1]);
    eq.mean_field_flow.at[t].p[s] = r[2];
    for (int a = 0; a < A; ++a) eq.policy_flow.at[t].act[s][a] = r[3 + a];
  }
  if (horizon_out) *horizon_out = T;
  return eq;
}

int cmd_solve(const Opts& o) {
  const TabularEnv env = build_environment(o);
  fs::create_directories(o.outdir);
  const std::map<int, solver::Ermfne> eqs =
      solver::solve_all_contexts(env, o.tol, o.max_iter, o.damping);
  for (const auto& [context, eq] : eqs) {
    write_text(equilibrium_path(o, context), equilibrium_csv(o, eq, context));
    std::cout << "context " << context << ": residual " << fmt_double(eq.final_residual)
              << " after " << eq.iterations_used << " iterations -> "
              << equilibrium_path(o, context) << "\n";
  }
  return 0;
}

int cmd_demos(const Opts& o, std::uint64_t seed) {
  const TabularEnv env = build_environment(o);
  check(o.count >= 0, "demo count must be >= 0");
  std::map<int, solver::Ermfne> eqs;
  for (int k = 0; k < env.num_contexts(); ++k) {
    int horizon = 0;
    eqs[k] = load_equilibrium(equilibrium_path(o, k), &horizon);
    check(horizon == o.horizon, "equilibrium file " + equilibrium_path(o, k) + " has horizon " +
                                    std::to_string(horizon) + " but the config says " +
                                    std::to_string(o.horizon));
    eqs[k].context_index = k;
  }
  const Vec prior(env.num_contexts(), 1.0 / env.num_contexts());
  Rng rng(seed);
  solver::DemonstrationSet demos;
  demos.prior = prior;
  demos.horizon = o.horizon;
  if (o.count > 0) demos = solver::generate_demonstrations(eqs, env, prior, o.count, rng);

  std::string body = echo_effective(o);
  body += "# demo_seed = " + std::to_string(seed) + "\n";
  std::string prior_line = "# prior =";
  for (double p : prior) prior_line += " " + fmt_double(p);
  body += prior_line + "\n";
  body += "traj,t,s,a\n";
  std::string contexts = "traj,context\n";
  for (size_t j = 0; j < demos.trajectories.size(); ++j) {
    const Trajectory& tau = demos.trajectories[j];
    for (size_t t = 0; t < tau.steps.size(); ++t)
      body += std::to_string(j) + "," + std::to_string(t) + "," +
              std::to_string(tau.steps[t].first) + "," + std::to_string(tau.steps[t].second) +
              "\n";
    contexts += std::to_string(j) + "," + std::to_string(tau.hidden_context) + "\n";
  }
  fs::create_directories(o.outdir);
  write_text(o.outdir + "/demos.csv", body);
  write_text(o.outdir + "/demos_contexts.csv", contexts);
  std::cout << "wrote " << demos.trajectories.size() << " demonstrations to " << o.outdir
            << "/demos.csv (hidden contexts in demos_contexts.csv, evaluation only)\n";
  return 0;
}

// Loads demos.csv only; hidden contexts stay withheld (-1) so training can
// never see them. Optionally reads the demo horizon from the data.
std::vector<Trajectory> load_demo_trajectories(const std::string& path, int* horizon_out) {
  std::ifstream in(path);
  check(in.good(), "missing demonstration file " + path + "; run `mfirl demos` first");
  std::string line;
  std::map<int, std::map<int, std::pair<int, int>>> by_traj;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("traj,", 0) == 0) continue;
    int traj, t, s, a;
    check(std::sscanf(line.c_str(), "%d,%d,%d,%d", &traj, &t, &s, &a) == 4,
          "malformed demo row in " + path + ": " + line);
    by_traj[traj][t] = {s, a};
  }
  std::vector<Trajectory> out;
  int horizon = -1;
  for (const auto& [traj, steps] : by_traj) {
    Trajectory tau;
    int expect = 0;
    for (const auto& [t, sa] : steps) {
      check(t == expect, "demo " + std::to_string(traj) + " in " + path +
                             " is missing timestep " + std::to_string(expect));
      tau.steps.push_back(sa);
      expect += 1;
    }
    if (horizon < 0) horizon = tau.horizon();
    check(tau.horizon() == horizon, "demo " + std::to_string(traj) + " has a ragged horizon");
    out.push_back(std::move(tau));
  }
  if (horizon_out) *horizon_out = horizon;
  return out;
}

std::vector<int> load_demo_contexts(const std::string& path, size_t expect_count) {
  std::ifstream in(path);
  check(in.good(), "missing evaluation-only context file " + path);
  std::string line;
  std::map<int, int> by_traj;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("traj,", 0) == 0) continue;
    int traj, context;
    check(std::sscanf(line.c_str(), "%d,%d", &traj, &context) == 2,
          "malformed context row in " + path + ": " + line);
    by_traj[traj] = context;
  }
  check(by_traj.size() == expect_count,
        "context file " + path + " does not cover every demonstration");
  std::vector<int> out;
  for (const auto& [traj, context] : by_traj) out.push_back(context);
  return out;
}

std::string seed_dir(const Opts& o, std::uint64_t seed) {
  return o.outdir + "/seed" + std::to_string(seed);
}

void train_one_seed(const Opts& o, const TabularEnv& env, const solver::DemonstrationSet& demos,
                    std::uint64_t seed) {
  const std::string dir = seed_dir(o, seed);
  fs::create_directories(dir);
  const std::string ckpt = dir + "/checkpoint.json";
  const std::string log_path = dir + "/log.csv";
  const std::string header =
      echo_effective(o) + "# seed = " + std::to_string(seed) + "\n" +
      "iter,disc_objective,sampler_return,wall_ms\n";

  if (o.algo == "pemmfirl") {
    pemmfirl::TrainConfig pc;
    pc.iterations = o.iterations;
    pc.batch_size = o.batch_size;
    pc.num_contexts = o.contexts;
    pc.seed = seed;
    pc.lr_omega = o.lr_omega;
    pc.lr_psi = o.lr_psi;
    pc.lr_theta = o.lr_theta;
    pemmfirl::PemmfirlState st(env, pc);
    if (fs::exists(ckpt)) checkpoint::load_pemmfirl(st, ckpt);
    if (st.iteration == 0) write_text(log_path, header);
    if (st.iteration < o.iterations) {
      int count = o.iterations - st.iteration;
      if (o.step_limit > 0) count = std::min(count, o.step_limit);
      const pemmfirl::StepLog log = pemmfirl::meta_train_steps(env, demos, pc, st, count);
      std::ofstream append(log_path, std::ios::app);
      check(append.good(), "cannot append to " + log_path);
      append << log.csv_rows;
      append.flush();
      check(append.good(), "append to " + log_path + " failed");
    }
    checkpoint::save_pemmfirl(st, header, ckpt);
  } else if (o.algo == "mfairl") {
    airl::TrainConfig ac;
    ac.iterations = o.iterations;
    ac.batch_size = o.batch_size;
    ac.seed = seed;
    ac.lr_omega = o.lr_omega;
    ac.lr_theta = o.lr_theta;
    airl::AirlState st(env, ac);
    if (fs::exists(ckpt)) checkpoint::load_airl(st, ckpt);
    if (st.iteration == 0) write_text(log_path, header);
    if (st.iteration < o.iterations) {
      int count = o.iterations - st.iteration;
      if (o.step_limit > 0) count = std::min(count, o.step_limit);
      const airl::StepLog log = airl::train_steps(env, demos, ac, st, count);
      std::ofstream append(log_path, std::ios::app);
      check(append.good(), "cannot append to " + log_path);
      append << log.csv_rows;
      append.flush();
      check(append.good(), "append to " + log_path + " failed");
    }
    checkpoint::save_airl(st, header, ckpt);
  } else {
    throw std::invalid_argument("unknown algorithm '" + o.algo +
                                "'; valid algorithms: pemmfirl, mfairl");
  }
}

int cmd_train(const Opts& o) {
  const TabularEnv env = build_environment(o);
  int horizon = 0;
  solver::DemonstrationSet demos;
  demos.trajectories = load_demo_trajectories(o.outdir + "/demos.csv", &horizon);
  check(!demos.trajectories.empty(), "no demonstrations in " + o.outdir + "/demos.csv");
  check(horizon == env.horizon, "demos have horizon " + std::to_string(horizon) +
                                    " but the environment has horizon " +
                                    std::to_string(env.horizon));
  demos.horizon = horizon;
  demos.prior.assign(o.contexts, 1.0 / o.contexts);  // never read by training

  const std::vector<std::uint64_t> seeds = config::parse_seeds(o.seeds);
  check(!seeds.empty(), "no seeds given");
  const std::vector<runner::SeedResult> results =
      runner::run_seeds(seeds, o.workers, [&](std::uint64_t seed) {
        train_one_seed(o, env, demos, seed);
      });
  int failures = 0;
  for (const runner::SeedResult& r : results) {
    if (r.ok) {
      std::cout << "seed " << r.seed << ": ok -> " << seed_dir(o, r.seed) << "\n";
    } else {
      failures += 1;
      std::cerr << "error: seed " << r.seed << ": " << r.error << "\n";
    }
  }
  return failures == 0 ? 0 : 1;
}

double median_of(Vec v) {
  check(!v.empty(), "median of an empty vector");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double variance_of(const Vec& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

// Reads a per-seed training log back into (iteration, objective, return).
struct LogCurves {
  Vec iter, disc, ret;
};
LogCurves load_log(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "missing training log " + path);
  LogCurves c;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("iter,", 0) == 0) continue;
    double it, disc, ret, wall;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &it, &disc, &ret, &wall) != 4) continue;
    c.iter.push_back(it);
    c.disc.push_back(disc);
    c.ret.push_back(ret);
  }
  return c;
}

int cmd_eval(const Opts& o) {
  const TabularEnv env = build_environment(o);
  fs::create_directories(o.outdir);
  const Vec prior(env.num_contexts(), 1.0 / env.num_contexts());
  const std::map<int, solver::Ermfne> expert_eqs =
      solver::solve_all_contexts(env, o.tol, o.max_iter, o.damping);
  std::map<int, PolicyFlow> expert_pf;
  for (const auto& [m, eq] : expert_eqs) expert_pf[m] = eq.policy_flow;

  std::string eval_csv = echo_effective(o) + "seed,policy_deviation,return_gap,accuracy\n";

  if (o.self_check) {
    const double dev = metrics::policy_deviation(expert_pf, expert_pf, prior);
    const double gap = metrics::expected_return_gap(env, expert_eqs, expert_eqs, prior);
    eval_csv += "expert," + fmt_double(dev) + "," + fmt_double(gap) + ",1\n";
    write_text(o.outdir + "/eval.csv", eval_csv);
    std::string summary = "metric,median,variance\n";
    summary += "policy_deviation," + fmt_double(dev) + ",0\n";
    summary += "return_gap," + fmt_double(gap) + ",0\n";
    write_text(o.outdir + "/summary.csv", summary);
    std::cout << "self-check: policy_deviation " << fmt_double(dev) << ", return_gap "
              << fmt_double(gap) << "\n";
    return 0;
  }

  std::vector<Trajectory> demos = load_demo_trajectories(o.outdir + "/demos.csv", nullptr);
  const std::vector<int> hidden =
      load_demo_contexts(o.outdir + "/demos_contexts.csv", demos.size());
  for (size_t j = 0; j < demos.size(); ++j) demos[j].hidden_context = hidden[j];

  const std::vector<std::uint64_t> seeds = config::parse_seeds(o.seeds);
  check(!seeds.empty(), "no seeds given");

  Vec devs, gaps, accs;
  std::vector<svg::Series> disc_series, ret_series;
  for (const std::uint64_t seed : seeds) {
    const std::string ckpt = seed_dir(o, seed) + "/checkpoint.json";
    check(fs::exists(ckpt), "missing checkpoint " + ckpt + "; run `mfirl train` first");
    std::map<int, solver::Ermfne> learned;
    double acc = std::numeric_limits<double>::quiet_NaN();
    if (o.algo == "pemmfirl") {
      pemmfirl::TrainConfig pc;
      pc.num_contexts = o.contexts;
      pc.seed = seed;
      pemmfirl::PemmfirlState st(env, pc);
      checkpoint::load_pemmfirl(st, ckpt);
      const pemmfirl::LabelAlignment align = pemmfirl::align_labels(st.q, demos);
      std::map<int, solver::Ermfne> raw =
          pemmfirl::reward_induced_equilibria(env, st.d, o.contexts);
      for (int m = 0; m < o.contexts; ++m) learned[m] = raw.at(align.to_learner[m]);
      acc = align.accuracy;
    } else if (o.algo == "mfairl") {
      airl::TrainConfig ac;
      ac.seed = seed;
      airl::AirlState st(env, ac);
      checkpoint::load_airl(st, ckpt);
      learned = pemmfirl::reward_induced_equilibria(env, st.d, o.contexts);
    } else {
      throw std::invalid_argument("unknown algorithm '" + o.algo +
                                  "'; valid algorithms: pemmfirl, mfairl");
    }
    std::map<int, PolicyFlow> learned_pf;
    for (const auto& [m, eq] : learned) learned_pf[m] = eq.policy_flow;
    const double dev = metrics::policy_deviation(expert_pf, learned_pf, prior);
    const double gap = metrics::expected_return_gap(env, expert_eqs, learned, prior);
    devs.push_back(dev);
    gaps.push_back(gap);
    if (std::isfinite(acc)) accs.push_back(acc);
    eval_csv += std::to_string(seed) + "," + fmt_double(dev) + "," + fmt_double(gap) + "," +
                (std::isfinite(acc) ? fmt_double(acc) : std::string("nan")) + "\n";

    const LogCurves curves = load_log(seed_dir(o, seed) + "/log.csv");
    disc_series.push_back({"seed " + std::to_string(seed), curves.iter, curves.disc});
    ret_series.push_back({"seed " + std::to_string(seed), curves.iter, curves.ret});
  }

  write_text(o.outdir + "/eval.csv", eval_csv);
  std::string summary = "metric,median,variance\n";
  summary += "policy_deviation," + fmt_double(median_of(devs)) + "," +
             fmt_double(variance_of(devs)) + "\n";
  summary += "return_gap," + fmt_double(median_of(gaps)) + "," + fmt_double(variance_of(gaps)) +
             "\n";
  if (!accs.empty())
    summary += "accuracy," + fmt_double(median_of(accs)) + "," + fmt_double(variance_of(accs)) +
               "\n";
  write_text(o.outdir + "/summary.csv", summary);
  write_text(o.outdir + "/disc_objective.svg",
             svg::line_chart(disc_series, o.algo + " discriminator objective"));
  write_text(o.outdir + "/sampler_return.svg",
             svg::line_chart(ret_series, o.algo + " sampler return"));
  std::cout << "policy_deviation median " << fmt_double(median_of(devs)) << " variance "
            << fmt_double(variance_of(devs)) << "\n";
  std::cout << "return_gap median " << fmt_double(median_of(gaps)) << " variance "
            << fmt_double(variance_of(gaps)) << "\n";
  if (!accs.empty()) std::cout << "accuracy median " << fmt_double(median_of(accs)) << "\n";
  return 0;
}

int cmd_taxi_ingest(const Opts& o, const std::string& trips_path) {
  const taxi::GridBox box;
  const taxi::IngestResult r = taxi::ingest_trips(trips_path, box);
  check(!r.trips.empty(), "no trips survived cleaning; nothing to model");
  const taxi::GridModel model = taxi::build_grid_model(r.trips, box, o.window);
  fs::create_directories(o.outdir);
  taxi::save_grid_model(model, o.outdir + "/model.json");
  std::cout << "accepted=" << r.report.accepted << " bad_timestamps=" << r.report.bad_timestamps
            << " too_short=" << r.report.too_short << " out_of_box=" << r.report.out_of_box
            << " unreadable=" << r.report.unreadable << "\n";
  std::cout << "wrote " << o.outdir << "/model.json (epochs_observed="
            << model.epochs_observed << ", fallback_origins="
            << model.uniform_fallback_origins.size() << ")\n";
  return 0;
}

int cmd_taxi_fixture(const Opts& o, const std::string& out_path, int epochs, bool dirty) {
  taxi::FixtureConfig fc;
  fc.epochs = epochs;
  if (dirty) {
    fc.dirty_bad_timestamps = 3;
    fc.dirty_too_short = 2;
    fc.dirty_out_of_box = 4;
    fc.dirty_unreadable = 1;
  }
  (void)o;
  write_text(out_path, taxi::synthetic_trips_csv(fc));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_taxi_run(const Opts& o, const std::string& model_path, std::uint64_t seed) {
  const taxi::GridModel model = taxi::load_grid_model(model_path);
  taxi::PricingExperimentConfig cfg;
  cfg.env.horizon = o.horizon;
  cfg.env.contexts = {1.0, 2.0};
  cfg.env.kernel.fleet = o.fleet;
  cfg.env.kernel.base_fare = o.base_fare;
  cfg.env.kernel.per_mile = o.per_mile;
  cfg.env.kernel.movement_cost = o.movement_cost;
  cfg.prior = {0.5, 0.5};
  cfg.eta_sweep.clear();
  for (const std::string& item : config::split_list(o.etas))
    cfg.eta_sweep.push_back(std::stod(item));
  cfg.demo_count = o.demo_count;
  cfg.num_seeds = o.num_seeds;
  cfg.seed = seed;
  cfg.solve_tol = o.tol;
  cfg.solve_max_iter = o.max_iter;
  cfg.solve_damping = o.damping;
  cfg.pemmfirl.iterations = o.iterations;
  cfg.pemmfirl.batch_size = o.batch_size;
  cfg.pemmfirl.seed = seed;
  cfg.mfairl.iterations = o.iterations;
  cfg.mfairl.batch_size = o.batch_size;
  cfg.mfairl.seed = seed;

  const taxi::PricingOutcome out = taxi::run_pricing_experiment(model, cfg);
  fs::create_directories(o.outdir);
  write_text(o.outdir + "/table.csv", echo_effective(o) + out.table_csv);
  std::string profits = echo_effective(o) + "seed,algo,avg_profit_per_ride\n";
  for (size_t i = 0; i < out.pemmfirl_profits.size(); ++i)
    profits += std::to_string(i) + ",pemmfirl," + fmt_double(out.pemmfirl_profits[i]) + "\n";
  for (size_t i = 0; i < out.mfairl_profits.size(); ++i)
    profits += std::to_string(i) + ",mfairl," + fmt_double(out.mfairl_profits[i]) + "\n";
  profits += "baseline,empirical," + fmt_double(out.baseline_profit_per_ride) + "\n";
  write_text(o.outdir + "/profits.csv", profits);
  std::cout << "pemmfirl_median=" << fmt_double(out.pemmfirl_median)
            << " mfairl_median=" << fmt_double(out.mfairl_median)
            << " baseline=" << fmt_double(out.baseline_profit_per_ride) << "\n";
  std::cout << out.reference_note << "\n";
  return 0;
}

int cmd_oracle_check() {
  int failures = 0;
  const auto report = [&failures](const std::string& name, bool pass, const std::string& stat) {
    std::cout << "oracle " << name << ": " << (pass ? "PASS" : "FAIL") << " (" << stat << ")\n";
    if (!pass) failures += 1;
  };

  const validation::GradCheckSummary g = validation::run_gradient_checks(12, 20260815);
  report("network-gradients", g.max_param_rel_err <= 1e-4 && g.max_input_rel_err <= 1e-4,
         "max rel err " + fmt_double(std::max(g.max_param_rel_err, g.max_input_rel_err)));

  {
    const TabularEnv env = validation::mean_field_driven_env(3);
    const MeanFieldFlow flow = validation::mean_field_driven_flow(env);
    nn::FeatureCodec codec{env.num_states, env.num_actions, env.num_contexts()};
    double worst_tv = 0.0;
    Rng rng(7);
    for (int k = 0; k < 5; ++k) {
      airl::Discriminator d(codec, true, rng, {6, 5});
      const validation::SamplerRouteComparison cmp =
          validation::compare_sampler_route(env, flow, d, 0);
      worst_tv = std::max(worst_tv, cmp.tv_per_state);
    }
    report("sampler-route", worst_tv <= 1e-6, "worst TV " + fmt_double(worst_tv));
  }

  {
    Rng rng(20260815);
    double worst_z = 0.0;
    int clamped = 0;
    for (int k = 0; k < 2; ++k) {
      validation::TinyInstance inst = validation::make_tiny_instance(rng);
      const validation::EstimatorCheck chk = validation::check_estimators(inst, 2500, 4, rng);
      worst_z = std::max(worst_z, chk.max_z());
      clamped += chk.kappa_clamped;
    }
    report("gradient-estimators", worst_z < 4.0 && clamped == 0,
           "worst z " + fmt_double(worst_z));
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field IRL experiment runner"};
  app.require_subcommand(1);

  Opts o;
  try {
    o = load_opts(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  std::string trips_path, model_path, fixture_out = "trips.csv";
  int fixture_epochs = 48;
  bool fixture_dirty = false;
  std::uint64_t demo_seed = 0, taxi_seed = 1;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "flat key = value config file");
    cmd->add_option("--env", o.env, "environment name (virus, malware, invest)");
    cmd->add_option("--taxi-model", o.taxi_model, "pricing model JSON (overrides --env)");
    cmd->add_option("--horizon", o.horizon, "time horizon");
    cmd->add_option("--contexts", o.contexts, "context cardinality");
    cmd->add_option("--tol", o.tol, "solver tolerance");
    cmd->add_option("--max-iter", o.max_iter, "solver iteration cap");
    cmd->add_option("--damping", o.damping, "solver damping in [0,1)");
    cmd->add_option("--outdir", o.outdir, "output directory");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve the ERMFNE of every context");
  add_common(solve);

  CLI::App* demos = app.add_subcommand("demos", "draw expert demonstrations from solved equilibria");
  add_common(demos);
  demos->add_option("--count", o.count, "number of trajectories");
  demos->add_option("--seed", demo_seed, "demonstration RNG seed");

  CLI::App* train = app.add_subcommand("train", "train pemmfirl or the mfairl baseline per seed");
  add_common(train);
  train->add_option("--algo", o.algo, "pemmfirl or mfairl");
  train->add_option("--seeds", o.seeds, "comma-separated seed list");
  train->add_option("--iterations", o.iterations, "training iterations");
  train->add_option("--batch-size", o.batch_size, "batch size");
  train->add_option("--lr-omega", o.lr_omega, "reward net learning rate");
  train->add_option("--lr-psi", o.lr_psi, "inference net learning rate");
  train->add_option("--lr-theta", o.lr_theta, "sampler learning rate");
  train->add_option("--workers", o.workers, "worker threads for the seed pool");
  train->add_option("--step-limit", o.step_limit,
                    "stop after this many new iterations (0 = run to the end)");

  CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints against the expert equilibria");
  add_common(eval);
  eval->add_option("--algo", o.algo, "pemmfirl or mfairl");
  eval->add_option("--seeds", o.seeds, "comma-separated seed list");
  eval->add_flag("--self-check", o.self_check, "evaluate the experts against themselves");

  CLI::App* ingest = app.add_subcommand("taxi-ingest", "clean trip records and build a grid model");
  ingest->add_option("--trips", trips_path, "trip record CSV/TSV")->required();
  ingest->add_option("--window", o.window, "initial-distribution window in epochs");
  ingest->add_option("--outdir", o.outdir, "output directory");

  CLI::App* fixture = app.add_subcommand("taxi-fixture", "write the synthetic trip fixture");
  fixture->add_option("--out", fixture_out, "output CSV path");
  fixture->add_option("--epochs", fixture_epochs, "fixture length in epochs");
  fixture->add_flag("--dirty", fixture_dirty, "append rows violating each cleaning rule");

  CLI::App* taxi_run = app.add_subcommand("taxi-run", "pricing experiment on a grid model");
  taxi_run->add_option("--model", model_path, "grid model JSON")->required();
  taxi_run->add_option("--outdir", o.outdir, "output directory");
  taxi_run->add_option("--horizon", o.horizon, "pricing horizon in 5-minute epochs");
  taxi_run->add_option("--etas", o.etas, "comma-separated eta sweep");
  taxi_run->add_option("--num-seeds", o.num_seeds, "training seeds");
  taxi_run->add_option("--demo-count", o.demo_count, "expert demonstrations");
  taxi_run->add_option("--iterations", o.iterations, "training iterations");
  taxi_run->add_option("--batch-size", o.batch_size, "batch size");
  taxi_run->add_option("--seed", taxi_seed, "experiment seed");
  taxi_run->add_option("--tol", o.tol, "solver tolerance");
  taxi_run->add_option("--max-iter", o.max_iter, "solver iteration cap");
  taxi_run->add_option("--damping", o.damping, "solver damping");
  taxi_run->add_option("--fleet", o.fleet, "fleet scale in the availability factor");

  CLI::App* oracle = app.add_subcommand("oracle-check",
                                        "run the enumeration/finite-difference validation suite");
  (void)oracle;

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(solve)) return cmd_solve(o);
    if (app.got_subcommand(demos)) return cmd_demos(o, demo_seed);
    if (app.got_subcommand(train)) return cmd_train(o);
    if (app.got_subcommand(eval)) return cmd_eval(o);
    if (app.got_subcommand(ingest)) return cmd_taxi_ingest(o, trips_path);
    if (app.got_subcommand(fixture)) return cmd_taxi_fixture(o, fixture_out, fixture_epochs,
                                                             fixture_dirty);
    if (app.got_subcommand(taxi_run)) return cmd_taxi_run(o, model_path, taxi_seed);
    if (app.got_subcommand(oracle)) return cmd_oracle_check();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand given\n";
  return 1;
}
