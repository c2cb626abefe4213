#include "mfirl/validation.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace mfirl::validation {

Vec fd_gradient(const std::function<double(const Vec&)>& fn, Vec& params, double h) {
  Vec grad(params.size(), 0.0);
  for (size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = fn(params);
    params[i] = keep - h;
    const double down = fn(params);
    params[i] = keep;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

GradCompare compare_gradients(const Vec& analytic, const Vec& fd) {
  check(analytic.size() == fd.size(), "gradient size mismatch");
  double scale = 0.0;
  for (size_t i = 0; i < fd.size(); ++i)
    scale = std::max(scale, std::max(std::abs(fd[i]), std::abs(analytic[i])));
  GradCompare out;
  if (scale == 0.0) return out;
  const double floor = 1e-3 * scale;
  for (size_t i = 0; i < fd.size(); ++i) {
    const double rel = std::abs(analytic[i] - fd[i]) / std::max(std::abs(fd[i]), floor);
    if (rel > out.max_rel_err) {
      out.max_rel_err = rel;
      out.worst_index = static_cast<int>(i);
      out.analytic_at_worst = analytic[i];
      out.fd_at_worst = fd[i];
    }
  }
  return out;
}

Vec straight_line_forward(const nn::Mlp& net, const Vec& input) {
  // Recomputes the flat layout from scratch; shares nothing with Mlp::forward.
  Vec x = input;
  int off = 0;
  const int L = static_cast<int>(net.dims.size()) - 1;
  for (int l = 0; l < L; ++l) {
    const int in_n = net.dims[l], out_n = net.dims[l + 1];
    Vec y(out_n);
    for (int i = 0; i < out_n; ++i) {
      double acc = net.w[off + out_n * in_n + i];  // bias
      for (int j = 0; j < in_n; ++j) acc += net.w[off + i * in_n + j] * x[j];
      y[i] = acc;
    }
    off += out_n * in_n + out_n;
    if (l + 1 < L)
      for (double& z : y) z = z > 0.0 ? z : net.slope * z;
    x = std::move(y);
  }
  if (net.head == nn::Head::Softmax) {
    double mx = x[0];
    for (double z : x) mx = std::max(mx, z);
    double sum = 0.0;
    for (double& z : x) {
      z = std::exp(z - mx);
      sum += z;
    }
    for (double& z : x) z /= sum;
  }
  return x;
}

namespace {

// Distance of every hidden pre-activation from the leaky-rectifier kink.
double kink_margin(const nn::Mlp& net, const Vec& input) {
  if (net.layers() < 2) return 1e300;  // single layer: no hidden activations
  nn::Mlp::Trace tr;
  net.forward(input, tr);
  double margin = 1e300;
  for (int l = 0; l < net.layers() - 1; ++l)
    for (double z : tr.pre[l]) margin = std::min(margin, std::abs(z));
  return margin;
}

}  // namespace

GradCheckCase gradient_check_case(Rng& rng, double h) {
  GradCheckCase out;
  const int depth = 1 + rng.uniform_int(3);  // 1..3 layers
  std::vector<int> dims;
  dims.push_back(1 + rng.uniform_int(5));
  for (int l = 0; l < depth - 1; ++l) dims.push_back(1 + rng.uniform_int(7));
  dims.push_back(1 + rng.uniform_int(4));
  out.softmax = rng.uniform01() < 0.5 && dims.back() >= 2;
  out.dims = dims;

  nn::Mlp net(dims, out.softmax ? nn::Head::Softmax : nn::Head::Scalar);
  net.init_uniform(rng);

  // Keep hidden pre-activations away from the kink so central differences at
  // step h stay on one linear piece.
  Vec input(dims.front());
  for (int attempt = 0;; ++attempt) {
    for (double& v : input) v = rng.uniform(-1.5, 1.5);
    if (kink_margin(net, input) > 1e-3) break;
    if (attempt > 200) {
      for (double& v : net.w) v += rng.uniform(-0.05, 0.05);
      attempt = 0;
    }
  }

  // Scalar loss: fixed random projection of the output.
  Vec proj(dims.back());
  for (double& v : proj) v = rng.uniform(-1.0, 1.0);
  const auto loss_at = [&](const nn::Mlp& m) {
    const Vec y = straight_line_forward(m, input);
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) acc += proj[i] * y[i];
    return acc;
  };

  nn::Mlp::Trace tr;
  net.forward(input, tr);
  net.zero_grad();
  Vec input_grad;
  net.backward(tr, proj, nullptr, &input_grad);

  nn::Mlp probe = net;
  const auto fn = [&](const Vec& p) {
    probe.w = p;
    return loss_at(probe);
  };
  Vec params = net.w;
  const Vec fd_params = fd_gradient(fn, params, h);
  out.param_rel_err = compare_gradients(net.g, fd_params).max_rel_err;

  const auto fn_in = [&](const Vec& x) {
    const Vec y = straight_line_forward(net, x);
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) acc += proj[i] * y[i];
    return acc;
  };
  Vec in_copy = input;
  const Vec fd_input = fd_gradient(fn_in, in_copy, h);
  out.input_rel_err = compare_gradients(input_grad, fd_input).max_rel_err;
  return out;
}

GradCheckSummary run_gradient_checks(int n, std::uint64_t seed) {
  Rng rng(seed);
  GradCheckSummary sum;
  for (int i = 0; i < n; ++i) {
    const GradCheckCase c = gradient_check_case(rng);
    ++sum.cases;
    sum.max_param_rel_err = std::max(sum.max_param_rel_err, c.param_rel_err);
    sum.max_input_rel_err = std::max(sum.max_input_rel_err, c.input_rel_err);
  }
  return sum;
}

TabularEnv mean_field_driven_env(int horizon) {
  TabularEnv env;
  env.name = "mean-field-driven";
  env.num_states = 2;
  env.num_actions = 2;
  env.horizon = horizon;
  env.contexts = {0.5, 1.0};
  env.initial_mean_field.p = {0.4, 0.6};
  env.reward = [](int s, int a, const MeanField& mu, double m) {
    return -m * s - 0.3 * a * mu.p[0];
  };
  env.transition = [](int, int, const MeanField& mu, Vec& row) {
    const double p0 = 0.2 + 0.6 * mu.p[0];
    row[0] = p0;
    row[1] = 1.0 - p0;
  };
  return env;
}

MeanFieldFlow mean_field_driven_flow(const TabularEnv& env) {
  PolicyFlow uniform;
  uniform.at.assign(env.horizon + 1,
                    PolicySlice{std::vector<Vec>(
                        env.num_states, Vec(env.num_actions, 1.0 / env.num_actions))});
  return mkv_rollout(env, uniform);
}

SamplerRouteComparison compare_sampler_route(const TabularEnv& env, const MeanFieldFlow& mu_hat,
                                             const airl::Discriminator& d, std::optional<int> m) {
  const PolicyFlow route_pi = airl::exact_sampler(env, d, mu_hat, m);
  const energy::EnergyModel em = energy::build_energy_model(d, mu_hat, m);
  const auto taus = enumerate_trajectories(env, env.horizon);
  SamplerRouteComparison out;
  for (const Trajectory& tau : taus) {
    const double route = std::exp(trajectory_log_prob(tau, mu_hat, route_pi, env));
    const double per_state = std::exp(em.per_state_log_prob(tau));
    const double global = std::exp(em.log_prob(tau));
    out.tv_per_state += std::abs(route - per_state);
    out.tv_global_z += std::abs(route - global);
  }
  out.tv_per_state *= 0.5;
  out.tv_global_z *= 0.5;
  return out;
}

TinyInstance make_tiny_instance(Rng& rng, int num_demos) {
  check(num_demos >= 4, "make_tiny_instance: need at least 4 demos");
  for (int attempt = 0; attempt < 500; ++attempt) {
    TabularEnv env;
    env.name = "tiny";
    env.num_states = 2 + rng.uniform_int(2);
    env.num_actions = 2;
    env.horizon = 2 + rng.uniform_int(2);
    env.contexts = {-1.0, 1.0};
    const int S = env.num_states, A = env.num_actions;

    Vec init(S);
    double z = 0.0;
    for (double& v : init) z += (v = rng.uniform(0.5, 1.0));
    for (double& v : init) v /= z;
    env.initial_mean_field.p = init;

    auto b0 = std::make_shared<std::vector<Vec>>(S, Vec(A));
    auto b1 = std::make_shared<std::vector<Vec>>(S, Vec(A));
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        (*b0)[s][a] = rng.uniform(-0.7, 0.7);
        (*b1)[s][a] = rng.uniform(-0.5, 0.5);
      }
    env.reward = [b0, b1](int s, int a, const MeanField& mu, double m) {
      return (*b0)[s][a] + m * (*b1)[s][a] + 0.3 * m * mu.p[s];
    };

    // Rows mix a random stochastic matrix with the mean field; every entry
    // stays >= 0.75 * 0.3 / (0.3 + (S-1)), so per-slice state marginals are
    // bounded away from zero and demo coverage is reachable.
    auto rows = std::make_shared<std::vector<std::vector<Vec>>>(S, std::vector<Vec>(A, Vec(S)));
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        double rz = 0.0;
        for (int s2 = 0; s2 < S; ++s2) rz += ((*rows)[s][a][s2] = rng.uniform(0.3, 1.0));
        for (int s2 = 0; s2 < S; ++s2) (*rows)[s][a][s2] /= rz;
      }
    env.transition = [rows](int s, int a, const MeanField& mu, Vec& row) {
      const Vec& r = (*rows)[s][a];
      row.resize(r.size());
      for (size_t s2 = 0; s2 < r.size(); ++s2) row[s2] = 0.75 * r[s2] + 0.25 * mu.p[s2];
    };

    TinyInstance inst;
    inst.env = env;
    inst.prior = {0.5, 0.5};
    try {
      inst.equilibria = solver::solve_all_contexts(env, 1e-10, 5000, 0.5);
    } catch (const solver::NonConvergence&) {
      continue;  // redraw the game
    }
    inst.space = enumerate_trajectories(env, env.horizon);

    bool covered = false;
    for (int redraw = 0; redraw < 200 && !covered; ++redraw) {
      solver::DemonstrationSet ds =
          solver::generate_demonstrations(inst.equilibria, env, inst.prior, num_demos, rng);
      std::vector<std::vector<char>> seen(env.horizon + 1, std::vector<char>(S, 0));
      for (const Trajectory& tau : ds.trajectories)
        for (int t = 0; t <= env.horizon; ++t) seen[t][tau.steps[t].first] = 1;
      covered = true;
      for (const auto& slice : seen)
        for (char c : slice)
          if (!c) covered = false;
      if (covered) inst.demos = ds.trajectories;
    }
    if (!covered) continue;

    nn::FeatureCodec codec{S, A, 2};
    inst.d = airl::Discriminator(codec, true, rng, {6, 5});
    inst.q = pemmfirl::ContextInferenceModel(codec, rng, {5, 4});
    return inst;
  }
  throw std::runtime_error("make_tiny_instance: no viable instance after 500 attempts");
}

namespace {

// Everything omega/psi-dependent, rebuilt per objective evaluation.
struct EnumeratedModel {
  pemmfirl::ConditionalMeanFieldEstimate est;
  std::vector<energy::EnergyModel> em;  // [context]
};

EnumeratedModel build_enumerated_model(const TinyInstance& inst) {
  EnumeratedModel out;
  out.est = pemmfirl::conditional_empirical_mean_field(inst.q, inst.demos, inst.env.num_states);
  for (int m = 0; m < inst.env.num_contexts(); ++m)
    out.em.push_back(energy::build_energy_model(inst.d, out.est.by_context[m], m));
  return out;
}

Vec unit(Vec v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  check(n > 0.0, "unit: zero vector");
  for (double& x : v) x /= n;
  return v;
}

Vec random_unit(int dim, Rng& rng) {
  Vec v(dim);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return unit(std::move(v));
}

double dot(const Vec& a, const Vec& b) {
  check(a.size() == b.size(), "dot: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Projection accumulator for one estimator: fixed directions, running
// first/second moments of the per-resample scalar projections.
struct ProjectionTracker {
  std::vector<Vec> dirs;
  Vec refs, sum, sumsq;

  ProjectionTracker(const Vec& reference, int extra_dirs, Rng& rng) {
    double norm = 0.0;
    for (double x : reference) norm += x * x;
    if (norm > 1e-20) dirs.push_back(unit(reference));
    for (int k = 0; k < extra_dirs; ++k)
      dirs.push_back(random_unit(static_cast<int>(reference.size()), rng));
    refs.resize(dirs.size());
    for (size_t k = 0; k < dirs.size(); ++k) refs[k] = dot(reference, dirs[k]);
    sum.assign(dirs.size(), 0.0);
    sumsq.assign(dirs.size(), 0.0);
  }

  void add(const Vec& estimate) {
    for (size_t k = 0; k < dirs.size(); ++k) {
      const double p = dot(estimate, dirs[k]);
      sum[k] += p;
      sumsq[k] += p * p;
    }
  }

  double worst_z(int n) const {
    double worst = 0.0;
    for (size_t k = 0; k < dirs.size(); ++k) {
      const double mean = sum[k] / n;
      const double var = std::max(0.0, (sumsq[k] - n * mean * mean) / (n - 1));
      const double se = std::sqrt(var / n);
      const double gap = std::abs(mean - refs[k]);
      const double z = se > 0.0 ? gap / se : (gap == 0.0 ? 0.0 : HUGE_VAL);
      worst = std::max(worst, z);
    }
    return worst;
  }
};

}  // namespace

double enumerate_L(const TinyInstance& inst) {
  const EnumeratedModel mdl = build_enumerated_model(inst);
  double total = 0.0;
  for (const Trajectory& tau : inst.space) {
    const Vec probs = inst.q.infer(tau);
    for (int m = 0; m < inst.env.num_contexts(); ++m) {
      const double p = std::exp(mdl.em[m].log_prob(tau));
      if (p > 0.0) total += inst.prior[m] * p * std::log(probs[m]);
    }
  }
  return total;
}

double enumerate_K(const TinyInstance& inst) {
  const EnumeratedModel mdl = build_enumerated_model(inst);
  double total = 0.0;
  for (const Trajectory& tau : inst.space) {
    for (int m = 0; m < inst.env.num_contexts(); ++m) {
      const solver::Ermfne& eq = inst.equilibria.at(m);
      const double pe =
          std::exp(trajectory_log_prob(tau, eq.mean_field_flow, eq.policy_flow, inst.env));
      if (pe > 0.0) total -= inst.prior[m] * pe * mdl.em[m].log_prob(tau);
    }
  }
  return total;
}

EstimatorCheck check_estimators(TinyInstance& inst, int resamples, int batch_size, Rng& rng,
                                int extra_dirs) {
  check(resamples >= 2, "check_estimators: need at least 2 resamples");
  const int M = inst.env.num_contexts();
  check(batch_size >= 2 * M && batch_size % M == 0,
        "check_estimators: batch size must be a multiple of the context count with groups >= 2");

  const Vec ref_l_omega = fd_gradient([&](const Vec&) { return enumerate_L(inst); }, inst.d.f.w);
  const Vec ref_l_psi =
      fd_gradient([&](const Vec&) { return enumerate_L(inst); }, inst.q.encoder.w);
  const Vec ref_k_psi =
      fd_gradient([&](const Vec&) { return enumerate_K(inst); }, inst.q.encoder.w);

  // Estimate and energy models are fixed across resamples (parameters do not
  // move); only the batches are redrawn.
  const pemmfirl::ConditionalMeanFieldEstimate est =
      pemmfirl::conditional_empirical_mean_field(inst.q, inst.demos, inst.env.num_states);
  std::vector<energy::EnergyModel> em;
  for (int m = 0; m < M; ++m) em.push_back(energy::build_energy_model(inst.d, est.by_context[m], m));

  ProjectionTracker track_l_omega(ref_l_omega, extra_dirs, rng);
  ProjectionTracker track_l_psi(ref_l_psi, extra_dirs, rng);
  ProjectionTracker track_k_psi(ref_k_psi, extra_dirs, rng);

  std::vector<int> contexts(batch_size);
  for (int i = 0; i < batch_size; ++i) contexts[i] = i / (batch_size / M);

  EstimatorCheck out;
  for (int r = 0; r < resamples; ++r) {
    pemmfirl::SampledBatch batch;
    batch.context = contexts;
    batch.tau.reserve(batch_size);
    std::vector<Trajectory> expert;
    expert.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
      const int m = contexts[i];
      batch.tau.push_back(em[m].sample(rng));
      const solver::Ermfne& eq = inst.equilibria.at(m);
      expert.push_back(sample_trajectory(inst.env, &eq.mean_field_flow, eq.policy_flow, rng));
    }

    pemmfirl::KappaStats stats;
    track_l_omega.add(pemmfirl::grad_L_omega(inst.d, inst.q, est, batch));
    track_l_psi.add(pemmfirl::grad_L_psi(inst.d, inst.q, est, batch, &stats));
    track_k_psi.add(pemmfirl::grad_K_psi(inst.d, inst.q, est, expert, contexts, batch, &stats));
    out.kappa_clamped += stats.clamped;
  }

  out.z_l_omega = track_l_omega.worst_z(resamples);
  out.z_l_psi = track_l_psi.worst_z(resamples);
  out.z_k_psi = track_k_psi.worst_z(resamples);
  return out;
}

}  // namespace mfirl::validation
