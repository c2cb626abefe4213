#include "mfirl/mfairl.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mfirl::airl {

namespace {

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Discriminator::Discriminator(const nn::FeatureCodec& codec_, bool with_context_, Rng& rng,
                             std::vector<int> hidden)
    : codec(codec_), with_context(with_context_) {
  std::vector<int> dims;
  dims.push_back(input_dim());
  for (int h : hidden) dims.push_back(h);
  dims.push_back(1);
  f = nn::Mlp(dims, nn::Head::Scalar);
  f.init_uniform(rng);
}

int Discriminator::input_dim() const { return codec.dim(true, true, true, with_context); }

void Discriminator::encode_input(int s, int a, const Vec& mu, std::optional<int> m,
                                 Vec& out) const {
  codec.encode(s, a, &mu, with_context ? m : std::nullopt, out);
}

double Discriminator::f_value(int s, int a, const Vec& mu, std::optional<int> m) const {
  Vec in;
  encode_input(s, a, mu, m, in);
  nn::Mlp::Trace tr;
  return f.forward(in, tr)[0];
}

double discriminator_value(double f_value, double pi_prob) {
  check(pi_prob >= 0.0, "discriminator: negative policy probability");
  if (pi_prob == 0.0) return 1.0;
  return sigmoid(f_value - std::log(pi_prob));
}

MeanFieldFlow empirical_mean_field(const std::vector<Trajectory>& trajectories, int num_states) {
  check(!trajectories.empty(), "empirical mean field needs at least one trajectory");
  const size_t len = trajectories.front().steps.size();
  check(len >= 1, "empirical mean field: empty trajectory");
  MeanFieldFlow mf;
  mf.at.resize(len);
  for (auto& slice : mf.at) slice.p.assign(num_states, 0.0);
  const double inv = 1.0 / static_cast<double>(trajectories.size());
  for (const Trajectory& tau : trajectories) {
    check(tau.steps.size() == len, "empirical mean field: ragged trajectory lengths");
    for (size_t t = 0; t < len; ++t) {
      const int s = tau.steps[t].first;
      check(s >= 0 && s < num_states, "empirical mean field: state out of range");
      mf.at[t].p[s] += inv;
    }
  }
  return mf;
}

namespace {

// Distinct (t, s, a) occurrence counts over expert / sampler batches,
// t restricted to 0..T-1 (the final slice carries no reward term).
struct ItemTable {
  int T = 0, S = 0, A = 0;
  std::vector<int> slot;            // dense (t*S+s)*A+a -> item index or -1
  std::vector<int> t, s, a;         // per item
  std::vector<double> ce, cs;       // accumulated batch weights

  ItemTable(int T_, int S_, int A_) : T(T_), S(S_), A(A_) {
    slot.assign(static_cast<size_t>(T) * S * A, -1);
  }
  int upsert(int tt, int ss, int aa) {
    const size_t key = (static_cast<size_t>(tt) * S + ss) * A + aa;
    if (slot[key] < 0) {
      slot[key] = static_cast<int>(t.size());
      t.push_back(tt);
      s.push_back(ss);
      a.push_back(aa);
      ce.push_back(0.0);
      cs.push_back(0.0);
    }
    return slot[key];
  }
};

}  // namespace

double discriminator_objective_grad(Discriminator& d, const std::vector<Trajectory>& expert_batch,
                                    const std::vector<Trajectory>& sampler_batch,
                                    const MeanFieldFlow& mu_hat, std::optional<int> m,
                                    const PolicyFlow& sampler_pi, Vec* grad) {
  check(!expert_batch.empty() && !sampler_batch.empty(), "discriminator: empty batch");
  const int T = mu_hat.horizon();
  const int S = d.codec.num_states, A = d.codec.num_actions;
  check(T >= 1, "discriminator: horizon must be at least 1");
  check(sampler_pi.horizon() == T, "discriminator: policy/mean-field horizon mismatch");

  ItemTable items(T, S, A);
  const double we = 1.0 / static_cast<double>(expert_batch.size());
  const double ws = 1.0 / static_cast<double>(sampler_batch.size());
  for (const Trajectory& tau : expert_batch) {
    check(tau.horizon() == T, "discriminator: expert trajectory horizon mismatch");
    for (int t = 0; t < T; ++t) items.ce[items.upsert(t, tau.steps[t].first, tau.steps[t].second)] += we;
  }
  for (const Trajectory& tau : sampler_batch) {
    check(tau.horizon() == T, "discriminator: sampled trajectory horizon mismatch");
    for (int t = 0; t < T; ++t) items.cs[items.upsert(t, tau.steps[t].first, tau.steps[t].second)] += ws;
  }

  double objective = 0.0;
  Vec in;
  nn::Mlp::Trace tr;
  for (size_t i = 0; i < items.t.size(); ++i) {
    const int t = items.t[i], s = items.s[i], a = items.a[i];
    d.encode_input(s, a, mu_hat.at[t].p, m, in);
    const double fv = d.f.forward(in, tr)[0];
    const double pi = sampler_pi.at[t].act[s][a];
    const double z = pi > 0.0 ? fv - std::log(pi) : std::numeric_limits<double>::infinity();
    const double log_d = -softplus(-z);       // log D
    const double log_1md = -softplus(z);      // log (1 - D)
    objective += items.ce[i] * log_d + items.cs[i] * log_1md;
    if (grad) {
      const double dv = sigmoid(z);
      const double coeff = items.ce[i] * (1.0 - dv) - items.cs[i] * dv;
      d.f.backward(tr, {coeff}, grad);
    }
  }
  return objective;
}

double discriminator_update(Discriminator& d, const std::vector<Trajectory>& expert_batch,
                            const std::vector<Trajectory>& sampler_batch,
                            const MeanFieldFlow& mu_hat, std::optional<int> m,
                            const PolicyFlow& sampler_pi, nn::AdamState& opt) {
  Vec grad(d.f.params(), 0.0);
  const double objective = discriminator_objective_grad(d, expert_batch, sampler_batch, mu_hat,
                                                        m, sampler_pi, &grad);
  if (!std::isfinite(objective)) return objective;
  for (double& g : grad) g = -g;  // ascent
  try {
    opt.step(d.f.w, grad);
  } catch (const std::invalid_argument&) {
    // non-finite gradient: leave parameters untouched, caller logs the value
  }
  return objective;
}

SamplerFlow::SamplerFlow(const nn::FeatureCodec& codec_, int horizon_, bool with_context_,
                         std::optional<int> context_, Rng& rng, std::vector<int> hidden)
    : codec(codec_), with_context(with_context_), context(context_), horizon(horizon_) {
  check(horizon >= 1, "sampler flow: horizon must be at least 1");
  std::vector<int> dims;
  dims.push_back(codec.dim(true, false, false, with_context));
  for (int h : hidden) dims.push_back(h);
  dims.push_back(codec.num_actions);
  nets.reserve(horizon);
  for (int t = 0; t < horizon; ++t) {
    nets.emplace_back(dims, nn::Head::Softmax);
    nets.back().init_uniform(rng);
  }
}

PolicyFlow SamplerFlow::to_policy_flow() const {
  const int S = codec.num_states, A = codec.num_actions;
  PolicyFlow pf;
  pf.at.resize(horizon + 1);
  Vec in;
  nn::Mlp::Trace tr;
  for (int t = 0; t < horizon; ++t) {
    pf.at[t].act.resize(S);
    for (int s = 0; s < S; ++s) {
      codec.encode(s, std::nullopt, nullptr, with_context ? context : std::nullopt, in);
      pf.at[t].act[s] = nets[t].forward(in, tr);
    }
  }
  pf.at[horizon].act.assign(S, Vec(A, 1.0 / A));
  return pf;
}

double sampler_update(SamplerFlow& flow, const Discriminator& d, const MeanFieldFlow& mu_hat,
                      std::optional<int> m, const std::vector<Trajectory>& rollouts,
                      std::vector<nn::AdamState>& opts) {
  const int T = flow.horizon;
  const int S = flow.codec.num_states, A = flow.codec.num_actions;
  check(mu_hat.horizon() == T, "sampler update: mean-field horizon mismatch");
  check(!rollouts.empty(), "sampler update: no rollouts");
  check(static_cast<int>(opts.size()) == T, "sampler update: one optimizer per timestep");
  const int N = static_cast<int>(rollouts.size());

  // Forward every visited (t, s) once; traces are reused for the aggregated
  // backward pass.
  std::vector<int> ts_slot(static_cast<size_t>(T) * S, -1);
  std::vector<nn::Mlp::Trace> traces;
  std::vector<int> slot_t, slot_s;
  Vec in;
  const auto policy_slot = [&](int t, int s) {
    const size_t key = static_cast<size_t>(t) * S + s;
    if (ts_slot[key] < 0) {
      ts_slot[key] = static_cast<int>(traces.size());
      traces.emplace_back();
      flow.codec.encode(s, std::nullopt, nullptr, flow.with_context ? flow.context : std::nullopt,
                        in);
      flow.nets[t].forward(in, traces.back());
      slot_t.push_back(t);
      slot_s.push_back(s);
    }
    return ts_slot[key];
  };

  // f values for every visited (t, s, a).
  std::vector<int> f_slot(static_cast<size_t>(T) * S * A, -1);
  Vec f_vals;
  nn::Mlp::Trace f_tr;
  const auto f_at = [&](int t, int s, int a) {
    const size_t key = (static_cast<size_t>(t) * S + s) * A + a;
    if (f_slot[key] < 0) {
      f_slot[key] = static_cast<int>(f_vals.size());
      d.encode_input(s, a, mu_hat.at[t].p, m, in);
      f_vals.push_back(d.f.forward(in, f_tr)[0]);
    }
    return f_vals[f_slot[key]];
  };

  // Reward-to-go with the entropy bonus folded in, then a per-timestep batch
  // mean baseline.
  std::vector<Vec> togo(N, Vec(T, 0.0));
  Vec baseline(T, 0.0);
  bool finite = true;
  for (int j = 0; j < N; ++j) {
    const Trajectory& tau = rollouts[j];
    check(tau.horizon() == T, "sampler update: rollout horizon mismatch");
    double acc = 0.0;
    for (int t = T - 1; t >= 0; --t) {
      const auto [s, a] = tau.steps[t];
      const double pi = traces[policy_slot(t, s)].out[a];
      acc += f_at(t, s, a) - std::log(pi);
      togo[j][t] = acc;
      baseline[t] += acc;
    }
    finite = finite && std::isfinite(acc);
  }
  double avg_return = 0.0;
  for (int j = 0; j < N; ++j) avg_return += togo[j][0];
  avg_return /= N;
  for (int t = 0; t < T; ++t) baseline[t] /= N;
  if (!finite) return avg_return;

  // Aggregate logit upstreams per visited (t, s): sum_j adv * (onehot - pi).
  std::vector<Vec> upstream(traces.size(), Vec(A, 0.0));
  for (int j = 0; j < N; ++j) {
    for (int t = 0; t < T; ++t) {
      const auto [s, a] = rollouts[j].steps[t];
      const double adv = (togo[j][t] - baseline[t]) / N;
      const int slot = ts_slot[static_cast<size_t>(t) * S + s];
      Vec& up = upstream[slot];
      const Vec& pi = traces[slot].out;
      for (int a2 = 0; a2 < A; ++a2) up[a2] -= adv * pi[a2];
      up[a] += adv;
    }
  }

  std::vector<Vec> grads(T);
  for (int t = 0; t < T; ++t) grads[t].assign(flow.nets[t].params(), 0.0);
  for (size_t slot = 0; slot < traces.size(); ++slot)
    flow.nets[slot_t[slot]].backward_logits(traces[slot], upstream[slot], &grads[slot_t[slot]]);

  for (int t = 0; t < T; ++t) {
    for (double& g : grads[t]) g = -g;  // ascent
    try {
      opts[t].step(flow.nets[t].w, grads[t]);
    } catch (const std::invalid_argument&) {
      // skip this net's step on non-finite gradients
    }
  }
  return avg_return;
}

PolicyFlow exact_sampler(const TabularEnv& env, const Discriminator& d,
                         const MeanFieldFlow& mu_hat, std::optional<int> m) {
  const solver::RewardOverride f = [&](int s, int a, const MeanField& mu) {
    return d.f_value(s, a, mu.p, m);
  };
  return solver::soft_best_response(env, mu_hat, m.value_or(0), &f);
}

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

AirlState::AirlState(const TabularEnv& env, const TrainConfig& config) {
  Rng root(config.seed);
  Rng init = root.split(1);
  rng_expert = root.split(2);
  rng_rollout = root.split(4);

  codec = {env.num_states, env.num_actions, 1};
  d = Discriminator(codec, false, init, config.hidden);
  sampler = SamplerFlow(codec, env.horizon, false, std::nullopt, init, config.hidden);
  opt_omega.init(d.f.params(), config.lr_omega);
  opt_theta.resize(env.horizon);
  for (int t = 0; t < env.horizon; ++t)
    opt_theta[t].init(sampler.nets[t].params(), config.lr_theta);
}

StepLog train_steps(const TabularEnv& env, const solver::DemonstrationSet& demos,
                    const TrainConfig& config, AirlState& st, int count) {
  check(count >= 0, "train: negative iteration count");
  check(config.batch_size >= 1, "train: batch_size must be >= 1");
  check(!demos.trajectories.empty(), "train: no demonstrations");
  check(demos.trajectories.front().horizon() == env.horizon,
        "train: demo horizon does not match the simulator");

  const int B = config.batch_size;
  const int n_demos = static_cast<int>(demos.trajectories.size());
  const MeanFieldFlow mu_hat = empirical_mean_field(demos.trajectories, env.num_states);

  StepLog log;
  std::vector<Trajectory> expert(B), rollouts(B);
  for (int step = 0; step < count; ++step) {
    const int it = st.iteration + 1;
    const auto t0 = std::chrono::steady_clock::now();

    for (int i = 0; i < B; ++i)
      expert[i] = demos.trajectories[st.rng_expert.uniform_int(n_demos)];

    const PolicyFlow policy = st.sampler.to_policy_flow();
    for (int i = 0; i < B; ++i)
      rollouts[i] = sample_trajectory(env, &mu_hat, policy, st.rng_rollout);

    const double disc_objective =
        discriminator_update(st.d, expert, rollouts, mu_hat, std::nullopt, policy, st.opt_omega);
    const double sampler_return =
        sampler_update(st.sampler, st.d, mu_hat, std::nullopt, rollouts, st.opt_theta);
    if (!std::isfinite(disc_objective) || !std::isfinite(sampler_return))
      ++log.skipped_iterations;

    const double wall =
        config.timing
            ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count()
            : 0.0;
    log.csv_rows += std::to_string(it) + "," + fmt_double(disc_objective) + "," +
                    fmt_double(sampler_return) + "," + fmt_double(wall) + "\n";
    st.iteration = it;
  }
  return log;
}

TrainResult train(const TabularEnv& env, const solver::DemonstrationSet& demos,
                  const TrainConfig& config) {
  check(config.iterations >= 0, "train: negative iteration count");
  TrainResult result{AirlState(env, config), {}, 0};
  result.csv += "# iterations=" + std::to_string(config.iterations) +
                " batch_size=" + std::to_string(config.batch_size) +
                " seed=" + std::to_string(config.seed) +
                " lr_omega=" + fmt_double(config.lr_omega) +
                " lr_theta=" + fmt_double(config.lr_theta) + "\n";
  result.csv += "iter,disc_objective,sampler_return,wall_ms\n";
  const StepLog log = train_steps(env, demos, config, result.state, config.iterations);
  result.csv += log.csv_rows;
  result.skipped_iterations = log.skipped_iterations;
  return result;
}

}  // namespace mfirl::airl
