#include "mfirl/pemmfirl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "mfirl/metrics.hpp"

namespace mfirl::pemmfirl {

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Group batch indices by context value; vector index = context, so iteration
// order is deterministic.
std::vector<std::vector<int>> group_by_context(const std::vector<int>& context, int num_contexts) {
  std::vector<std::vector<int>> groups(num_contexts);
  for (size_t i = 0; i < context.size(); ++i) {
    check(context[i] >= 0 && context[i] < num_contexts, "context label out of range");
    groups[context[i]].push_back(static_cast<int>(i));
  }
  return groups;
}

// Shared tail of both conditional_empirical_mean_field overloads: degenerate
// check plus the responsibility-weighted state histograms.
void finish_conditional_estimate(ConditionalMeanFieldEstimate& est,
                                 const std::vector<Trajectory>& demos, int T, int M) {
  for (int m = 0; m < M; ++m)
    if (est.total[m] < 1e-12) throw DegenerateContext(m, est.total[m]);

  est.by_context.assign(M, MeanFieldFlow{});
  for (int m = 0; m < M; ++m) {
    est.by_context[m].at.assign(T + 1, MeanField{Vec(est.num_states, 0.0)});
    for (size_t j = 0; j < demos.size(); ++j) {
      const double w = est.resp[m][j] / est.total[m];
      for (int t = 0; t <= T; ++t) {
        const int s = demos[j].steps[t].first;
        check(s >= 0 && s < est.num_states,
              "conditional_empirical_mean_field: state out of range");
        est.by_context[m].at[t].p[s] += w;
      }
    }
  }
}

}  // namespace

ContextInferenceModel::ContextInferenceModel(const nn::FeatureCodec& codec_, Rng& rng,
                                             const std::vector<int>& hidden)
    : codec(codec_) {
  std::vector<int> dims;
  dims.push_back(codec.num_states + codec.num_actions);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(codec.num_contexts);
  encoder = nn::Mlp(dims, nn::Head::Softmax);
  encoder.init_uniform(rng);
}

Vec ContextInferenceModel::infer(const Trajectory& tau) const {
  return encoder.forward(codec.encode_trajectory_pooled(tau));
}

Vec ContextInferenceModel::infer(const Trajectory& tau, nn::Mlp::Trace& trace) const {
  return encoder.forward(codec.encode_trajectory_pooled(tau), trace);
}

Vec log_probs_from_trace(const nn::Mlp& net, const nn::Mlp::Trace& trace) {
  (void)net;
  const Vec& z = trace.pre.back();
  double mx = kNegInf;
  for (double v : z) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double log_z = mx + std::log(sum);
  Vec out(z.size());
  for (size_t i = 0; i < z.size(); ++i) out[i] = z[i] - log_z;
  return out;
}

ConditionalMeanFieldEstimate conditional_empirical_mean_field(const ContextInferenceModel& q,
                                                              const std::vector<Trajectory>& demos,
                                                              int num_states) {
  check(!demos.empty(), "conditional_empirical_mean_field: empty demo batch");
  const int T = demos.front().horizon();
  const int M = q.num_contexts();

  ConditionalMeanFieldEstimate est;
  est.demos = &demos;
  est.num_states = num_states;
  est.resp.assign(M, Vec(demos.size(), 0.0));
  est.total.assign(M, 0.0);
  est.traces.resize(demos.size());

  for (size_t j = 0; j < demos.size(); ++j) {
    check(demos[j].horizon() == T, "conditional_empirical_mean_field: ragged horizons");
    const Vec probs = q.infer(demos[j], est.traces[j]);
    for (int m = 0; m < M; ++m) {
      est.resp[m][j] = probs[m];
      est.total[m] += probs[m];
    }
  }
  finish_conditional_estimate(est, demos, T, M);
  return est;
}

ConditionalMeanFieldEstimate conditional_empirical_mean_field(
    const std::function<Vec(const Trajectory&)>& responsibilities, int num_contexts,
    const std::vector<Trajectory>& demos, int num_states) {
  check(!demos.empty(), "conditional_empirical_mean_field: empty demo batch");
  check(num_contexts >= 1, "conditional_empirical_mean_field: need at least one context");
  const int T = demos.front().horizon();

  ConditionalMeanFieldEstimate est;
  est.demos = &demos;
  est.num_states = num_states;
  est.resp.assign(num_contexts, Vec(demos.size(), 0.0));
  est.total.assign(num_contexts, 0.0);

  for (size_t j = 0; j < demos.size(); ++j) {
    check(demos[j].horizon() == T, "conditional_empirical_mean_field: ragged horizons");
    const Vec probs = responsibilities(demos[j]);
    check(static_cast<int>(probs.size()) == num_contexts,
          "conditional_empirical_mean_field: responsibility length mismatch");
    for (int m = 0; m < num_contexts; ++m) {
      check(probs[m] >= 0.0, "conditional_empirical_mean_field: negative responsibility");
      est.resp[m][j] = probs[m];
      est.total[m] += probs[m];
    }
  }
  finish_conditional_estimate(est, demos, T, num_contexts);
  return est;
}

KappaStats accumulate_kappa_sum(airl::Discriminator& d, ContextInferenceModel& q,
                                const ConditionalMeanFieldEstimate& est,
                                const std::vector<KappaTerm>& terms, Vec& grad) {
  KappaStats stats;
  if (terms.empty()) return stats;
  check(est.demos != nullptr && !est.by_context.empty(), "kappa: estimate not initialized");
  check(est.traces.size() == est.demos->size(),
        "kappa: estimate lacks encoder traces, so it carries no psi-derivatives");
  check(static_cast<int>(grad.size()) == q.encoder.params(), "kappa: grad size mismatch");

  const int M = q.num_contexts();
  const int S = est.num_states;
  const int A = d.codec.num_actions;
  const int slices = static_cast<int>(est.by_context[0].at.size());
  const int T = slices - 1;

  // Per-context tables: table[m][t*S + s] accumulates the coefficient of
  // d mu_hat^t(s|m) / d psi across all terms.
  std::vector<Vec> table(M);
  // Cache of the f input-gradient on the mean-field block, keyed by
  // (context, t, s, a); second member is <g, mu_hat^t(.|m)>.
  std::map<long long, std::pair<Vec, double>> g_cache;
  Vec input;
  nn::Mlp::Trace trace;
  Vec scratch(d.f.params(), 0.0), input_grad;

  for (const KappaTerm& term : terms) {
    check(term.tau != nullptr, "kappa: null trajectory");
    check(term.context >= 0 && term.context < M, "kappa: context out of range");
    check(term.tau->horizon() == T, "kappa: horizon mismatch with the estimate");
    const int m = term.context;
    if (table[m].empty()) table[m].assign(static_cast<size_t>(slices) * S, 0.0);
    const MeanFieldFlow& mu = est.by_context[m];

    for (int t = 0; t <= T; ++t) {
      const auto [hs, ha] = term.tau->steps[t];
      double* row = table[m].data() + static_cast<size_t>(t) * S;

      if (t < T) {
        const long long key = ((static_cast<long long>(m) * slices + t) * S + hs) * A + ha;
        auto it = g_cache.find(key);
        if (it == g_cache.end()) {
          d.encode_input(hs, ha, mu.at[t].p, m, input);
          d.f.forward(input, trace);
          d.f.backward(trace, {1.0}, &scratch, &input_grad);
          Vec g(input_grad.begin() + S + A, input_grad.begin() + S + A + S);
          double dot = 0.0;
          for (int s = 0; s < S; ++s) dot += g[s] * mu.at[t].p[s];
          it = g_cache.emplace(key, std::make_pair(std::move(g), dot)).first;
        }
        const Vec& g = it->second.first;
        const double dot = it->second.second;
        for (int s = 0; s < S; ++s) row[s] += term.coeff * (g[s] - dot);
      }

      double mass = mu.at[t].p[hs];
      if (mass < 1e-12) {
        mass = 1e-12;
        ++stats.clamped;
      }
      // d log mu_hat^t(s^t) / d mu_hat^t(.): 1/mass at s^t plus the -1 that
      // normalization contributes at every coordinate.
      for (int s = 0; s < S; ++s) row[s] -= term.coeff;
      row[hs] += term.coeff / mass;
    }
  }

  // Collapse through the estimator: d mu_hat^t(s|m)/d psi =
  //   sum_j (w_j/W) (1{s_j^t = s} - mu_hat^t(s|m)) d log q(m|tau_j)/d psi.
  // Every table row was stored centered (<row, mu_hat^t(.|m)> = 0), so the
  // -mu_hat part contracts to zero and only the indicator at s_j^t survives;
  // each demo then needs one logit-level backward pass with upstream
  // c_{j,m} (e_m - q(.|tau_j)) summed over contexts.
  const std::vector<Trajectory>& demos = *est.demos;
  Vec upstream(M);
  for (size_t j = 0; j < demos.size(); ++j) {
    double c_total = 0.0;
    std::fill(upstream.begin(), upstream.end(), 0.0);
    bool any = false;
    for (int m = 0; m < M; ++m) {
      if (table[m].empty()) continue;
      double val = 0.0;
      for (int t = 0; t <= T; ++t) val += table[m][static_cast<size_t>(t) * S + demos[j].steps[t].first];
      const double c = (est.resp[m][j] / est.total[m]) * val;
      if (c == 0.0) continue;
      upstream[m] += c;
      c_total += c;
      any = true;
    }
    if (!any) continue;
    for (int k = 0; k < M; ++k) upstream[k] -= c_total * est.resp[k][j];
    q.encoder.backward_logits(est.traces[j], upstream, &grad);
  }
  return stats;
}

Vec kappa(airl::Discriminator& d, ContextInferenceModel& q,
          const ConditionalMeanFieldEstimate& est, const Trajectory& tau, int context,
          KappaStats* stats) {
  Vec grad(q.encoder.params(), 0.0);
  const KappaStats ks = accumulate_kappa_sum(d, q, est, {{&tau, context, 1.0}}, grad);
  if (stats) {
    stats->clamped += ks.clamped;
  }
  return grad;
}

namespace {

// Leave-one-out centering coefficients: sum_i L_i (x_i - mean_{j != i} x_j)
// equals sum_i c_i x_i with c_i = (n L_i - sum L) / (n - 1). Groups of one
// contribute nothing.
Vec loo_coefficients(const Vec& multipliers, const std::vector<std::vector<int>>& groups,
                     size_t batch) {
  Vec c(batch, 0.0);
  for (const auto& g : groups) {
    const int n = static_cast<int>(g.size());
    if (n < 2) continue;
    double sum = 0.0;
    for (int i : g) sum += multipliers[i];
    for (int i : g) c[i] = (n * multipliers[i] - sum) / (n - 1);
  }
  return c;
}

}  // namespace

Vec grad_L_omega(airl::Discriminator& d, ContextInferenceModel& q,
                 const ConditionalMeanFieldEstimate& est, const SampledBatch& batch) {
  const size_t B = batch.size();
  check(B >= 1 && batch.context.size() == B, "grad_L_omega: malformed batch");
  const int M = q.num_contexts();
  const int S = est.num_states;
  const int A = d.codec.num_actions;
  const int slices = static_cast<int>(est.by_context.at(0).at.size());
  const int T = slices - 1;

  Vec logq(B);
  nn::Mlp::Trace trace;
  for (size_t i = 0; i < B; ++i) {
    check(batch.tau[i].horizon() == T, "grad_L_omega: horizon mismatch");
    q.infer(batch.tau[i], trace);
    logq[i] = log_probs_from_trace(q.encoder, trace)[batch.context[i]];
  }
  const auto groups = group_by_context(batch.context, M);
  const Vec c = loo_coefficients(logq, groups, B);

  // sum_i c_i sum_{t<T} df/domega at step t of tau_i, tabulated by distinct
  // (m, t, s, a) so each key costs one backward pass.
  std::map<long long, double> slots;
  for (size_t i = 0; i < B; ++i) {
    if (c[i] == 0.0) continue;
    const int m = batch.context[i];
    for (int t = 0; t < T; ++t) {
      const auto [s, a] = batch.tau[i].steps[t];
      slots[((static_cast<long long>(m) * slices + t) * S + s) * A + a] += c[i];
    }
  }

  Vec grad(d.f.params(), 0.0);
  Vec input;
  for (const auto& [key, weight] : slots) {
    if (weight == 0.0) continue;
    const int a = static_cast<int>(key % A);
    const int s = static_cast<int>((key / A) % S);
    const int t = static_cast<int>((key / A / S) % slices);
    const int m = static_cast<int>(key / A / S / slices);
    d.encode_input(s, a, est.by_context[m].at[t].p, m, input);
    d.f.forward(input, trace);
    d.f.backward(trace, {weight}, &grad);
  }
  for (double& v : grad) v /= static_cast<double>(B);
  return grad;
}

Vec grad_L_psi(airl::Discriminator& d, ContextInferenceModel& q,
               const ConditionalMeanFieldEstimate& est, const SampledBatch& batch,
               KappaStats* stats) {
  const size_t B = batch.size();
  check(B >= 1 && batch.context.size() == B, "grad_L_psi: malformed batch");
  const int M = q.num_contexts();

  Vec grad(q.encoder.params(), 0.0);
  Vec logq(B);
  nn::Mlp::Trace trace;
  Vec upstream(M);
  for (size_t i = 0; i < B; ++i) {
    const Vec probs = q.infer(batch.tau[i], trace);
    logq[i] = log_probs_from_trace(q.encoder, trace)[batch.context[i]];
    // Direct score term d log q(m_i | tau_i) / d psi.
    for (int k = 0; k < M; ++k)
      upstream[k] = ((k == batch.context[i]) ? 1.0 : 0.0) - probs[k];
    for (double& u : upstream) u /= static_cast<double>(B);
    q.encoder.backward_logits(trace, upstream, &grad);
  }

  const auto groups = group_by_context(batch.context, M);
  const Vec c = loo_coefficients(logq, groups, B);
  std::vector<KappaTerm> terms;
  terms.reserve(B);
  for (size_t i = 0; i < B; ++i)
    if (c[i] != 0.0)
      terms.push_back({&batch.tau[i], batch.context[i], c[i] / static_cast<double>(B)});
  const KappaStats ks = accumulate_kappa_sum(d, q, est, terms, grad);
  if (stats) stats->clamped += ks.clamped;
  return grad;
}

Vec grad_K_psi(airl::Discriminator& d, ContextInferenceModel& q,
               const ConditionalMeanFieldEstimate& est,
               const std::vector<Trajectory>& expert_batch, const std::vector<int>& contexts,
               const SampledBatch& sampled, KappaStats* stats) {
  const size_t B = expert_batch.size();
  check(B >= 1 && contexts.size() == B, "grad_K_psi: malformed expert batch");
  const int M = q.num_contexts();
  const auto expert_groups = group_by_context(contexts, M);
  const auto sampled_groups = group_by_context(sampled.context, M);

  std::vector<KappaTerm> terms;
  terms.reserve(B + sampled.size());
  for (size_t i = 0; i < B; ++i)
    terms.push_back({&expert_batch[i], contexts[i], -1.0 / static_cast<double>(B)});
  for (int m = 0; m < M; ++m) {
    const size_t k_m = expert_groups[m].size();
    if (k_m == 0) continue;
    const size_t n_m = sampled_groups[m].size();
    check(n_m > 0, "grad_K_psi: no sampled trajectories for a context present in the batch");
    const double coeff = static_cast<double>(k_m) / (static_cast<double>(B) * n_m);
    for (int j : sampled_groups[m]) terms.push_back({&sampled.tau[j], m, coeff});
  }

  Vec grad(q.encoder.params(), 0.0);
  const KappaStats ks = accumulate_kappa_sum(d, q, est, terms, grad);
  if (stats) stats->clamped += ks.clamped;
  return grad;
}

std::vector<int> synthetic_contexts(const ContextInferenceModel& q,
                                    const std::vector<Trajectory>& expert_batch, Rng& rng) {
  check(!expert_batch.empty(), "synthetic_contexts: empty batch");
  std::vector<int> out;
  out.reserve(expert_batch.size());
  for (const Trajectory& tau : expert_batch) out.push_back(rng.categorical(q.infer(tau)));
  return out;
}

PemmfirlState::PemmfirlState(const TabularEnv& env, const TrainConfig& config) {
  check(config.num_contexts >= 1, "PemmfirlState: need at least one context");
  Rng root(config.seed);
  Rng init = root.split(1);
  rng_expert = root.split(2);
  rng_context = root.split(3);
  rng_rollout = root.split(4);

  codec = {env.num_states, env.num_actions, config.num_contexts};
  const bool ctx = config.num_contexts >= 2;
  d = airl::Discriminator(codec, ctx, init, config.hidden);
  q = ContextInferenceModel(codec, init, config.hidden);
  samplers.reserve(config.num_contexts);
  for (int m = 0; m < config.num_contexts; ++m)
    samplers.emplace_back(codec, env.horizon, ctx,
                          ctx ? std::optional<int>(m) : std::nullopt, init, config.hidden);
  opt_omega.init(d.f.params(), config.lr_omega);
  opt_psi.init(q.encoder.params(), config.lr_psi);
  opt_theta.resize(config.num_contexts);
  for (int m = 0; m < config.num_contexts; ++m) {
    opt_theta[m].resize(env.horizon);
    for (int t = 0; t < env.horizon; ++t)
      opt_theta[m][t].init(samplers[m].nets[t].params(), config.lr_theta);
  }
}

StepLog meta_train_steps(const TabularEnv& env, const solver::DemonstrationSet& demos,
                         const TrainConfig& config, PemmfirlState& st, int count) {
  check(count >= 0, "meta_train: negative iteration count");
  check(config.batch_size >= 1, "meta_train: batch_size must be >= 1");
  check(!demos.trajectories.empty(), "meta_train: no demonstrations");
  check(demos.trajectories.front().horizon() == env.horizon,
        "meta_train: demo horizon does not match the simulator");
  check(st.codec.num_contexts == config.num_contexts,
        "meta_train: state/config context cardinality mismatch");

  const int M = config.num_contexts;
  const int B = config.batch_size;
  const int n_demos = static_cast<int>(demos.trajectories.size());

  StepLog log;
  const double nan = std::nan("");
  std::vector<Trajectory> expert(B), expert_prime(B);
  for (int step = 0; step < count; ++step) {
    const int it = st.iteration + 1;
    const auto t0 = std::chrono::steady_clock::now();
    const auto emit = [&](double disc, double ret) {
      log.csv_rows += std::to_string(it) + "," + fmt_double(disc) + "," + fmt_double(ret) + "," +
                      fmt_double(config.timing ? elapsed_ms(t0) : 0.0) + "\n";
      st.iteration = it;
    };

    // Line 4: two independent expert batches.
    for (int i = 0; i < B; ++i)
      expert[i] = demos.trajectories[st.rng_expert.uniform_int(n_demos)];
    for (int i = 0; i < B; ++i)
      expert_prime[i] = demos.trajectories[st.rng_expert.uniform_int(n_demos)];

    // Line 5: synthetic contexts for the first batch.
    const std::vector<int> m_tilde = synthetic_contexts(st.q, expert, st.rng_context);

    // Line 6: conditional mean fields from the same batch.
    ConditionalMeanFieldEstimate est;
    try {
      est = conditional_empirical_mean_field(st.q, expert, env.num_states);
    } catch (const DegenerateContext&) {
      ++log.skipped_iterations;
      emit(nan, nan);
      continue;
    }

    // Line 7: rollouts with fixed context, mean field forced to the estimate.
    const auto groups = group_by_context(m_tilde, M);
    std::vector<PolicyFlow> policies(M);
    for (int m = 0; m < M; ++m)
      if (!groups[m].empty()) policies[m] = st.samplers[m].to_policy_flow();
    SampledBatch sampled;
    sampled.context = m_tilde;
    sampled.tau.resize(B);
    for (int i = 0; i < B; ++i) {
      const int m = m_tilde[i];
      sampled.tau[i] = sample_trajectory(env, &est.by_context[m], policies[m], st.rng_rollout);
    }

    // Line 8: psi descends K - L. Both gradients are estimated at the
    // iteration-start parameters (the estimate `est` is pinned at line 6).
    KappaStats ks;
    Vec gpsi = grad_K_psi(st.d, st.q, est, expert, m_tilde, sampled, &ks);
    {
      const Vec gl = grad_L_psi(st.d, st.q, est, sampled, &ks);
      for (size_t k = 0; k < gpsi.size(); ++k) gpsi[k] -= gl[k];
    }
    log.kappa_clamped += ks.clamped;

    // Line 9: omega ascends L.
    Vec gomega = grad_L_omega(st.d, st.q, est, sampled);
    for (double& v : gomega) v = -v;

    try {
      st.opt_psi.step(st.q.encoder.w, gpsi);
      st.opt_omega.step(st.d.f.w, gomega);
    } catch (const std::invalid_argument&) {
      ++log.skipped_iterations;
    }

    // Line 10: discriminator ascent on omega, expert batch 2 vs rollouts,
    // grouped by context and weighted back to a batch average.
    double disc_objective = 0.0;
    Vec dgrad(st.d.f.params(), 0.0), gbuf;
    std::vector<Trajectory> ebatch, sbatch;
    for (int m = 0; m < M; ++m) {
      if (groups[m].empty()) continue;
      ebatch.clear();
      sbatch.clear();
      for (int i : groups[m]) {
        ebatch.push_back(expert_prime[i]);
        sbatch.push_back(sampled.tau[i]);
      }
      gbuf.assign(st.d.f.params(), 0.0);
      const double obj = airl::discriminator_objective_grad(st.d, ebatch, sbatch,
                                                            est.by_context[m], m, policies[m],
                                                            &gbuf);
      const double w = static_cast<double>(groups[m].size()) / B;
      disc_objective += w * obj;
      for (size_t k = 0; k < dgrad.size(); ++k) dgrad[k] += w * gbuf[k];
    }
    for (double& v : dgrad) v = -v;
    try {
      st.opt_omega.step(st.d.f.w, dgrad);
    } catch (const std::invalid_argument&) {
      ++log.skipped_iterations;
    }

    // Line 11: sampler policy-gradient step per context on its own rollouts.
    double sampler_return = 0.0;
    for (int m = 0; m < M; ++m) {
      if (groups[m].empty()) continue;
      sbatch.clear();
      for (int i : groups[m]) sbatch.push_back(sampled.tau[i]);
      const double ret = airl::sampler_update(st.samplers[m], st.d, est.by_context[m], m, sbatch,
                                              st.opt_theta[m]);
      sampler_return += static_cast<double>(groups[m].size()) / B * ret;
    }

    emit(disc_objective, sampler_return);
  }
  return log;
}

TrainResult meta_train(const TabularEnv& env, const solver::DemonstrationSet& demos,
                       const TrainConfig& config) {
  check(config.iterations >= 0, "meta_train: negative iteration count");
  TrainResult result{PemmfirlState(env, config), {}, 0, 0};
  result.csv += "# iterations=" + std::to_string(config.iterations) +
                " batch_size=" + std::to_string(config.batch_size) +
                " num_contexts=" + std::to_string(config.num_contexts) +
                " seed=" + std::to_string(config.seed) +
                " lr_omega=" + fmt_double(config.lr_omega) +
                " lr_psi=" + fmt_double(config.lr_psi) +
                " lr_theta=" + fmt_double(config.lr_theta) + "\n";
  result.csv += "iter,disc_objective,sampler_return,wall_ms\n";
  const StepLog log = meta_train_steps(env, demos, config, result.state, config.iterations);
  result.csv += log.csv_rows;
  result.skipped_iterations = log.skipped_iterations;
  result.kappa_clamped = log.kappa_clamped;
  return result;
}

LabelAlignment align_labels(const ContextInferenceModel& q,
                            const std::vector<Trajectory>& demos) {
  check(!demos.empty(), "align_labels: empty demo set");
  const int M = q.num_contexts();
  check(M <= 8, "align_labels: permutation search limited to 8 contexts");

  // conf[pred][true] counts argmax-q predictions against hidden labels.
  std::vector<std::vector<int>> conf(M, std::vector<int>(M, 0));
  for (const Trajectory& tau : demos) {
    check(tau.hidden_context >= 0 && tau.hidden_context < M,
          "align_labels: demo lacks a hidden context label");
    const Vec probs = q.infer(tau);
    const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                                      probs.begin());
    ++conf[pred][tau.hidden_context];
  }

  LabelAlignment best;
  best.accuracy = -1.0;
  std::vector<int> perm(M);
  for (int i = 0; i < M; ++i) perm[i] = i;
  do {
    int hits = 0;
    for (int pred = 0; pred < M; ++pred) hits += conf[pred][perm[pred]];
    const double acc = static_cast<double>(hits) / demos.size();
    if (acc > best.accuracy) {
      best.accuracy = acc;
      best.to_true = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  best.to_learner.assign(M, 0);
  for (int l = 0; l < M; ++l) best.to_learner[best.to_true[l]] = l;
  return best;
}

std::map<int, solver::Ermfne> reward_induced_equilibria(const TabularEnv& env,
                                                        airl::Discriminator& d, int num_contexts,
                                                        double tol, int max_iter, double damping) {
  check(num_contexts >= 1, "reward_induced_equilibria: need at least one context");
  std::map<int, solver::Ermfne> out;
  const bool per_context = d.with_context && num_contexts >= 2;
  const int solves = per_context ? num_contexts : 1;
  for (int m = 0; m < solves; ++m) {
    const solver::RewardOverride ov = [&d, m](int s, int a, const MeanField& mu) {
      return d.f_value(s, a, mu.p, m);
    };
    bool converged = false;
    solver::Ermfne eq = solver::solve_ermfne(env, 0, tol, max_iter, damping, &ov, &converged);
    eq.context_index = m;
    out[m] = std::move(eq);
  }
  for (int m = solves; m < num_contexts; ++m) {
    out[m] = out.at(0);
    out[m].context_index = m;
  }
  return out;
}

std::string MetaTestRecord::csv_row() const {
  return std::to_string(seed) + "," + std::to_string(true_context) + "," +
         std::to_string(inferred_context) + "," + fmt_double(return_gap) + "," +
         fmt_double(policy_deviation);
}

MetaTestRecord meta_test(const ContextInferenceModel& q, airl::Discriminator* learned_f,
                         const TabularEnv& env, const std::map<int, solver::Ermfne>& expert_eqs,
                         const Trajectory& tau_e, Rng& rng) {
  MetaTestRecord rec;
  rec.true_context = tau_e.hidden_context;
  check(expert_eqs.count(rec.true_context) == 1,
        "meta_test: trajectory's true context has no expert equilibrium");

  rec.inferred_context = rng.categorical(q.infer(tau_e));

  solver::Ermfne chosen;
  if (learned_f) {
    const int m_hat = rec.inferred_context;
    const solver::RewardOverride ov = [learned_f, m_hat](int s, int a, const MeanField& mu) {
      return learned_f->f_value(s, a, mu.p, m_hat);
    };
    bool converged = false;
    chosen = solver::solve_ermfne(env, 0, 1e-8, 2000, 0.5, &ov, &converged);
  } else {
    check(expert_eqs.count(rec.inferred_context) == 1,
          "meta_test: inferred context has no ground-truth equilibrium");
    chosen = expert_eqs.at(rec.inferred_context);
  }

  const solver::Ermfne& truth = expert_eqs.at(rec.true_context);
  const double m_value = env.contexts.at(rec.true_context);
  rec.return_gap =
      solver::expected_return(env, truth, m_value) - solver::expected_return(env, chosen, m_value);

  std::map<int, PolicyFlow> e{{0, truth.policy_flow}}, l{{0, chosen.policy_flow}};
  rec.policy_deviation = metrics::policy_deviation(e, l, {1.0});
  return rec;
}

}  // namespace mfirl::pemmfirl
