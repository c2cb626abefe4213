#include "mfirl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfirl::nn {

Mlp::Mlp(std::vector<int> dims_, Head head_) : dims(std::move(dims_)), head(head_) {
  check(dims.size() >= 2, "mlp needs at least input and output dims");
  for (int d : dims) check(d >= 1, "mlp layer dims must be positive");
  offsets_.resize(dims.size() - 1);
  int total = 0;
  for (int l = 0; l + 1 < static_cast<int>(dims.size()); ++l) {
    offsets_[l] = total;
    total += dims[l + 1] * dims[l] + dims[l + 1];  // W then b
  }
  w.assign(total, 0.0);
  g.assign(total, 0.0);
}

void Mlp::init_uniform(Rng& rng) {
  for (int l = 0; l < layers(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    double* wl = w.data() + offsets_[l];
    for (int i = 0; i < fan_out * fan_in; ++i) wl[i] = rng.uniform(-bound, bound);
    double* bl = wl + fan_out * fan_in;
    for (int i = 0; i < fan_out; ++i) bl[i] = 0.0;
  }
}

const Vec& Mlp::forward(const Vec& input, Trace& tr) const {
  check(static_cast<int>(input.size()) == dims.front(), "mlp input size mismatch");
  const int L = layers();
  tr.in = input;
  tr.pre.resize(L);
  tr.act.resize(L > 0 ? L - 1 : 0);
  const double* x = tr.in.data();
  int xn = dims[0];
  for (int l = 0; l < L; ++l) {
    const int out_n = dims[l + 1];
    tr.pre[l].resize(out_n);
    const double* wl = w.data() + offsets_[l];
    const double* bl = wl + out_n * xn;
    for (int i = 0; i < out_n; ++i) {
      const double* row = wl + i * xn;
      double acc = bl[i];
      for (int j = 0; j < xn; ++j) acc += row[j] * x[j];
      tr.pre[l][i] = acc;
    }
    if (l + 1 < L) {
      tr.act[l].resize(out_n);
      for (int i = 0; i < out_n; ++i) {
        const double z = tr.pre[l][i];
        tr.act[l][i] = z > 0.0 ? z : slope * z;
      }
      x = tr.act[l].data();
      xn = out_n;
    }
  }
  const Vec& logits = tr.pre[L - 1];
  if (head == Head::Scalar) {
    tr.out = logits;
  } else {
    const int n = static_cast<int>(logits.size());
    tr.out.resize(n);
    double mx = logits[0];
    for (double z : logits) mx = std::max(mx, z);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      tr.out[i] = std::exp(logits[i] - mx);
      sum += tr.out[i];
    }
    for (int i = 0; i < n; ++i) tr.out[i] /= sum;
  }
  return tr.out;
}

Vec Mlp::forward(const Vec& input) const {
  Trace tr;
  return forward(input, tr);
}

void Mlp::backward(const Trace& tr, const Vec& upstream, Vec* grad, Vec* input_grad) {
  check(upstream.size() == tr.out.size(), "mlp upstream size mismatch");
  Vec dlast(upstream.size());
  if (head == Head::Scalar) {
    dlast = upstream;
  } else {
    // d/dlogits of softmax: y .* (u - <u, y>)
    const Vec& y = tr.out;
    double dot = 0.0;
    for (size_t i = 0; i < y.size(); ++i) dot += upstream[i] * y[i];
    for (size_t i = 0; i < y.size(); ++i) dlast[i] = y[i] * (upstream[i] - dot);
  }
  backprop(tr, std::move(dlast), grad, input_grad);
}

void Mlp::backward_logits(const Trace& tr, const Vec& upstream, Vec* grad,
                          Vec* input_grad) {
  check(static_cast<int>(upstream.size()) == dims.back(), "mlp logit upstream size mismatch");
  backprop(tr, upstream, grad, input_grad);
}

void Mlp::backprop(const Trace& tr, Vec dlast, Vec* grad, Vec* input_grad) {
  Vec* acc = grad ? grad : &g;
  check(acc->size() == w.size(), "mlp grad buffer size mismatch");
  const int L = layers();
  Vec dcur = std::move(dlast);  // gradient on pre[l]
  Vec dprev;
  for (int l = L - 1; l >= 0; --l) {
    const int out_n = dims[l + 1], in_n = dims[l];
    const double* x = (l == 0) ? tr.in.data() : tr.act[l - 1].data();
    double* wl_g = acc->data() + offsets_[l];
    double* bl_g = wl_g + out_n * in_n;
    for (int i = 0; i < out_n; ++i) {
      const double d = dcur[i];
      if (d == 0.0) continue;
      double* grow = wl_g + i * in_n;
      for (int j = 0; j < in_n; ++j) grow[j] += d * x[j];
      bl_g[i] += d;
    }
    const bool need_dx = (l > 0) || (input_grad != nullptr);
    if (!need_dx) break;
    dprev.assign(in_n, 0.0);
    const double* wl = w.data() + offsets_[l];
    for (int i = 0; i < out_n; ++i) {
      const double d = dcur[i];
      if (d == 0.0) continue;
      const double* row = wl + i * in_n;
      for (int j = 0; j < in_n; ++j) dprev[j] += d * row[j];
    }
    if (l > 0) {
      for (int j = 0; j < in_n; ++j)
        if (tr.pre[l - 1][j] <= 0.0) dprev[j] *= slope;
    }
    dcur = std::move(dprev);
  }
  if (input_grad) *input_grad = std::move(dcur);
}

void AdamState::init(int n, double lr_) {
  lr = lr_;
  step_count = 0;
  m.assign(n, 0.0);
  v.assign(n, 0.0);
}

void AdamState::step(Vec& params, const Vec& grads) {
  check(params.size() == m.size() && grads.size() == m.size(), "adam size mismatch");
  for (double gi : grads)
    if (!std::isfinite(gi)) throw std::invalid_argument("adam: non-finite gradient");
  ++step_count;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
    params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

int FeatureCodec::dim(bool with_s, bool with_a, bool with_mu, bool with_m) const {
  int d = 0;
  if (with_s) d += num_states;
  if (with_a) d += num_actions;
  if (with_mu) d += num_states;
  if (with_m) d += context_dim();
  return d;
}

void FeatureCodec::encode(std::optional<int> s, std::optional<int> a, const Vec* mu,
                          std::optional<int> m, Vec& out, bool clear) const {
  if (clear) out.clear();
  if (s) {
    check(*s >= 0 && *s < num_states, "codec: state out of range");
    const size_t base = out.size();
    out.resize(base + num_states, 0.0);
    out[base + *s] = 1.0;
  }
  if (a) {
    check(*a >= 0 && *a < num_actions, "codec: action out of range");
    const size_t base = out.size();
    out.resize(base + num_actions, 0.0);
    out[base + *a] = 1.0;
  }
  if (mu) {
    check(static_cast<int>(mu->size()) == num_states, "codec: mean field size mismatch");
    out.insert(out.end(), mu->begin(), mu->end());
  }
  if (m && context_dim() > 0) {
    check(*m >= 0 && *m < num_contexts, "codec: context out of range");
    const size_t base = out.size();
    out.resize(base + num_contexts, 0.0);
    out[base + *m] = 1.0;
  }
}

Vec FeatureCodec::encode(std::optional<int> s, std::optional<int> a, const Vec* mu,
                         std::optional<int> m) const {
  Vec out;
  encode(s, a, mu, m, out);
  return out;
}

Vec FeatureCodec::encode_trajectory_pooled(const Trajectory& tau) const {
  check(!tau.steps.empty(), "codec: empty trajectory");
  Vec out(num_states + num_actions, 0.0);
  const double inv = 1.0 / static_cast<double>(tau.steps.size());
  for (const auto& [s, a] : tau.steps) {
    check(s >= 0 && s < num_states, "codec: trajectory state out of range");
    check(a >= 0 && a < num_actions, "codec: trajectory action out of range");
    out[s] += inv;
    out[num_states + a] += inv;
  }
  return out;
}

}  // namespace mfirl::nn
