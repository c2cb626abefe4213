#pragma once
// Small dense networks with hand-rolled backprop. Parameters live in one flat
// vector (layer weights row-major, then biases) so optimizers, checkpoints and
// finite-difference probes can treat a network as a plain coordinate vector.
// Hidden activations are leaky ReLU (slope 0.01); the output is either raw
// (scalar reward heads) or a softmax (policy / classification heads).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "mfirl/mfg.hpp"
#include "mfirl/rng.hpp"

namespace mfirl::nn {

enum class Head { Scalar, Softmax };

struct Mlp {
  std::vector<int> dims;  // e.g. {in, 64, 64, out}
  Head head = Head::Scalar;
  double slope = 0.01;
  Vec w;  // flat parameters
  Vec g;  // gradient accumulator, same layout

  Mlp() = default;
  Mlp(std::vector<int> dims_, Head head_);

  int params() const { return static_cast<int>(w.size()); }
  int layers() const { return static_cast<int>(dims.size()) - 1; }
  int in_dim() const { return dims.front(); }
  int out_dim() const { return dims.back(); }
  void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }

  // Glorot-style uniform init on [-b, b], b = sqrt(6/(fan_in+fan_out)).
  void init_uniform(Rng& rng);

  // Forward pass scratch. Reusable across calls; sized lazily.
  struct Trace {
    Vec in;
    std::vector<Vec> pre;  // pre-activations per layer
    std::vector<Vec> act;  // activated outputs for layers 0..L-2
    Vec out;               // after head
  };

  const Vec& forward(const Vec& input, Trace& tr) const;
  Vec forward(const Vec& input) const;

  // Backprop from an upstream gradient on the *output* (after the head).
  // Accumulates parameter gradients into `grad` (internal buffer when null);
  // writes d(loss)/d(input) into `input_grad` when non-null.
  void backward(const Trace& tr, const Vec& upstream, Vec* grad = nullptr,
                Vec* input_grad = nullptr);

  // Same but `upstream` sits on the pre-head logits; the natural entry point
  // for log-softmax losses where d/dlogits = (onehot - probs) etc.
  void backward_logits(const Trace& tr, const Vec& upstream, Vec* grad = nullptr,
                       Vec* input_grad = nullptr);

  // Flat offset of layer l's weight block; biases follow the weights.
  int weight_offset(int l) const { return offsets_[l]; }

 private:
  std::vector<int> offsets_;
  void backprop(const Trace& tr, Vec dlast, Vec* grad, Vec* input_grad);
};

// Adam with bias correction. Moments are part of the object so checkpoints can
// freeze and resume the optimizer mid-run.
struct AdamState {
  double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step_count = 0;
  Vec m, v;

  void init(int n, double lr_);
  // One descent step: params -= lr * mhat / (sqrt(vhat) + eps).
  // Throws std::invalid_argument on non-finite gradient entries.
  void step(Vec& params, const Vec& grads);
};

// Fixed one-hot/verbatim encoding of (state, action, mean field, context), in
// that concatenation order; absent parts are skipped, present parts keep their
// relative order. A single-context space contributes no features (the block
// would be constant).
struct FeatureCodec {
  int num_states = 0;
  int num_actions = 0;
  int num_contexts = 1;

  int context_dim() const { return num_contexts >= 2 ? num_contexts : 0; }
  int dim(bool with_s, bool with_a, bool with_mu, bool with_m) const;

  // Appends into `out` (cleared first when `clear` is true).
  void encode(std::optional<int> s, std::optional<int> a, const Vec* mu, std::optional<int> m,
              Vec& out, bool clear = true) const;
  Vec encode(std::optional<int> s, std::optional<int> a, const Vec* mu,
             std::optional<int> m) const;

  // Trajectory summary for inference networks: per-step concat of one-hot
  // state and one-hot action, mean-pooled over t = 0..T.
  Vec encode_trajectory_pooled(const Trajectory& tau) const;
};

}  // namespace mfirl::nn
