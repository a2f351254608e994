// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense-network substrate: batched forward, exact reverse-mode
// gradients, adaptive-moment updates, and Polyak target blending. All
// arithmetic in doubles; batches are column-major (one sample per column).

#pragma once

#include "eesim/types.hpp"

#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace eesim::nn {

enum class Act { Tanh, Identity };

struct DenseNet {
  std::vector<int> sizes;  // includes input layer
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  Act hidden = Act::Tanh;
  Act output = Act::Identity;

  int input_size() const { return sizes.front(); }
  int output_size() const { return sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  long parameter_count() const;
};

/// Xavier-uniform init, biases zero. Deterministic in the stream.
DenseNet make_net(const std::vector<int>& sizes, RngStream& rng, Act hidden = Act::Tanh,
                  Act output = Act::Identity);

struct ForwardCache {
  Mat input;
  std::vector<Mat> activations;  // post-activation per layer
};

/// Batched forward pass; pass a cache to enable a later backward pass.
Mat forward_batch(const DenseNet& net, const Mat& x, ForwardCache* cache = nullptr);

/// Single-sample convenience wrapper.
Vec forward(const DenseNet& net, const Vec& x);

struct NetGrads {
  std::vector<Mat> d_weights;
  std::vector<Vec> d_biases;

  static NetGrads zeros_like(const DenseNet& net);
  void add(const NetGrads& other, Real scale = 1.0);
};

/// Exact reverse-mode gradients for the scalar whose output gradient is
/// `d_out` (same shape as the forward output). Returns the input gradient.
Mat backward_batch(const DenseNet& net, const ForwardCache& cache, const Mat& d_out,
                   NetGrads& grads);

/// Adaptive-moment optimizer state, shaped like its net.
struct AdamState {
  std::vector<Mat> m_w, v_w;
  std::vector<Vec> m_b, v_b;
  long step = 0;
  Real lr = 3e-4;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;

  static AdamState for_net(const DenseNet& net, Real lr);
};

/// Bias-corrected adaptive-moment update in place.
void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state);

/// Scalar variant used for the temperature parameter.
struct AdamScalar {
  Real m = 0.0, v = 0.0;
  long step = 0;
  Real lr = 3e-4;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;

  void update(Real& param, Real grad);
};

/// target <- tau * online + (1 - tau) * target, elementwise.
void soft_update(DenseNet& target, const DenseNet& online, Real tau);

/// Flat parameter access, used by the finite-difference checks.
Vec flatten_params(const DenseNet& net);
void unflatten_params(DenseNet& net, const Vec& flat);
Vec flatten_grads(const NetGrads& grads);

/// FNV-1a over the raw parameter bytes.
std::uint64_t param_hash(const DenseNet& net);

// Binary (de)serialization; bit-exact round trip.
void write_net(std::ostream& os, const DenseNet& net);
DenseNet read_net(std::istream& is);
void write_adam(std::ostream& os, const AdamState& s);
AdamState read_adam(std::istream& is);

}  // namespace eesim::nn
