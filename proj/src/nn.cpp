// SPDX-License-Identifier: Apache-2.0

#include "eesim/nn.hpp"

#include <istream>
#include <ostream>

namespace eesim::nn {

namespace {

Mat apply_act(const Mat& z, Act a) {
  if (a == Act::Identity) return z;
  return z.array().tanh().matrix();
}

// Derivative through the stored post-activation values.
Mat act_grad(const Mat& activation, const Mat& d_act, Act a) {
  if (a == Act::Identity) return d_act;
  return (d_act.array() * (1.0 - activation.array().square())).matrix();
}

void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
void write_real(std::ostream& os, Real v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
Real read_real(std::istream& is) {
  Real v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
void write_mat(std::ostream& os, const Mat& m) {
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_u64(os, static_cast<std::uint64_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()), sizeof(Real) * m.size());
}
Mat read_mat(std::istream& is) {
  const auto r = static_cast<Eigen::Index>(read_u64(is));
  const auto c = static_cast<Eigen::Index>(read_u64(is));
  Mat m(r, c);
  is.read(reinterpret_cast<char*>(m.data()), sizeof(Real) * m.size());
  return m;
}
void write_vec(std::ostream& os, const Vec& v) {
  write_u64(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), sizeof(Real) * v.size());
}
Vec read_vec(std::istream& is) {
  const auto n = static_cast<Eigen::Index>(read_u64(is));
  Vec v(n);
  is.read(reinterpret_cast<char*>(v.data()), sizeof(Real) * v.size());
  return v;
}

}  // namespace

long DenseNet::parameter_count() const {
  long n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

DenseNet make_net(const std::vector<int>& sizes, RngStream& rng, Act hidden, Act output) {
  if (sizes.size() < 2) throw std::invalid_argument("make_net: need at least input and output layer");
  DenseNet net;
  net.sizes = sizes;
  net.hidden = hidden;
  net.output = output;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const Real limit = std::sqrt(6.0 / (fan_in + fan_out));
    Mat w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vec::Zero(fan_out));
  }
  return net;
}

Mat forward_batch(const DenseNet& net, const Mat& x, ForwardCache* cache) {
  if (x.rows() != net.input_size()) throw std::invalid_argument("forward: input size mismatch");
  if (cache) {
    cache->input = x;
    cache->activations.clear();
    cache->activations.reserve(net.weights.size());
  }
  Mat a = x;
  for (int l = 0; l < net.num_layers(); ++l) {
    const Act act = l + 1 == net.num_layers() ? net.output : net.hidden;
    Mat z = net.weights[l] * a;
    z.colwise() += net.biases[l];
    a = apply_act(z, act);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Vec forward(const DenseNet& net, const Vec& x) {
  return forward_batch(net, x).col(0);
}

NetGrads NetGrads::zeros_like(const DenseNet& net) {
  NetGrads g;
  for (int l = 0; l < net.num_layers(); ++l) {
    g.d_weights.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.d_biases.push_back(Vec::Zero(net.biases[l].size()));
  }
  return g;
}

void NetGrads::add(const NetGrads& other, Real scale) {
  for (std::size_t l = 0; l < d_weights.size(); ++l) {
    d_weights[l] += scale * other.d_weights[l];
    d_biases[l] += scale * other.d_biases[l];
  }
}

Mat backward_batch(const DenseNet& net, const ForwardCache& cache, const Mat& d_out,
                   NetGrads& grads) {
  const int layers = net.num_layers();
  if (static_cast<int>(cache.activations.size()) != layers)
    throw std::invalid_argument("backward: cache does not match net");
  if (d_out.rows() != net.output_size() || d_out.cols() != cache.input.cols())
    throw std::invalid_argument("backward: output gradient shape mismatch");
  grads.d_weights.assign(layers, Mat());
  grads.d_biases.assign(layers, Vec());

  Mat d = d_out;
  for (int l = layers - 1; l >= 0; --l) {
    const Act act = l + 1 == layers ? net.output : net.hidden;
    const Mat dz = act_grad(cache.activations[l], d, act);
    const Mat& prev = l == 0 ? cache.input : cache.activations[l - 1];
    grads.d_weights[l] = dz * prev.transpose();
    grads.d_biases[l] = dz.rowwise().sum();
    d = net.weights[l].transpose() * dz;
  }
  return d;
}

AdamState AdamState::for_net(const DenseNet& net, Real lr) {
  AdamState s;
  s.lr = lr;
  for (int l = 0; l < net.num_layers(); ++l) {
    s.m_w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.v_w.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
    s.m_b.push_back(Vec::Zero(net.biases[l].size()));
    s.v_b.push_back(Vec::Zero(net.biases[l].size()));
  }
  return s;
}

void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state) {
  ++state.step;
  const Real bc1 = 1.0 - std::pow(state.beta1, static_cast<Real>(state.step));
  const Real bc2 = 1.0 - std::pow(state.beta2, static_cast<Real>(state.step));
  for (int l = 0; l < net.num_layers(); ++l) {
    state.m_w[l] = state.beta1 * state.m_w[l] + (1.0 - state.beta1) * grads.d_weights[l];
    state.v_w[l] = (state.beta2 * state.v_w[l].array() +
                    (1.0 - state.beta2) * grads.d_weights[l].array().square())
                       .matrix();
    net.weights[l].array() -=
        state.lr * (state.m_w[l].array() / bc1) / ((state.v_w[l].array() / bc2).sqrt() + state.eps);

    state.m_b[l] = state.beta1 * state.m_b[l] + (1.0 - state.beta1) * grads.d_biases[l];
    state.v_b[l] = (state.beta2 * state.v_b[l].array() +
                    (1.0 - state.beta2) * grads.d_biases[l].array().square())
                       .matrix();
    net.biases[l].array() -=
        state.lr * (state.m_b[l].array() / bc1) / ((state.v_b[l].array() / bc2).sqrt() + state.eps);
  }
}

void AdamScalar::update(Real& param, Real grad) {
  ++step;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad * grad;
  const Real mc = m / (1.0 - std::pow(beta1, static_cast<Real>(step)));
  const Real vc = v / (1.0 - std::pow(beta2, static_cast<Real>(step)));
  param -= lr * mc / (std::sqrt(vc) + eps);
}

void soft_update(DenseNet& target, const DenseNet& online, Real tau) {
  if (!(tau > 0.0) || tau > 1.0) throw std::invalid_argument("soft_update: tau must be in (0,1]");
  if (target.sizes != online.sizes) throw std::invalid_argument("soft_update: shape mismatch");
  for (int l = 0; l < target.num_layers(); ++l) {
    target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
    target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
  }
}

Vec flatten_params(const DenseNet& net) {
  Vec flat(net.parameter_count());
  Eigen::Index pos = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    flat.segment(pos, net.weights[l].size()) =
        Eigen::Map<const Vec>(net.weights[l].data(), net.weights[l].size());
    pos += net.weights[l].size();
    flat.segment(pos, net.biases[l].size()) = net.biases[l];
    pos += net.biases[l].size();
  }
  return flat;
}

void unflatten_params(DenseNet& net, const Vec& flat) {
  if (flat.size() != net.parameter_count())
    throw std::invalid_argument("unflatten_params: size mismatch");
  Eigen::Index pos = 0;
  for (int l = 0; l < net.num_layers(); ++l) {
    Eigen::Map<Vec>(net.weights[l].data(), net.weights[l].size()) =
        flat.segment(pos, net.weights[l].size());
    pos += net.weights[l].size();
    net.biases[l] = flat.segment(pos, net.biases[l].size());
    pos += net.biases[l].size();
  }
}

Vec flatten_grads(const NetGrads& grads) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < grads.d_weights.size(); ++l)
    n += grads.d_weights[l].size() + grads.d_biases[l].size();
  Vec flat(n);
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < grads.d_weights.size(); ++l) {
    flat.segment(pos, grads.d_weights[l].size()) =
        Eigen::Map<const Vec>(grads.d_weights[l].data(), grads.d_weights[l].size());
    pos += grads.d_weights[l].size();
    flat.segment(pos, grads.d_biases[l].size()) = grads.d_biases[l];
    pos += grads.d_biases[l].size();
  }
  return flat;
}

std::uint64_t param_hash(const DenseNet& net) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(data[i]);
      h *= 0x100000001b3ull;
    }
  };
  for (int l = 0; l < net.num_layers(); ++l) {
    mix(reinterpret_cast<const char*>(net.weights[l].data()), sizeof(Real) * net.weights[l].size());
    mix(reinterpret_cast<const char*>(net.biases[l].data()), sizeof(Real) * net.biases[l].size());
  }
  return h;
}

void write_net(std::ostream& os, const DenseNet& net) {
  write_u64(os, net.sizes.size());
  for (int s : net.sizes) write_u64(os, static_cast<std::uint64_t>(s));
  write_u64(os, static_cast<std::uint64_t>(net.hidden));
  write_u64(os, static_cast<std::uint64_t>(net.output));
  for (int l = 0; l < net.num_layers(); ++l) {
    write_mat(os, net.weights[l]);
    write_vec(os, net.biases[l]);
  }
}

DenseNet read_net(std::istream& is) {
  DenseNet net;
  const auto n_sizes = read_u64(is);
  net.sizes.resize(n_sizes);
  for (auto& s : net.sizes) s = static_cast<int>(read_u64(is));
  net.hidden = static_cast<Act>(read_u64(is));
  net.output = static_cast<Act>(read_u64(is));
  for (std::size_t l = 0; l + 1 < n_sizes; ++l) {
    net.weights.push_back(read_mat(is));
    net.biases.push_back(read_vec(is));
  }
  return net;
}

void write_adam(std::ostream& os, const AdamState& s) {
  write_u64(os, static_cast<std::uint64_t>(s.step));
  write_real(os, s.lr);
  write_real(os, s.beta1);
  write_real(os, s.beta2);
  write_real(os, s.eps);
  write_u64(os, s.m_w.size());
  for (std::size_t l = 0; l < s.m_w.size(); ++l) {
    write_mat(os, s.m_w[l]);
    write_mat(os, s.v_w[l]);
    write_vec(os, s.m_b[l]);
    write_vec(os, s.v_b[l]);
  }
}

AdamState read_adam(std::istream& is) {
  AdamState s;
  s.step = static_cast<long>(read_u64(is));
  s.lr = read_real(is);
  s.beta1 = read_real(is);
  s.beta2 = read_real(is);
  s.eps = read_real(is);
  const auto n = read_u64(is);
  for (std::uint64_t l = 0; l < n; ++l) {
    s.m_w.push_back(read_mat(is));
    s.v_w.push_back(read_mat(is));
    s.m_b.push_back(read_vec(is));
    s.v_b.push_back(read_vec(is));
  }
  return s;
}

}  // namespace eesim::nn
