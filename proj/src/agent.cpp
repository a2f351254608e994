// SPDX-License-Identifier: Apache-2.0

#include "eesim/agent.hpp"

#include "eesim/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace eesim {

namespace {
constexpr Real kLogProbEps = 1e-6;
constexpr Real kHalfLog2Pi = 0.91893853320467274178;  // 0.5*log(2*pi)

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
void write_vecb(std::ostream& os, const Vec& v) {
  write_u64(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), sizeof(Real) * v.size());
}
Vec read_vecb(std::istream& is) {
  Vec v(static_cast<Eigen::Index>(read_u64(is)));
  is.read(reinterpret_cast<char*>(v.data()), sizeof(Real) * v.size());
  return v;
}
void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_string(std::istream& is) {
  std::string s(read_u64(is), '\0');
  is.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}
}  // namespace

ContinuousLayout ContinuousLayout::make(const SystemConfig& cfg) {
  ContinuousLayout l;
  l.wideband = cfg.wideband_mode();
  l.n_t = cfg.num_bs_antennas;
  l.k_users = cfg.num_sus;
  l.n_d = cfg.num_subcarriers;
  l.n_i = cfg.num_irs_elements;
  int off = 0;
  l.beam_offset = off;
  l.beam_len = l.wideband ? 2 * l.n_t * l.k_users : 2 * l.n_t * l.k_users * l.n_d;
  off += l.beam_len;
  if (l.wideband) {
    l.power_offset = off;
    l.power_len = l.k_users * l.n_d;
    off += l.power_len;
  }
  l.phase_offset = off;
  off += l.n_i;
  l.accel_offset = off;
  off += 3;
  l.dim = off;
  return l;
}

HybridAction decode_continuous(const Vec& raw, const SystemConfig& cfg) {
  const ContinuousLayout l = ContinuousLayout::make(cfg);
  if (raw.size() != l.dim) throw std::invalid_argument("decode_continuous: dimension mismatch");
  HybridAction a;
  a.raw_cont = raw;
  a.w_raw = CMat::Zero(l.n_t, l.k_users * l.n_d);
  const Real p_max = cfg.p_max_w();

  if (!l.wideband) {
    const Real scale = std::sqrt(p_max / (2.0 * l.k_users * l.n_d));
    for (int k = 0; k < l.k_users; ++k)
      for (int d = 0; d < l.n_d; ++d)
        for (int i = 0; i < l.n_t; ++i) {
          const int base = l.beam_offset + ((k * l.n_d + d) * l.n_t + i) * 2;
          a.w_raw(i, beam_col(k, d, l.n_d)) = scale * Complex(raw[base], raw[base + 1]);
        }
  } else {
    const Real dir_scale = std::sqrt(p_max / (2.0 * l.k_users));
    for (int k = 0; k < l.k_users; ++k) {
      CVec dir(l.n_t);
      for (int i = 0; i < l.n_t; ++i) {
        const int base = l.beam_offset + (k * l.n_t + i) * 2;
        dir[i] = dir_scale * Complex(raw[base], raw[base + 1]);
      }
      const Real dn = dir.norm();
      for (int d = 0; d < l.n_d; ++d) {
        const Real p = 0.5 * (raw[l.power_offset + k * l.n_d + d] + 1.0) * p_max /
                       (l.k_users * l.n_d);
        if (dn > 0) a.w_raw.col(beam_col(k, d, l.n_d)) = std::sqrt(p) / dn * dir;
      }
    }
  }

  Vec theta(l.n_i);
  for (int i = 0; i < l.n_i; ++i) theta[i] = kPi * (raw[l.phase_offset + i] + 1.0);
  a.phi_raw = IrsPhase::from_phases(theta);

  a.a_raw = cfg.a_max * Vec3(raw[l.accel_offset], raw[l.accel_offset + 1], raw[l.accel_offset + 2]);

  a.w = a.w_raw;
  a.phi = a.phi_raw;
  a.a = a.a_raw;
  return a;
}

Vec encode_continuous(const HybridAction& action, const SystemConfig& cfg) {
  const ContinuousLayout l = ContinuousLayout::make(cfg);
  if (l.wideband)
    throw std::invalid_argument("encode_continuous: wideband packing is not invertible");
  Vec raw(l.dim);
  const Real scale = std::sqrt(cfg.p_max_w() / (2.0 * l.k_users * l.n_d));
  for (int k = 0; k < l.k_users; ++k)
    for (int d = 0; d < l.n_d; ++d)
      for (int i = 0; i < l.n_t; ++i) {
        const int base = l.beam_offset + ((k * l.n_d + d) * l.n_t + i) * 2;
        const Complex w = action.w_raw(i, beam_col(k, d, l.n_d)) / scale;
        raw[base] = w.real();
        raw[base + 1] = w.imag();
      }
  for (int i = 0; i < l.n_i; ++i) raw[l.phase_offset + i] = action.phi_raw.phases[i] / kPi - 1.0;
  for (int i = 0; i < 3; ++i) raw[l.accel_offset + i] = action.a_raw[i] / cfg.a_max;
  return raw;
}

TanhSample tanh_gaussian_from_noise(const Vec& mu, const Vec& log_std_raw, const Vec& xi,
                                    Real lo, Real hi) {
  if (mu.size() != log_std_raw.size() || mu.size() != xi.size())
    throw std::invalid_argument("tanh_gaussian: size mismatch");
  TanhSample s;
  s.action.resize(mu.size());
  s.log_prob = 0.0;
  for (int i = 0; i < mu.size(); ++i) {
    const Real ls = std::clamp(log_std_raw[i], lo, hi);
    const Real sigma = std::exp(ls);
    const Real u = mu[i] + sigma * xi[i];
    const Real a = std::tanh(u);
    s.action[i] = a;
    s.log_prob += -ls - 0.5 * xi[i] * xi[i] - kHalfLog2Pi - std::log(1.0 - a * a + kLogProbEps);
  }
  return s;
}

TanhSample sample_tanh_gaussian(const Vec& mu, const Vec& log_std_raw, RngStream& rng, Real lo,
                                Real hi) {
  Vec xi(mu.size());
  for (int i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
  return tanh_gaussian_from_noise(mu, log_std_raw, xi, lo, hi);
}

Mat assemble_dueling(const Vec& head_out, int n_d, int n_actions) {
  if (head_out.size() != static_cast<Eigen::Index>(n_d) * (n_actions + 1))
    throw std::invalid_argument("assemble_dueling: head output size mismatch");
  Mat q(n_d, n_actions);
  for (int d = 0; d < n_d; ++d) {
    const int base = d * (n_actions + 1);
    const Real v = head_out[base];
    Real mean_adv = 0.0;
    for (int a = 0; a < n_actions; ++a) mean_adv += head_out[base + 1 + a];
    mean_adv /= n_actions;
    for (int a = 0; a < n_actions; ++a) q(d, a) = v + head_out[base + 1 + a] - mean_adv;
  }
  return q;
}

MatInt select_discrete(const Mat& q_values, const MatInt& mask, Real explore_rate,
                       RngStream& rng) {
  const int n_d = static_cast<int>(q_values.rows());
  const int n_a = static_cast<int>(q_values.cols());
  if (mask.rows() != n_d || mask.cols() != n_a)
    throw std::invalid_argument("select_discrete: mask shape mismatch");
  MatInt x = MatInt::Zero(n_a, n_d);
  for (int d = 0; d < n_d; ++d) {
    int allowed = 0;
    for (int a = 0; a < n_a; ++a) allowed += mask(d, a) != 0;
    if (allowed == 0) throw std::invalid_argument("select_discrete: fully masked subcarrier");
    int pick = -1;
    if (rng.uniform() < explore_rate) {
      int idx = rng.uniform_int(allowed);
      for (int a = 0; a < n_a; ++a) {
        if (mask(d, a) == 0) continue;
        if (idx-- == 0) {
          pick = a;
          break;
        }
      }
    } else {
      for (int a = 0; a < n_a; ++a) {
        if (mask(d, a) == 0) continue;
        if (pick < 0 || q_values(d, a) > q_values(d, pick)) pick = a;
      }
    }
    x(pick, d) = 1;
  }
  return x;
}

void ReplayBuffer::push(Transition t) {
  if (static_cast<int>(items_.size()) == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<int> ReplayBuffer::sample_indices(int batch, RngStream& rng) const {
  if (size() < batch) throw std::logic_error("replay: sampling before buffer holds a batch");
  std::vector<int> idx(batch);
  for (int i = 0; i < batch; ++i) idx[i] = rng.uniform_int(size());
  return idx;
}

void ReplayBuffer::save(std::ostream& os) const {
  write_u64(os, static_cast<std::uint64_t>(capacity_));
  write_u64(os, items_.size());
  for (const auto& t : items_) {
    write_vecb(os, t.obs);
    write_u64(os, static_cast<std::uint64_t>(t.assignment.rows()));
    write_u64(os, static_cast<std::uint64_t>(t.assignment.cols()));
    for (Eigen::Index i = 0; i < t.assignment.size(); ++i)
      write_u64(os, static_cast<std::uint64_t>(t.assignment.data()[i]));
    write_vecb(os, t.raw_cont);
    write_real(os, t.reward);
    write_vecb(os, t.next_obs);
    write_u64(os, t.terminal ? 1 : 0);
  }
}

void ReplayBuffer::load(std::istream& is) {
  capacity_ = static_cast<int>(read_u64(is));
  const auto n = read_u64(is);
  items_.clear();
  for (std::uint64_t i = 0; i < n; ++i) {
    Transition t;
    t.obs = read_vecb(is);
    const auto r = static_cast<Eigen::Index>(read_u64(is));
    const auto c = static_cast<Eigen::Index>(read_u64(is));
    t.assignment.resize(r, c);
    for (Eigen::Index j = 0; j < t.assignment.size(); ++j)
      t.assignment.data()[j] = static_cast<int>(read_u64(is));
    t.raw_cont = read_vecb(is);
    t.reward = read_real(is);
    t.next_obs = read_vecb(is);
    t.terminal = read_u64(is) != 0;
    items_.push_back(std::move(t));
  }
}

const char* kTrainReportCsvHeader =
    "episode,return,ee_lb,bits_total,energy_ub,mean_G1,mean_G2,mean_G3,mean_G4,mean_G5,mean_G6,"
    "epsilon,alpha";

std::string train_report_to_csv(const TrainReport& report) {
  std::string out(kTrainReportCsvHeader);
  out += "\n";
  for (const auto& r : report.rows) {
    csv::Row row;
    row.add(r.episode);
    row.add(r.ret);
    row.add(r.ee_lb);
    row.add(r.bits_total);
    row.add(r.energy_ub);
    for (int i = 0; i < 6; ++i) row.add(r.mean_g[i]);
    row.add(r.epsilon);
    row.add(r.alpha);
    out += row.str();
    out += "\n";
  }
  return out;
}

HybridAgent::HybridAgent(const Config& cfg, std::uint64_t seed)
    : replay(cfg.agent.buffer_capacity), cfg_(cfg), seed_(seed) {
  cfg_.validate();
  cfg_.system.synthesize_positions();
  layout_ = ContinuousLayout::make(cfg_.system);

  const int obs_dim = observation_length(cfg_.system);
  const int act_dim = layout_.dim;
  const int n_actions = cfg_.system.num_sus + 1;

  std::vector<int> enc_sizes{obs_dim};
  for (int h : cfg_.agent.encoder_hidden) enc_sizes.push_back(h);
  const int feat = enc_sizes.back();

  auto head_sizes = [&](int in, int out) {
    std::vector<int> s{in};
    for (int h : cfg_.agent.head_hidden) s.push_back(h);
    s.push_back(out);
    return s;
  };

  RngStream enc_rng(derive_seed(seed, 1));
  RngStream q_rng(derive_seed(seed, 2));
  RngStream c1_rng(derive_seed(seed, 3));
  RngStream c2_rng(derive_seed(seed, 4));
  RngStream actor_rng(derive_seed(seed, 5));
  encoder = nn::make_net(enc_sizes, enc_rng, nn::Act::Tanh, nn::Act::Tanh);
  q_head = nn::make_net(head_sizes(feat, cfg_.system.num_subcarriers * (n_actions + 1)), q_rng);
  q_target = q_head;
  critic1 = nn::make_net(head_sizes(feat + act_dim, 1), c1_rng);
  critic2 = nn::make_net(head_sizes(feat + act_dim, 1), c2_rng);
  critic1_t = critic1;
  critic2_t = critic2;
  actor = nn::make_net(head_sizes(feat, 2 * act_dim), actor_rng);

  opt_encoder = nn::AdamState::for_net(encoder, cfg_.agent.lr_q);
  opt_q = nn::AdamState::for_net(q_head, cfg_.agent.lr_q);
  opt_c1 = nn::AdamState::for_net(critic1, cfg_.agent.lr_critic);
  opt_c2 = nn::AdamState::for_net(critic2, cfg_.agent.lr_critic);
  opt_actor = nn::AdamState::for_net(actor, cfg_.agent.lr_actor);
  opt_alpha.lr = cfg_.agent.lr_alpha;
  log_alpha = std::log(cfg_.agent.init_alpha);
  target_entropy = cfg_.agent.target_entropy != 0.0 ? cfg_.agent.target_entropy
                                                    : -static_cast<Real>(act_dim);

  action_rng = RngStream(derive_seed(seed, 6));
  replay_rng = RngStream(derive_seed(seed, 7));

  // Input normalization: channel features arrive unit-scale from the
  // observation encoder; kinematics and bookkeeping entries are mapped to
  // comparable ranges here.
  const ObservationLayout ol = ObservationLayout::make(cfg_.system);
  obs_shift_ = Vec::Zero(obs_dim);
  obs_scale_ = Vec::Ones(obs_dim);
  for (int i = 0; i < cfg_.system.num_irs_elements; ++i) {
    obs_shift_[ol.phases + i] = kPi;
    obs_scale_[ol.phases + i] = 1.0 / kPi;
  }
  const Vec3 center = 0.5 * (cfg_.system.q0 + cfg_.system.qF);
  const Real half_span = std::max(0.5 * (cfg_.system.qF - cfg_.system.q0).norm(), 1.0);
  for (int i = 0; i < 3; ++i) {
    obs_shift_[ol.kinematics + i] = center[i];
    obs_scale_[ol.kinematics + i] = 1.0 / half_span;
    obs_scale_[ol.kinematics + 3 + i] = 1.0 / cfg_.system.v_max;
    obs_scale_[ol.kinematics + 6 + i] = 1.0 / cfg_.system.a_max;
  }
  obs_scale_[ol.ee_ema] = cfg_.agent.reward_scale;
  obs_shift_[ol.slot] = 0.5 * cfg_.system.num_slots;
  obs_scale_[ol.slot] = 2.0 / cfg_.system.num_slots;
}

Real HybridAgent::epsilon_for_episode(int episode) const {
  const auto& a = cfg_.agent;
  const Real horizon = std::max(1.0, std::ceil(a.eps_decay_frac * cfg_.train.episodes));
  if (episode >= horizon) return a.eps_end;
  return a.eps_start + (a.eps_end - a.eps_start) * (episode / horizon);
}

Vec HybridAgent::scale_obs(const Observation& obs) const {
  return ((obs.features - obs_shift_).array() * obs_scale_.array()).matrix();
}

Mat HybridAgent::encode_batch(const Mat& scaled_obs, nn::ForwardCache* cache) const {
  return nn::forward_batch(encoder, scaled_obs, cache);
}

Vec HybridAgent::encode(const Observation& obs) const {
  return nn::forward(encoder, scale_obs(obs));
}

Mat HybridAgent::dueling_q(const Vec& features) const {
  return assemble_dueling(nn::forward(q_head, features), cfg_.system.num_subcarriers,
                          cfg_.system.num_sus + 1);
}

HybridAction HybridAgent::act(const Observation& obs, Real explore_rate) {
  const Vec z = encode(obs);
  const Mat q = dueling_q(z);
  const MatInt mask = MatInt::Ones(q.rows(), q.cols());
  const MatInt x = select_discrete(q, mask, explore_rate, action_rng);

  const Vec actor_out = nn::forward(actor, z);
  const Vec mu = actor_out.head(layout_.dim);
  const Vec log_std = actor_out.tail(layout_.dim);
  const TanhSample s = sample_tanh_gaussian(mu, log_std, action_rng, cfg_.agent.log_std_min,
                                            cfg_.agent.log_std_max);
  HybridAction a = decode_continuous(s.action, cfg_.system);
  a.x = x;
  return a;
}

HybridAction HybridAgent::greedy_action(const Observation& obs) const {
  const Vec z = encode(obs);
  const Mat q = dueling_q(z);
  const MatInt mask = MatInt::Ones(q.rows(), q.cols());
  RngStream dummy(0);
  const MatInt x = select_discrete(q, mask, 0.0, dummy);
  const Vec actor_out = nn::forward(actor, z);
  Vec a_det(layout_.dim);
  for (int i = 0; i < layout_.dim; ++i) a_det[i] = std::tanh(actor_out[i]);
  HybridAction a = decode_continuous(a_det, cfg_.system);
  a.x = x;
  return a;
}

void HybridAgent::observe_transition(const Observation& obs, const HybridAction& action, Real r,
                                     const Observation& next_obs, bool terminal) {
  Transition t;
  t.obs = scale_obs(obs);
  t.assignment = action.x;
  t.raw_cont = action.raw_cont;
  t.reward = r;
  t.next_obs = scale_obs(next_obs);
  t.terminal = terminal;
  replay.push(std::move(t));
}

bool HybridAgent::can_update() const { return replay.size() >= cfg_.agent.batch_size; }

Batch HybridAgent::sample_batch() {
  const int bsz = cfg_.agent.batch_size;
  const std::vector<int> idx = replay.sample_indices(bsz, replay_rng);
  Batch b;
  const int obs_dim = static_cast<int>(replay.at(0).obs.size());
  b.obs.resize(obs_dim, bsz);
  b.next_obs.resize(obs_dim, bsz);
  b.raw_cont.resize(layout_.dim, bsz);
  b.rewards.resize(bsz);
  b.terminal.resize(bsz);
  b.assignments.resize(bsz);
  for (int i = 0; i < bsz; ++i) {
    const Transition& t = replay.at(idx[i]);
    b.obs.col(i) = t.obs;
    b.next_obs.col(i) = t.next_obs;
    b.raw_cont.col(i) = t.raw_cont;
    b.rewards[i] = t.reward;
    b.terminal[i] = t.terminal ? 1 : 0;
    b.assignments[i] = t.assignment;
  }
  return b;
}

Vec HybridAgent::d3qn_targets(const Batch& b) const {
  const int bsz = b.size();
  const int n_d = cfg_.system.num_subcarriers;
  const int n_a = cfg_.system.num_sus + 1;
  const Mat z_next = nn::forward_batch(encoder, b.next_obs);
  const Mat q_on = nn::forward_batch(q_head, z_next);
  const Mat q_tg = nn::forward_batch(q_target, z_next);
  Vec y(bsz);
  for (int i = 0; i < bsz; ++i) {
    Real boot = 0.0;
    if (!b.terminal[i]) {
      const Mat qo = assemble_dueling(q_on.col(i), n_d, n_a);
      const Mat qt = assemble_dueling(q_tg.col(i), n_d, n_a);
      for (int d = 0; d < n_d; ++d) {
        int best = 0;
        for (int a = 1; a < n_a; ++a)
          if (qo(d, a) > qo(d, best)) best = a;
        boot += qt(d, best);
      }
    }
    y[i] = cfg_.agent.reward_scale * b.rewards[i] + cfg_.agent.gamma * boot;
  }
  return y;
}

namespace {

// Joint Q of the stored assignment, plus the head-output gradient layout for
// the dueling decomposition.
Real joint_q_of_assignment(const Mat& q, const MatInt& x) {
  Real s = 0.0;
  for (int d = 0; d < q.rows(); ++d)
    for (int a = 0; a < q.cols(); ++a)
      if (x(a, d) == 1) s += q(d, a);
  return s;
}

}  // namespace

Real HybridAgent::d3qn_loss_value(const Batch& b, const Vec& targets) const {
  const int n_d = cfg_.system.num_subcarriers;
  const int n_a = cfg_.system.num_sus + 1;
  const Mat z = nn::forward_batch(encoder, b.obs);
  const Mat q_out = nn::forward_batch(q_head, z);
  Real loss = 0.0;
  for (int i = 0; i < b.size(); ++i) {
    const Real pred = joint_q_of_assignment(assemble_dueling(q_out.col(i), n_d, n_a),
                                            b.assignments[i]);
    const Real r = targets[i] - pred;
    loss += r * r;
  }
  return loss / b.size();
}

HybridAgent::HeadUpdate HybridAgent::d3qn_loss_grads(const Batch& b, const Vec& targets) const {
  const int bsz = b.size();
  const int n_d = cfg_.system.num_subcarriers;
  const int n_a = cfg_.system.num_sus + 1;

  nn::ForwardCache enc_cache, head_cache;
  const Mat z = nn::forward_batch(encoder, b.obs, &enc_cache);
  const Mat q_out = nn::forward_batch(q_head, z, &head_cache);

  Mat d_out = Mat::Zero(q_out.rows(), bsz);
  Real loss = 0.0;
  for (int i = 0; i < bsz; ++i) {
    const Mat q = assemble_dueling(q_out.col(i), n_d, n_a);
    const Real pred = joint_q_of_assignment(q, b.assignments[i]);
    const Real resid = pred - targets[i];
    loss += resid * resid;
    const Real g = 2.0 * resid / bsz;
    for (int d = 0; d < n_d; ++d) {
      int chosen = 0;
      for (int a = 0; a < n_a; ++a)
        if (b.assignments[i](a, d) == 1) chosen = a;
      const int base = d * (n_a + 1);
      d_out(base, i) += g;  // value stream
      for (int a = 0; a < n_a; ++a)
        d_out(base + 1 + a, i) += g * ((a == chosen ? 1.0 : 0.0) - 1.0 / n_a);
    }
  }

  HeadUpdate u;
  u.loss = loss / bsz;
  u.d_features = nn::backward_batch(q_head, head_cache, d_out, u.head);
  return u;
}

Vec HybridAgent::soft_targets(const Batch& b, const Mat& next_noise) const {
  const int bsz = b.size();
  const Mat z_next = nn::forward_batch(encoder, b.next_obs);
  const Mat actor_out = nn::forward_batch(actor, z_next);
  const Real alpha_v = alpha();
  Vec y(bsz);
  Mat a_next(layout_.dim, bsz);
  Vec logp(bsz);
  for (int i = 0; i < bsz; ++i) {
    const TanhSample s =
        tanh_gaussian_from_noise(actor_out.col(i).head(layout_.dim),
                                 actor_out.col(i).tail(layout_.dim), next_noise.col(i),
                                 cfg_.agent.log_std_min, cfg_.agent.log_std_max);
    a_next.col(i) = s.action;
    logp[i] = s.log_prob;
  }
  const Mat in = critic_input(z_next, a_next);
  const Mat q1 = nn::forward_batch(critic1_t, in);
  const Mat q2 = nn::forward_batch(critic2_t, in);
  for (int i = 0; i < bsz; ++i) {
    const Real bracket = std::min(q1(0, i), q2(0, i)) - alpha_v * logp[i];
    y[i] = cfg_.agent.reward_scale * b.rewards[i] +
           (b.terminal[i] ? 0.0 : cfg_.agent.gamma * bracket);
  }
  return y;
}

Mat HybridAgent::critic_input(const Mat& features, const Mat& actions) const {
  Mat in(features.rows() + actions.rows(), features.cols());
  in.topRows(features.rows()) = features;
  in.bottomRows(actions.rows()) = actions;
  return in;
}

Real HybridAgent::critic_loss_value(const Batch& b, const Vec& targets) const {
  const Mat z = nn::forward_batch(encoder, b.obs);
  const Mat in = critic_input(z, b.raw_cont);
  const Mat q1 = nn::forward_batch(critic1, in);
  const Mat q2 = nn::forward_batch(critic2, in);
  Real loss = 0.0;
  for (int i = 0; i < b.size(); ++i) {
    const Real r1 = targets[i] - q1(0, i);
    const Real r2 = targets[i] - q2(0, i);
    loss += r1 * r1 + r2 * r2;
  }
  return loss / b.size();
}

HybridAgent::CriticUpdate HybridAgent::critic_loss_grads(const Batch& b,
                                                         const Vec& targets) const {
  const int bsz = b.size();
  nn::ForwardCache enc_cache, c1_cache, c2_cache;
  const Mat z = nn::forward_batch(encoder, b.obs, &enc_cache);
  const Mat in = critic_input(z, b.raw_cont);
  const Mat q1 = nn::forward_batch(critic1, in, &c1_cache);
  const Mat q2 = nn::forward_batch(critic2, in, &c2_cache);

  Mat d1(1, bsz), d2(1, bsz);
  Real loss = 0.0;
  for (int i = 0; i < bsz; ++i) {
    const Real r1 = q1(0, i) - targets[i];
    const Real r2 = q2(0, i) - targets[i];
    loss += r1 * r1 + r2 * r2;
    d1(0, i) = 2.0 * r1 / bsz;
    d2(0, i) = 2.0 * r2 / bsz;
  }

  CriticUpdate u;
  u.loss = loss / bsz;
  const Mat din1 = nn::backward_batch(critic1, c1_cache, d1, u.c1);
  const Mat din2 = nn::backward_batch(critic2, c2_cache, d2, u.c2);
  u.d_features = din1.topRows(z.rows()) + din2.topRows(z.rows());
  return u;
}

Real HybridAgent::actor_loss_value(const Batch& b, const Mat& noise) const {
  const Mat z = nn::forward_batch(encoder, b.obs);
  const Mat actor_out = nn::forward_batch(actor, z);
  const Real alpha_v = alpha();
  Mat a(layout_.dim, b.size());
  Vec logp(b.size());
  for (int i = 0; i < b.size(); ++i) {
    const TanhSample s = tanh_gaussian_from_noise(actor_out.col(i).head(layout_.dim),
                                                  actor_out.col(i).tail(layout_.dim),
                                                  noise.col(i), cfg_.agent.log_std_min,
                                                  cfg_.agent.log_std_max);
    a.col(i) = s.action;
    logp[i] = s.log_prob;
  }
  const Mat in = critic_input(z, a);
  const Mat q1 = nn::forward_batch(critic1, in);
  const Mat q2 = nn::forward_batch(critic2, in);
  Real loss = 0.0;
  for (int i = 0; i < b.size(); ++i)
    loss += alpha_v * logp[i] - std::min(q1(0, i), q2(0, i));
  return loss / b.size();
}

HybridAgent::ActorUpdate HybridAgent::actor_loss_grads(const Batch& b, const Mat& noise) const {
  const int bsz = b.size();
  const int dim = layout_.dim;
  const Real lo = cfg_.agent.log_std_min;
  const Real hi = cfg_.agent.log_std_max;
  const Real alpha_v = alpha();

  const Mat z = nn::forward_batch(encoder, b.obs);  // features are data here
  nn::ForwardCache actor_cache;
  const Mat actor_out = nn::forward_batch(actor, z, &actor_cache);

  Mat a(dim, bsz), sig_xi(dim, bsz), tcorr(dim, bsz);
  Mat clamp_pass = Mat::Ones(dim, bsz);
  Vec logp(bsz);
  for (int i = 0; i < bsz; ++i) {
    Real lp = 0.0;
    for (int j = 0; j < dim; ++j) {
      const Real ls_raw = actor_out(dim + j, i);
      const Real ls = std::clamp(ls_raw, lo, hi);
      if (ls_raw < lo || ls_raw > hi) clamp_pass(j, i) = 0.0;
      const Real sigma = std::exp(ls);
      const Real u = actor_out(j, i) + sigma * noise(j, i);
      const Real av = std::tanh(u);
      a(j, i) = av;
      sig_xi(j, i) = sigma * noise(j, i);
      tcorr(j, i) = 2.0 * av * (1.0 - av * av) / (1.0 - av * av + kLogProbEps);
      lp += -ls - 0.5 * noise(j, i) * noise(j, i) - kHalfLog2Pi -
            std::log(1.0 - av * av + kLogProbEps);
    }
    logp[i] = lp;
  }

  nn::ForwardCache c1_cache, c2_cache;
  const Mat in = critic_input(z, a);
  const Mat q1 = nn::forward_batch(critic1, in, &c1_cache);
  const Mat q2 = nn::forward_batch(critic2, in, &c2_cache);

  // Route -min_j Q_j through whichever critic attains the minimum.
  Mat d1 = Mat::Zero(1, bsz), d2 = Mat::Zero(1, bsz);
  Real loss = 0.0;
  for (int i = 0; i < bsz; ++i) {
    const Real m = std::min(q1(0, i), q2(0, i));
    loss += alpha_v * logp[i] - m;
    if (q1(0, i) <= q2(0, i))
      d1(0, i) = -1.0 / bsz;
    else
      d2(0, i) = -1.0 / bsz;
  }
  nn::NetGrads junk1, junk2;
  const Mat din1 = nn::backward_batch(critic1, c1_cache, d1, junk1);
  const Mat din2 = nn::backward_batch(critic2, c2_cache, d2, junk2);
  const Mat da_critic = din1.bottomRows(dim) + din2.bottomRows(dim);

  Mat d_actor_out(2 * dim, bsz);
  for (int i = 0; i < bsz; ++i) {
    for (int j = 0; j < dim; ++j) {
      const Real one_minus_a2 = 1.0 - a(j, i) * a(j, i);
      const Real dmu = (alpha_v / bsz) * tcorr(j, i) + da_critic(j, i) * one_minus_a2;
      const Real dls = ((alpha_v / bsz) * (-1.0 + tcorr(j, i) * sig_xi(j, i)) +
                        da_critic(j, i) * one_minus_a2 * sig_xi(j, i)) *
                       clamp_pass(j, i);
      d_actor_out(j, i) = dmu;
      d_actor_out(dim + j, i) = dls;
    }
  }

  ActorUpdate u;
  u.loss = loss / bsz;
  u.log_probs = logp;
  nn::backward_batch(actor, actor_cache, d_actor_out, u.actor_grads);
  return u;
}

Real HybridAgent::temperature_loss_value(const Batch& b, const Mat& noise) const {
  const Mat z = nn::forward_batch(encoder, b.obs);
  const Mat actor_out = nn::forward_batch(actor, z);
  const Real alpha_v = alpha();
  Real loss = 0.0;
  for (int i = 0; i < b.size(); ++i) {
    const TanhSample s = tanh_gaussian_from_noise(actor_out.col(i).head(layout_.dim),
                                                  actor_out.col(i).tail(layout_.dim),
                                                  noise.col(i), cfg_.agent.log_std_min,
                                                  cfg_.agent.log_std_max);
    loss += -alpha_v * (s.log_prob + target_entropy);
  }
  return loss / b.size();
}

Real HybridAgent::temperature_grad(const Vec& log_probs) const {
  return -alpha() * ((log_probs.array() + target_entropy).mean());
}

void HybridAgent::assert_finite(Real loss, const char* which) const {
  if (!std::isfinite(loss))
    throw std::runtime_error(std::string("non-finite ") + which +
                             " loss after " + std::to_string(total_updates) + " updates");
}

void HybridAgent::gradient_step(bool update_targets) {
  gradient_step_on(sample_batch(), update_targets);
}

void HybridAgent::gradient_step_on(const Batch& b, bool update_targets) {
  // Discrete-head TD step.
  const Vec y_d = d3qn_targets(b);
  const HeadUpdate qu = d3qn_loss_grads(b, y_d);
  assert_finite(qu.loss, "discrete-head");
  nn::adam_step(q_head, qu.head, opt_q);

  // Twin-critic TD step. Fresh next actions use dedicated noise draws.
  Mat noise_next(layout_.dim, b.size());
  for (Eigen::Index i = 0; i < noise_next.size(); ++i) noise_next.data()[i] = replay_rng.normal();
  const Vec y_s = soft_targets(b, noise_next);
  const CriticUpdate cu = critic_loss_grads(b, y_s);
  assert_finite(cu.loss, "critic");
  nn::adam_step(critic1, cu.c1, opt_c1);
  nn::adam_step(critic2, cu.c2, opt_c2);

  // Shared encoder: both TD losses contribute with equal weight.
  nn::ForwardCache enc_cache;
  nn::forward_batch(encoder, b.obs, &enc_cache);
  nn::NetGrads enc_grads;
  nn::backward_batch(encoder, enc_cache, qu.d_features + cu.d_features, enc_grads);
  nn::adam_step(encoder, enc_grads, opt_encoder);

  // Actor and temperature on fresh reparameterized samples.
  Mat noise(layout_.dim, b.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = replay_rng.normal();
  const ActorUpdate au = actor_loss_grads(b, noise);
  assert_finite(au.loss, "actor");
  nn::adam_step(actor, au.actor_grads, opt_actor);

  opt_alpha.update(log_alpha, temperature_grad(au.log_probs));
  assert_finite(log_alpha, "temperature");

  if (update_targets) {
    nn::soft_update(q_target, q_head, cfg_.agent.tau);
    nn::soft_update(critic1_t, critic1, cfg_.agent.tau);
    nn::soft_update(critic2_t, critic2, cfg_.agent.tau);
  }
  ++total_updates;
}

TrainReport train_agent(HybridAgent& agent, int episodes_to_run) {
  const Config& cfg = agent.config();
  Environment env(cfg.system, derive_seed(agent.seed(), 0xe0f));
  env.set_next_episode(agent.episodes_done_ + 1);

  TrainReport report;
  for (int i = 0; i < episodes_to_run; ++i) {
    const int episode = agent.episodes_done_;
    const Real eps = agent.epsilon_for_episode(episode);
    Observation obs = env.reset();
    Real ret = 0.0;
    Vec6 g_sum = Vec6::Zero();
    for (int t = 0; t < cfg.system.num_slots; ++t) {
      const HybridAction a = agent.act(obs, eps);
      const StepOutcome out = env.step(a);
      agent.observe_transition(obs, a, out.reward, out.next_observation, out.terminal);
      ret += out.reward;
      g_sum += out.info.penalties;
      for (int g = 0; g < cfg.agent.grad_steps; ++g)
        if (agent.can_update()) agent.gradient_step();
      obs = out.next_observation;
    }
    EpisodeRow row;
    row.episode = episode;
    row.ret = ret;
    row.ee_lb = env.episode_ee_lb();
    row.bits_total = env.ledger().bits_total;
    row.energy_ub = env.ledger().e_ub_j;
    row.mean_g = g_sum / cfg.system.num_slots;
    row.epsilon = eps;
    row.alpha = agent.alpha();
    report.rows.push_back(row);
    ++agent.episodes_done_;
  }
  return report;
}

void HybridAgent::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write("EESIMCKPT1", 10);
  write_u64(os, config_hash(cfg_));
  write_u64(os, seed_);
  write_u64(os, static_cast<std::uint64_t>(episodes_done_));
  write_u64(os, static_cast<std::uint64_t>(total_updates));
  write_real(os, log_alpha);
  write_real(os, target_entropy);
  for (const auto* net : {&encoder, &q_head, &q_target, &critic1, &critic2, &critic1_t,
                          &critic2_t, &actor})
    nn::write_net(os, *net);
  for (const auto* opt : {&opt_encoder, &opt_q, &opt_c1, &opt_c2, &opt_actor})
    nn::write_adam(os, *opt);
  write_real(os, opt_alpha.m);
  write_real(os, opt_alpha.v);
  write_u64(os, static_cast<std::uint64_t>(opt_alpha.step));
  write_real(os, opt_alpha.lr);
  write_string(os, action_rng.serialize());
  write_string(os, replay_rng.serialize());
  replay.save(os);
}

HybridAgent HybridAgent::load_checkpoint(const std::string& path, const Config& cfg) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[10];
  is.read(magic, 10);
  if (std::string(magic, 10) != "EESIMCKPT1")
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::uint64_t stored_hash = read_u64(is);
  if (stored_hash != config_hash(cfg))
    throw std::runtime_error("checkpoint/config mismatch (hash check failed): " + path);
  const std::uint64_t seed = read_u64(is);

  HybridAgent agent(cfg, seed);
  agent.episodes_done_ = static_cast<int>(read_u64(is));
  agent.total_updates = static_cast<long>(read_u64(is));
  agent.log_alpha = read_real(is);
  agent.target_entropy = read_real(is);
  for (auto* net : {&agent.encoder, &agent.q_head, &agent.q_target, &agent.critic1,
                    &agent.critic2, &agent.critic1_t, &agent.critic2_t, &agent.actor})
    *net = nn::read_net(is);
  for (auto* opt : {&agent.opt_encoder, &agent.opt_q, &agent.opt_c1, &agent.opt_c2,
                    &agent.opt_actor})
    *opt = nn::read_adam(is);
  agent.opt_alpha.m = read_real(is);
  agent.opt_alpha.v = read_real(is);
  agent.opt_alpha.step = static_cast<long>(read_u64(is));
  agent.opt_alpha.lr = read_real(is);
  agent.action_rng.deserialize(read_string(is));
  agent.replay_rng.deserialize(read_string(is));
  agent.replay.load(is);
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return agent;
}

}  // namespace eesim
