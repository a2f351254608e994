// SPDX-License-Identifier: Apache-2.0
//
// Hybrid scheduler/controller learner: a dueling double-Q head for the
// discrete subcarrier assignment, a soft actor-critic head for beamformers,
// reflection phases, and acceleration, a shared encoder, and uniform replay.

#pragma once

#include "eesim/config.hpp"
#include "eesim/env.hpp"
#include "eesim/nn.hpp"

#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace eesim {

/// Packing of the flat (-1,1) continuous action. Full mode carries one
/// beamformer per (user, subcarrier); wideband mode carries one direction
/// per user plus per-(user,subcarrier) power scalars.
struct ContinuousLayout {
  bool wideband = false;
  int n_t = 0, k_users = 0, n_d = 0, n_i = 0;
  int beam_offset = 0, beam_len = 0;
  int power_offset = 0, power_len = 0;  // wideband only
  int phase_offset = 0;
  int accel_offset = 0;
  int dim = 0;

  static ContinuousLayout make(const SystemConfig& cfg);
};

/// Maps a flat raw vector into the continuous action fields (x left empty).
HybridAction decode_continuous(const Vec& raw, const SystemConfig& cfg);

/// Exact inverse of decode_continuous on interior points (full mode only).
Vec encode_continuous(const HybridAction& action, const SystemConfig& cfg);

/// Reparameterized squashed-Gaussian sample with the change-of-variables
/// log-density. `log_std_raw` is clamped to [lo, hi] before use.
struct TanhSample {
  Vec action;    // in (-1,1)^dim
  Real log_prob;
};

TanhSample tanh_gaussian_from_noise(const Vec& mu, const Vec& log_std_raw, const Vec& xi,
                                    Real lo, Real hi);
TanhSample sample_tanh_gaussian(const Vec& mu, const Vec& log_std_raw, RngStream& rng,
                                Real lo = -20.0, Real hi = 2.0);

/// Per-subcarrier dueling assembly: head output packs [V_d, A_d,0..A_d,K]
/// per subcarrier; Q_d(a) = V_d + A_d(a) - mean_a' A_d(a').
Mat assemble_dueling(const Vec& head_out, int n_d, int n_actions);

/// Masked epsilon-greedy assignment; ties resolved toward the lowest index.
MatInt select_discrete(const Mat& q_values, const MatInt& mask, Real explore_rate,
                       RngStream& rng);

struct Transition {
  Vec obs;
  MatInt assignment;
  Vec raw_cont;  // pre-projection continuous sample
  Real reward = 0.0;
  Vec next_obs;
  bool terminal = false;
};

/// Bounded FIFO ring with a uniform sampler over an explicit stream.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {}

  void push(Transition t);
  int size() const { return static_cast<int>(items_.size()); }
  int capacity() const { return capacity_; }
  const Transition& at(int i) const { return items_[i]; }
  std::vector<int> sample_indices(int batch, RngStream& rng) const;

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  int capacity_;
  std::deque<Transition> items_;
};

struct Batch {
  Mat obs;                        // obs_dim x B (already input-scaled)
  std::vector<MatInt> assignments;
  Mat raw_cont;                   // act_dim x B
  Vec rewards;                    // unscaled environment rewards
  Mat next_obs;
  std::vector<std::uint8_t> terminal;

  int size() const { return static_cast<int>(obs.cols()); }
};

struct EpisodeRow {
  int episode = 0;
  Real ret = 0.0;
  Real ee_lb = 0.0;
  Real bits_total = 0.0;
  Real energy_ub = 0.0;
  Vec6 mean_g = Vec6::Zero();
  Real epsilon = 0.0;
  Real alpha = 0.0;
};

struct TrainReport {
  std::vector<EpisodeRow> rows;
};

extern const char* kTrainReportCsvHeader;
std::string train_report_to_csv(const TrainReport& report);

class HybridAgent {
 public:
  HybridAgent(const Config& cfg, std::uint64_t seed);

  const Config& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  const ContinuousLayout& layout() const { return layout_; }
  int feature_dim() const { return encoder.output_size(); }
  Real alpha() const { return std::exp(log_alpha); }
  Real epsilon_for_episode(int episode) const;
  int episodes_done() const { return episodes_done_; }

  /// Affine input scaling applied before the encoder (config-derived).
  Vec scale_obs(const Observation& obs) const;

  Vec encode(const Observation& obs) const;
  Mat dueling_q(const Vec& features) const;

  HybridAction act(const Observation& obs, Real explore_rate);
  HybridAction greedy_action(const Observation& obs) const;

  void observe_transition(const Observation& obs, const HybridAction& action, Real r,
                          const Observation& next_obs, bool terminal);
  bool can_update() const;
  Batch sample_batch();

  // --- loss surfaces -------------------------------------------------
  // Targets are computed once and then held constant; gradients never flow
  // through them. The *_value forms re-evaluate the loss at the current
  // parameters with everything else frozen (finite-difference hooks).

  Vec d3qn_targets(const Batch& b) const;
  Real d3qn_loss_value(const Batch& b, const Vec& targets) const;

  Vec soft_targets(const Batch& b, const Mat& next_noise) const;
  Real critic_loss_value(const Batch& b, const Vec& targets) const;

  Real actor_loss_value(const Batch& b, const Mat& noise) const;
  Real temperature_loss_value(const Batch& b, const Mat& noise) const;

  struct HeadUpdate {
    Real loss = 0.0;
    nn::NetGrads head;
    Mat d_features;  // gradient w.r.t. encoder output
  };
  HeadUpdate d3qn_loss_grads(const Batch& b, const Vec& targets) const;

  struct CriticUpdate {
    Real loss = 0.0;
    nn::NetGrads c1, c2;
    Mat d_features;
  };
  CriticUpdate critic_loss_grads(const Batch& b, const Vec& targets) const;

  struct ActorUpdate {
    Real loss = 0.0;
    nn::NetGrads actor_grads;
    Vec log_probs;  // per sample, reused by the temperature update
  };
  ActorUpdate actor_loss_grads(const Batch& b, const Mat& noise) const;

  Real temperature_grad(const Vec& log_probs) const;  // d/d(log alpha)

  /// One full off-policy update on a sampled batch: discrete head, twin
  /// critics, shared encoder (both head losses, equal weight), actor,
  /// temperature, then target blends unless disabled.
  void gradient_step(bool update_targets = true);
  void gradient_step_on(const Batch& b, bool update_targets = true);

  void save_checkpoint(const std::string& path) const;
  static HybridAgent load_checkpoint(const std::string& path, const Config& cfg);

  // Parameter stores are deliberately open; tests and the training loop own
  // them exclusively.
  nn::DenseNet encoder;
  nn::DenseNet q_head, q_target;
  nn::DenseNet critic1, critic2, critic1_t, critic2_t;
  nn::DenseNet actor;
  Real log_alpha = 0.0;
  nn::AdamState opt_encoder, opt_q, opt_c1, opt_c2, opt_actor;
  nn::AdamScalar opt_alpha;
  ReplayBuffer replay;
  RngStream action_rng;
  RngStream replay_rng;
  Real target_entropy = 0.0;
  long total_updates = 0;

  friend TrainReport train_agent(HybridAgent& agent, int episodes_to_run);

 private:
  Mat encode_batch(const Mat& scaled_obs, nn::ForwardCache* cache = nullptr) const;
  Mat critic_input(const Mat& features, const Mat& actions) const;
  void assert_finite(Real loss, const char* which) const;

  Config cfg_;
  std::uint64_t seed_ = 0;
  ContinuousLayout layout_;
  Vec obs_shift_, obs_scale_;
  int episodes_done_ = 0;
};

/// Runs Algorithm-style training episodes against a fresh environment that
/// continues from the agent's episode counter; fully reproducible per seed.
TrainReport train_agent(HybridAgent& agent, int episodes_to_run);

}  // namespace eesim
