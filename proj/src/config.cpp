// SPDX-License-Identifier: Apache-2.0

#include "eesim/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace eesim {

using nlohmann::json;

void SystemConfig::synthesize_positions() {
  const Vec3 along = (qF - q0).normalized();
  const Vec3 lateral = Vec3(-along.y(), along.x(), 0.0).norm() > 1e-9
                           ? Vec3(-along.y(), along.x(), 0.0).normalized()
                           : Vec3(0.0, 1.0, 0.0);
  const Vec3 mid = 0.5 * (q0 + qF);
  const Real span = (qF - q0).norm();
  if (su_positions.empty()) {
    su_positions.resize(num_sus);
    for (int k = 0; k < num_sus; ++k) {
      const Real frac = num_sus == 1 ? 0.5 : static_cast<Real>(k) / (num_sus - 1) - 0.5;
      Vec3 p = mid + frac * 0.6 * span * along + 0.25 * span * lateral;
      p.z() = 0.0;
      su_positions[k] = p;
    }
  }
  if (pu_positions.empty()) {
    pu_positions.resize(num_pus);
    for (int j = 0; j < num_pus; ++j) {
      const Real frac = num_pus == 1 ? 0.5 : static_cast<Real>(j) / (num_pus - 1) - 0.5;
      Vec3 p = mid + frac * 0.6 * span * along - 0.35 * span * lateral;
      p.z() = 0.0;
      pu_positions[j] = p;
    }
  }
}

void SystemConfig::validate() const {
  auto check = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("system: ") + msg);
  };
  check(carrier_freq_hz > 0, "carrier_freq_hz must be > 0");
  check(bandwidth_hz > 0, "bandwidth_hz must be > 0");
  check(num_subcarriers >= 1, "num_subcarriers must be >= 1");
  check(num_bs_antennas >= 1, "num_bs_antennas must be >= 1");
  check(num_irs_elements >= 0, "num_irs_elements must be >= 0");
  check(num_sus >= 1, "num_sus must be >= 1");
  check(num_pus >= 1, "num_pus must be >= 1");
  check(noise_figure_db >= 0, "noise_figure_db must be >= 0");
  check(v_min > 0, "v_min must be > 0");
  check(v_min < v_max, "v_min must be < v_max");
  check(a_max > 0, "a_max must be > 0");
  check(altitude_m > 0, "altitude_m must be > 0");
  check(slot_seconds > 0, "slot_seconds must be > 0");
  check(num_slots >= 1, "num_slots must be >= 1");
  check(c1 > 0 && c2 > 0, "propulsion coefficients must be > 0");
  check(gravity > 0, "gravity must be > 0");
  check(uav_mass_kg > 0, "uav_mass_kg must be > 0");
  check((qF - q0).norm() > 0, "q0 and qF must differ");
  check((beta.array() >= 0).all(), "beta weights must be >= 0");
  check(epsilon > 0, "epsilon must be > 0");
  check(ema_rho > 0 && ema_rho <= 1, "ema_rho must be in (0,1]");
  check(pathloss_exp_los > 0 && pathloss_exp_nlos > 0, "pathloss exponents must be > 0");
  check(pu_extra_noise_w >= 0, "pu_extra_noise_w must be >= 0");
  check(wideband_threshold >= 1, "wideband_threshold must be >= 1");
  if (!su_positions.empty())
    check(static_cast<int>(su_positions.size()) == num_sus, "su_positions size must equal num_sus");
  if (!pu_positions.empty())
    check(static_cast<int>(pu_positions.size()) == num_pus, "pu_positions size must equal num_pus");
}

void AgentConfig::validate() const {
  auto check = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("agent: ") + msg);
  };
  check(gamma > 0 && gamma <= 1, "gamma must be in (0,1]");
  check(tau > 0 && tau <= 1, "tau must be in (0,1]");
  check(lr_q > 0 && lr_critic > 0 && lr_actor > 0 && lr_alpha > 0, "learning rates must be > 0");
  check(batch_size >= 1, "batch_size must be >= 1");
  check(grad_steps >= 0, "grad_steps must be >= 0");
  check(buffer_capacity >= batch_size, "buffer_capacity must be >= batch_size");
  check(eps_start >= eps_end && eps_end >= 0 && eps_start <= 1, "epsilon schedule must satisfy 0 <= eps_end <= eps_start <= 1");
  check(eps_decay_frac > 0 && eps_decay_frac <= 1, "eps_decay_frac must be in (0,1]");
  check(!encoder_hidden.empty() && !head_hidden.empty(), "hidden layer lists must be nonempty");
  check(reward_scale > 0, "reward_scale must be > 0");
  check(log_std_min < log_std_max, "log_std_min must be < log_std_max");
  check(init_alpha > 0, "init_alpha must be > 0");
}

void TrainConfig::validate() const {
  if (episodes < 1) throw ConfigError("train: episodes must be >= 1");
  if (eval_episodes < 1) throw ConfigError("train: eval_episodes must be >= 1");
}

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(field + " must be a 3-element array");
  return Vec3(j[0].get<Real>(), j[1].get<Real>(), j[2].get<Real>());
}

json system_to_json(const SystemConfig& s) {
  json j;
  j["carrier_freq_hz"] = s.carrier_freq_hz;
  j["bandwidth_hz"] = s.bandwidth_hz;
  j["num_subcarriers"] = s.num_subcarriers;
  j["num_bs_antennas"] = s.num_bs_antennas;
  j["num_irs_elements"] = s.num_irs_elements;
  j["num_sus"] = s.num_sus;
  j["num_pus"] = s.num_pus;
  j["noise_psd_dbm_hz"] = s.noise_psd_dbm_hz;
  j["noise_figure_db"] = s.noise_figure_db;
  j["p_max_dbm"] = s.p_max_dbm;
  j["gamma_d_dbm"] = s.gamma_d_dbm;
  j["v_max"] = s.v_max;
  j["v_min"] = s.v_min;
  j["a_max"] = s.a_max;
  j["altitude_m"] = s.altitude_m;
  j["slot_seconds"] = s.slot_seconds;
  j["num_slots"] = s.num_slots;
  j["c1"] = s.c1;
  j["c2"] = s.c2;
  j["gravity"] = s.gravity;
  j["uav_mass_kg"] = s.uav_mass_kg;
  j["q0"] = vec3_to_json(s.q0);
  j["qF"] = vec3_to_json(s.qF);
  j["beta"] = std::vector<Real>(s.beta.data(), s.beta.data() + 6);
  j["epsilon"] = s.epsilon;
  j["ema_rho"] = s.ema_rho;
  j["rician_k_db"] = s.rician_k_db;
  j["pathloss_exp_los"] = s.pathloss_exp_los;
  j["pathloss_exp_nlos"] = s.pathloss_exp_nlos;
  j["irs_enabled"] = s.irs_enabled;
  j["pu_extra_noise_w"] = s.pu_extra_noise_w;
  j["bs_position"] = vec3_to_json(s.bs_position);
  json sus = json::array();
  for (const auto& p : s.su_positions) sus.push_back(vec3_to_json(p));
  j["su_positions"] = sus;
  json pus = json::array();
  for (const auto& p : s.pu_positions) pus.push_back(vec3_to_json(p));
  j["pu_positions"] = pus;
  j["wideband_threshold"] = s.wideband_threshold;
  return j;
}

json agent_to_json(const AgentConfig& a) {
  json j;
  j["gamma"] = a.gamma;
  j["tau"] = a.tau;
  j["lr_q"] = a.lr_q;
  j["lr_critic"] = a.lr_critic;
  j["lr_actor"] = a.lr_actor;
  j["lr_alpha"] = a.lr_alpha;
  j["batch_size"] = a.batch_size;
  j["grad_steps"] = a.grad_steps;
  j["buffer_capacity"] = a.buffer_capacity;
  j["target_entropy"] = a.target_entropy;
  j["eps_start"] = a.eps_start;
  j["eps_end"] = a.eps_end;
  j["eps_decay_frac"] = a.eps_decay_frac;
  j["encoder_hidden"] = a.encoder_hidden;
  j["head_hidden"] = a.head_hidden;
  j["reward_scale"] = a.reward_scale;
  j["log_std_min"] = a.log_std_min;
  j["log_std_max"] = a.log_std_max;
  j["init_alpha"] = a.init_alpha;
  return j;
}

json train_to_json(const TrainConfig& t) {
  json j;
  j["episodes"] = t.episodes;
  j["eval_episodes"] = t.eval_episodes;
  return j;
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& scope) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(scope + "." + key + ": wrong type");
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError(scope + ": unknown field '" + it.key() + "'");
  }
}

void system_from_json(const json& j, SystemConfig& s) {
  static const std::set<std::string> known = {
      "carrier_freq_hz", "bandwidth_hz", "num_subcarriers", "num_bs_antennas",
      "num_irs_elements", "num_sus", "num_pus", "noise_psd_dbm_hz", "noise_figure_db",
      "p_max_dbm", "gamma_d_dbm", "v_max", "v_min", "a_max", "altitude_m", "slot_seconds",
      "num_slots", "c1", "c2", "gravity", "uav_mass_kg", "q0", "qF", "beta", "epsilon",
      "ema_rho", "rician_k_db", "pathloss_exp_los", "pathloss_exp_nlos", "irs_enabled",
      "pu_extra_noise_w", "bs_position", "su_positions", "pu_positions", "wideband_threshold"};
  reject_unknown(j, known, "system");
  read_field(j, "carrier_freq_hz", s.carrier_freq_hz, "system");
  read_field(j, "bandwidth_hz", s.bandwidth_hz, "system");
  read_field(j, "num_subcarriers", s.num_subcarriers, "system");
  read_field(j, "num_bs_antennas", s.num_bs_antennas, "system");
  read_field(j, "num_irs_elements", s.num_irs_elements, "system");
  read_field(j, "num_sus", s.num_sus, "system");
  read_field(j, "num_pus", s.num_pus, "system");
  read_field(j, "noise_psd_dbm_hz", s.noise_psd_dbm_hz, "system");
  read_field(j, "noise_figure_db", s.noise_figure_db, "system");
  read_field(j, "p_max_dbm", s.p_max_dbm, "system");
  read_field(j, "gamma_d_dbm", s.gamma_d_dbm, "system");
  read_field(j, "v_max", s.v_max, "system");
  read_field(j, "v_min", s.v_min, "system");
  read_field(j, "a_max", s.a_max, "system");
  read_field(j, "altitude_m", s.altitude_m, "system");
  read_field(j, "slot_seconds", s.slot_seconds, "system");
  read_field(j, "num_slots", s.num_slots, "system");
  read_field(j, "c1", s.c1, "system");
  read_field(j, "c2", s.c2, "system");
  read_field(j, "gravity", s.gravity, "system");
  read_field(j, "uav_mass_kg", s.uav_mass_kg, "system");
  if (j.contains("q0")) s.q0 = vec3_from_json(j["q0"], "system.q0");
  if (j.contains("qF")) s.qF = vec3_from_json(j["qF"], "system.qF");
  if (j.contains("beta")) {
    auto b = j["beta"].get<std::vector<Real>>();
    if (b.size() != 6) throw ConfigError("system.beta must have 6 entries");
    for (int i = 0; i < 6; ++i) s.beta[i] = b[i];
  }
  read_field(j, "epsilon", s.epsilon, "system");
  read_field(j, "ema_rho", s.ema_rho, "system");
  read_field(j, "rician_k_db", s.rician_k_db, "system");
  read_field(j, "pathloss_exp_los", s.pathloss_exp_los, "system");
  read_field(j, "pathloss_exp_nlos", s.pathloss_exp_nlos, "system");
  read_field(j, "irs_enabled", s.irs_enabled, "system");
  read_field(j, "pu_extra_noise_w", s.pu_extra_noise_w, "system");
  if (j.contains("bs_position")) s.bs_position = vec3_from_json(j["bs_position"], "system.bs_position");
  if (j.contains("su_positions")) {
    s.su_positions.clear();
    for (const auto& p : j["su_positions"]) s.su_positions.push_back(vec3_from_json(p, "system.su_positions[]"));
  }
  if (j.contains("pu_positions")) {
    s.pu_positions.clear();
    for (const auto& p : j["pu_positions"]) s.pu_positions.push_back(vec3_from_json(p, "system.pu_positions[]"));
  }
  read_field(j, "wideband_threshold", s.wideband_threshold, "system");
}

void agent_from_json(const json& j, AgentConfig& a) {
  static const std::set<std::string> known = {
      "gamma", "tau", "lr_q", "lr_critic", "lr_actor", "lr_alpha", "batch_size", "grad_steps",
      "buffer_capacity", "target_entropy", "eps_start", "eps_end", "eps_decay_frac",
      "encoder_hidden", "head_hidden", "reward_scale", "log_std_min", "log_std_max", "init_alpha"};
  reject_unknown(j, known, "agent");
  read_field(j, "gamma", a.gamma, "agent");
  read_field(j, "tau", a.tau, "agent");
  read_field(j, "lr_q", a.lr_q, "agent");
  read_field(j, "lr_critic", a.lr_critic, "agent");
  read_field(j, "lr_actor", a.lr_actor, "agent");
  read_field(j, "lr_alpha", a.lr_alpha, "agent");
  read_field(j, "batch_size", a.batch_size, "agent");
  read_field(j, "grad_steps", a.grad_steps, "agent");
  read_field(j, "buffer_capacity", a.buffer_capacity, "agent");
  read_field(j, "target_entropy", a.target_entropy, "agent");
  read_field(j, "eps_start", a.eps_start, "agent");
  read_field(j, "eps_end", a.eps_end, "agent");
  read_field(j, "eps_decay_frac", a.eps_decay_frac, "agent");
  read_field(j, "encoder_hidden", a.encoder_hidden, "agent");
  read_field(j, "head_hidden", a.head_hidden, "agent");
  read_field(j, "reward_scale", a.reward_scale, "agent");
  read_field(j, "log_std_min", a.log_std_min, "agent");
  read_field(j, "log_std_max", a.log_std_max, "agent");
  read_field(j, "init_alpha", a.init_alpha, "agent");
}

void train_from_json(const json& j, TrainConfig& t) {
  static const std::set<std::string> known = {"episodes", "eval_episodes"};
  reject_unknown(j, known, "train");
  read_field(j, "episodes", t.episodes, "train");
  read_field(j, "eval_episodes", t.eval_episodes, "train");
}

Config config_from_json(const json& j) {
  static const std::set<std::string> known = {"system", "agent", "train"};
  reject_unknown(j, known, "config");
  Config cfg;
  if (j.contains("system")) system_from_json(j["system"], cfg.system);
  if (j.contains("agent")) agent_from_json(j["agent"], cfg.agent);
  if (j.contains("train")) train_from_json(j["train"], cfg.train);
  cfg.system.synthesize_positions();
  cfg.validate();
  return cfg;
}

}  // namespace

Config paper_profile() {
  Config cfg;
  cfg.system.synthesize_positions();
  cfg.agent.reward_scale = 1e-6;
  cfg.validate();
  return cfg;
}

Config desk_profile() {
  Config cfg;
  auto& s = cfg.system;
  s.num_bs_antennas = 2;
  s.num_irs_elements = 8;
  s.num_subcarriers = 4;
  s.num_sus = 2;
  s.num_pus = 2;
  s.num_slots = 20;
  s.q0 = Vec3(-60.0, 0.0, 100.0);
  s.qF = Vec3(60.0, 0.0, 100.0);
  s.bs_position = Vec3(0.0, -20.0, 25.0);
  s.synthesize_positions();
  cfg.agent.reward_scale = 2e-6;
  cfg.train.episodes = 300;
  cfg.validate();
  return cfg;
}

Config parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string resolved_config_json(const Config& cfg) {
  json j;
  j["system"] = system_to_json(cfg.system);
  j["agent"] = agent_to_json(cfg.agent);
  j["train"] = train_to_json(cfg.train);
  return j.dump(2);
}

std::uint64_t config_hash(const Config& cfg) {
  const std::string s = resolved_config_json(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace eesim
