#include "weic/environment.hpp"

#include <algorithm>
#include <cmath>

namespace weic {

EpisodeResult finalize(std::span<const std::uint8_t> pending, std::span<const double> round_times,
                       double penalty_time) {
  EpisodeResult r;
  r.round_times.assign(round_times.begin(), round_times.end());
  for (double t : r.round_times) r.total_time += t;
  r.served = to_fulfilled(pending);
  const auto unserved = static_cast<double>(std::count(pending.begin(), pending.end(), std::uint8_t{1}));
  if (unserved == 0.0) {
    if (!(r.total_time > 0.0)) throw std::logic_error("all demands served in zero time");
    r.reward = 1.0 / r.total_time;
  } else {
    r.reward = 1.0 / (r.total_time + unserved * penalty_time);
  }
  return r;
}

double default_penalty_time(const ChannelSet& channels, const SystemConfig& config) {
  double worst = 0.0;
  for (UserId t = 0; t < channels.users(); ++t)
    for (UserId k = 0; k < channels.users(); ++k) {
      if (t == k) continue;
      const CMatrix& h = channels.link(t, k);
      const CVector v = mrt_beamformer(h, config.power);
      const double s = (h.adjoint() * v).squaredNorm() / SystemConfig::noise_power;
      const std::vector<double> one{s};
      worst = std::max(worst, round_time(one, config));
    }
  return 10.0 * worst;
}

Episode::Episode(Scenario scenario, ChannelSet channels, EpisodeOptions options)
    : scenario_(std::move(scenario)), channels_(std::move(channels)) {
  if (channels_.users() != scenario_.users() || channels_.antennas() != scenario_.config.antennas)
    throw std::invalid_argument("channel set does not match the scenario dimensions");
  side_info_ = side_info_graph(scenario_);
  penalty_time_ = options.penalty_time >= 0.0 ? options.penalty_time : default_penalty_time(channels_, scenario_.config);
  reset();
}

std::vector<Observation> Episode::reset() {
  const auto K = static_cast<std::size_t>(scenario_.users());
  pending_.assign(K, 1);
  round_times_.assign(K, 0.0);
  round_sinrs_.assign(K, {});
  log_.clear();
  next_round_ = 0;
  std::vector<Observation> out;
  for (UserId t = 0; t < scenario_.users(); ++t) out.push_back(observe(t));
  return out;
}

Observation Episode::observe(UserId agent) const {
  if (agent < 0 || agent >= scenario_.users()) throw std::out_of_range("agent out of range");
  Observation o;
  o.agent = agent;
  o.pending = pending_;
  o.side_info = side_info_;
  o.local_csi.resize(static_cast<std::size_t>(scenario_.users()));
  for (UserId k = 0; k < scenario_.users(); ++k)
    if (k != agent) o.local_csi[static_cast<std::size_t>(k)] = channels_.link(agent, k);
  return o;
}

StepOutcome Episode::step(UserId round, const RoundAction& action, const BeamformerSet& beams, long action_index) {
  const int K = scenario_.users();
  const auto& cfg = scenario_.config;
  if (done()) throw StepRejected("episode_done", "all rounds have been played");
  if (round != next_round_)
    throw StepRejected("out_of_order", "expected round " + std::to_string(next_round_) + ", got " + std::to_string(round));

  if (static_cast<int>(action.blocks.size()) > cfg.antennas)
    throw StepRejected("infeasible_action", "more messages than antennas");
  std::vector<int> hits(static_cast<std::size_t>(K), 0);
  for (const auto& b : action.blocks) {
    if (b.empty()) throw StepRejected("infeasible_action", "empty message");
    for (UserId u : b) {
      if (u < 0 || u >= K || u == round) throw StepRejected("infeasible_action", "invalid destination");
      if (++hits[static_cast<std::size_t>(u)] > 1) throw StepRejected("infeasible_action", "destination repeated");
    }
    if (!block_decodable(b, round, scenario_)) throw StepRejected("infeasible_action", "message not decodable");
  }
  if (beams.vectors.size() != action.blocks.size()) throw StepRejected("bad_beams", "need one beamformer per message");
  for (const auto& v : beams.vectors) {
    if (v.size() != cfg.antennas) throw StepRejected("bad_beams", "beamformer length must equal Nt");
    if (!v.allFinite()) throw StepRejected("bad_beams", "beamformer has non-finite entries");
  }
  if (beams.total_power() > cfg.power * (1.0 + 1e-9) + 1e-12)
    throw StepRejected("power_violation", "beam power " + std::to_string(beams.total_power()) + " exceeds P");

  StepOutcome out;
  out.sinrs = round_sinrs(channels_, round, action, beams);
  out.time = round_time(out.sinrs, cfg);
  for (UserId u : action.served()) pending_[static_cast<std::size_t>(u)] = 0;
  out.pending = pending_;

  round_times_[static_cast<std::size_t>(round)] = out.time;
  round_sinrs_[static_cast<std::size_t>(round)] = out.sinrs;
  nlohmann::ordered_json entry;
  entry["round"] = round;
  entry["action_index"] = action_index;
  entry["action"] = action_to_json(action);
  entry["beams"] = beams_to_json(beams);
  entry["time"] = out.time;
  log_.push_back(entry.dump());
  ++next_round_;
  return out;
}

EpisodeResult Episode::finalize() const { return weic::finalize(pending_, round_times_, penalty_time_); }

double Episode::recompute_total_time() const {
  double total = 0.0;
  for (const auto& s : round_sinrs_) total += round_time(s, scenario_.config);
  return total;
}

std::vector<std::uint8_t> to_fulfilled(std::span<const std::uint8_t> pending) {
  std::vector<std::uint8_t> out(pending.size());
  std::transform(pending.begin(), pending.end(), out.begin(), [](std::uint8_t p) { return p ? 0 : 1; });
  return out;
}

nlohmann::ordered_json observation_to_json(const Observation& obs) {
  nlohmann::ordered_json j;
  j["agent"] = obs.agent;
  j["e"] = to_fulfilled(obs.pending);
  nlohmann::ordered_json csi = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < obs.local_csi.size(); ++k)
    csi.push_back(static_cast<int>(k) == obs.agent ? nlohmann::ordered_json(nullptr) : matrix_to_json(obs.local_csi[k]));
  j["local_csi"] = std::move(csi);
  nlohmann::ordered_json adj = nlohmann::ordered_json::array();
  for (int i = 0; i < obs.side_info.users; ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int k = 0; k < obs.side_info.users; ++k) row.push_back(obs.side_info.edge(i, k) ? 1 : 0);
    adj.push_back(std::move(row));
  }
  j["side_info"] = std::move(adj);
  return j;
}

nlohmann::ordered_json episode_result_to_json(const EpisodeResult& r) {
  nlohmann::ordered_json j;
  j["round_times"] = r.round_times;
  j["total_time"] = r.total_time;
  j["reward"] = r.reward;
  j["served"] = r.served;
  return j;
}

}  // namespace weic
