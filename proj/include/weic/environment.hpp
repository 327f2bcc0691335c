#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "weic/beamforming.hpp"
#include "weic/channel.hpp"
#include "weic/eic.hpp"
#include "weic/scenario.hpp"

namespace weic {

/// What agent t sees before acting. pending[k] == 1 means user k still waits;
/// on the wire this is flipped to the fulfilled convention ("e").
struct Observation {
  UserId agent = -1;
  std::vector<std::uint8_t> pending;
  std::vector<CMatrix> local_csi;  // local_csi[k] = H[agent][k]; empty at k == agent
  SideInfoGraph side_info;
};

struct StepOutcome {
  double time = 0.0;
  std::vector<double> sinrs;  // ordered as RoundAction::served()
  std::vector<std::uint8_t> pending;
};

struct EpisodeResult {
  std::vector<double> round_times;
  double total_time = 0.0;
  double reward = 0.0;
  std::vector<std::uint8_t> served;
};

/// A rejected step. code is one of power_violation, infeasible_action,
/// out_of_order, episode_done, bad_beams.
class StepRejected : public std::runtime_error {
 public:
  StepRejected(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

/// Reward 1/T when everyone is served, else 1/(T + unserved * penalty_time).
/// Throws std::logic_error for an all-served episode with T = 0.
EpisodeResult finalize(std::span<const std::uint8_t> pending, std::span<const double> round_times,
                       double penalty_time);

/// Ten times the slowest single-user MRT delivery over all links.
double default_penalty_time(const ChannelSet& channels, const SystemConfig& config);

struct EpisodeOptions {
  double penalty_time = -1.0;  // negative: default_penalty_time
};

/// One WEIC episode: rounds 0..K-1 in fixed order, one sender per round.
class Episode {
 public:
  Episode(Scenario scenario, ChannelSet channels, EpisodeOptions options = {});

  std::vector<Observation> reset();
  Observation observe(UserId agent) const;

  /// Applies the action of the next round. Serving an already-fulfilled user
  /// costs time but leaves state unchanged.
  StepOutcome step(UserId round, const RoundAction& action, const BeamformerSet& beams, long action_index = -1);

  /// Rounds not stepped yet count as skipped.
  EpisodeResult finalize() const;

  /// Sum of per-round maxima recomputed from the stored SINRs.
  double recompute_total_time() const;

  const Scenario& scenario() const { return scenario_; }
  const ChannelSet& channels() const { return channels_; }
  const std::vector<std::uint8_t>& pending() const { return pending_; }
  UserId next_round() const { return next_round_; }
  bool done() const { return next_round_ >= scenario_.users(); }
  double penalty_time() const { return penalty_time_; }
  const std::vector<double>& round_times() const { return round_times_; }

  /// One JSON object per stepped round: round, action_index, action, beams, time.
  const std::vector<std::string>& replay_log() const { return log_; }

 private:
  Scenario scenario_;
  ChannelSet channels_;
  SideInfoGraph side_info_;
  double penalty_time_;
  std::vector<std::uint8_t> pending_;
  std::vector<double> round_times_;
  std::vector<std::vector<double>> round_sinrs_;
  std::vector<std::string> log_;
  UserId next_round_ = 0;
};

/// Wire form: {"agent", "e" (1 = fulfilled), "local_csi", "side_info"}.
nlohmann::ordered_json observation_to_json(const Observation& obs);
nlohmann::ordered_json episode_result_to_json(const EpisodeResult& result);
std::vector<std::uint8_t> to_fulfilled(std::span<const std::uint8_t> pending);

}  // namespace weic
