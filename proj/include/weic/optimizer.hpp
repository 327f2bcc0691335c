#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "weic/beamforming.hpp"
#include "weic/channel.hpp"
#include "weic/eic.hpp"
#include "weic/scenario.hpp"

namespace weic {

/// Exhaustive search refuses larger systems.
inline constexpr int kExhaustiveUserLimit = 6;

class GuardExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RoundSolution {
  RoundAction action;
  BeamformerSet beams;
  std::vector<double> sinrs;
  double min_sinr = 0.0;
  double time = 0.0;
  bool hit_iteration_cap = false;
};

/// Beamforms one round with DT-RCG and prices it. A skip costs nothing.
RoundSolution solve_round(const SystemConfig& config, const ChannelSet& channels, UserId sender,
                          const RoundAction& action, const SolverParams& params);

/// Memo of per-round solutions keyed on (sender, canonical action). Rounds are
/// independent, so a solved round is reused by every plan containing it.
/// Safe for concurrent insert-or-get.
class RoundSolveCache {
 public:
  RoundSolution get_or_solve(const SystemConfig& config, const ChannelSet& channels, UserId sender,
                             const RoundAction& action, const SolverParams& params);
  std::size_t size() const;
  std::size_t solves() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<UserId, RoundAction>, RoundSolution> memo_;
  std::size_t solves_ = 0;
};

struct PlanSolution {
  EicPlan plan;
  std::vector<RoundSolution> rounds;
  double total_time = 0.0;
  bool hit_iteration_cap = false;
  std::size_t plans_examined = 0;

  std::vector<double> round_times() const;
  std::vector<BeamformerSet> beams() const;
};

/// Sum of DT-RCG-optimized round times for a fixed plan. Throws
/// InfeasibleInstance if the plan violates any constraint.
PlanSolution evaluate_plan(const EicPlan& plan, const Scenario& scenario, const ChannelSet& channels,
                           const SolverParams& params = {}, RoundSolveCache* cache = nullptr);

/// Global minimizer of the total time over every feasible plan.
PlanSolution exhaustive_search(const Scenario& scenario, const ChannelSet& channels, const SolverParams& params = {});

/// Code first, channel second: a minimum-length clique cover, each clique given
/// to the feasible sender with the strongest weakest-destination link, packed
/// into rounds under the stream limit, then beamformed.
PlanSolution sequential_optimize(const Scenario& scenario, const ChannelSet& channels, const SolverParams& params = {});

enum class Method { exhaustive, sequential };
Method method_from_string(const std::string& name);
std::string to_string(Method m);
PlanSolution run_method(Method m, const Scenario& scenario, const ChannelSet& channels, const SolverParams& params);

/// {"method", "plan", "round_times", "T", "solver": {"hit_iteration_cap", "plans_examined"}, "beams"}
nlohmann::ordered_json solution_to_json(const PlanSolution& solution, const std::string& method,
                                        bool include_beams = true);

SolverParams solver_params_from_json(const nlohmann::ordered_json& j, const SolverParams& defaults = {});

}  // namespace weic
