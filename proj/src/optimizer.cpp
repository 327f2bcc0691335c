#include "weic/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace weic {

RoundSolution solve_round(const SystemConfig& config, const ChannelSet& channels, UserId sender,
                          const RoundAction& action, const SolverParams& params) {
  RoundSolution r;
  r.action = action;
  r.action.canonicalize();
  if (r.action.skip()) return r;
  SolveResult solved = dtrcg_solve(channels, sender, r.action, config.power, params);
  r.beams = std::move(solved.beams);
  r.sinrs = round_sinrs(channels, sender, r.action, r.beams);
  r.min_sinr = *std::min_element(r.sinrs.begin(), r.sinrs.end());
  r.time = round_time(r.sinrs, config);
  r.hit_iteration_cap = solved.hit_iteration_cap;
  return r;
}

RoundSolution RoundSolveCache::get_or_solve(const SystemConfig& config, const ChannelSet& channels, UserId sender,
                                            const RoundAction& action, const SolverParams& params) {
  RoundAction key = action;
  key.canonicalize();
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find({sender, key}); it != memo_.end()) return it->second;
  }
  RoundSolution solved = solve_round(config, channels, sender, key, params);
  std::lock_guard lock(mutex_);
  ++solves_;
  return memo_.try_emplace({sender, std::move(key)}, std::move(solved)).first->second;
}

std::size_t RoundSolveCache::size() const {
  std::lock_guard lock(mutex_);
  return memo_.size();
}

std::size_t RoundSolveCache::solves() const {
  std::lock_guard lock(mutex_);
  return solves_;
}

std::vector<double> PlanSolution::round_times() const {
  std::vector<double> out;
  for (const auto& r : rounds) out.push_back(r.time);
  return out;
}

std::vector<BeamformerSet> PlanSolution::beams() const {
  std::vector<BeamformerSet> out;
  for (const auto& r : rounds) out.push_back(r.beams);
  return out;
}

namespace {

double sum_times(const std::vector<RoundSolution>& rounds) {
  double total = 0.0;
  for (const auto& r : rounds) total += r.time;
  return total;
}

}  // namespace

PlanSolution evaluate_plan(const EicPlan& plan, const Scenario& scenario, const ChannelSet& channels,
                           const SolverParams& params, RoundSolveCache* cache) {
  if (auto v = plan_violations(plan, scenario); !v.empty()) throw InfeasibleInstance("infeasible plan: " + v.front());
  PlanSolution out;
  out.plan = plan;
  for (auto& r : out.plan.rounds) r.canonicalize();
  for (UserId t = 0; t < scenario.users(); ++t) {
    const auto& action = out.plan.rounds[static_cast<std::size_t>(t)];
    out.rounds.push_back(cache ? cache->get_or_solve(scenario.config, channels, t, action, params)
                               : solve_round(scenario.config, channels, t, action, params));
    out.hit_iteration_cap = out.hit_iteration_cap || out.rounds.back().hit_iteration_cap;
  }
  out.total_time = sum_times(out.rounds);
  out.plans_examined = 1;
  return out;
}

PlanSolution exhaustive_search(const Scenario& scenario, const ChannelSet& channels, const SolverParams& params) {
  const int K = scenario.users();
  if (K > kExhaustiveUserLimit)
    throw GuardExceeded("exhaustive search is limited to K <= " + std::to_string(kExhaustiveUserLimit) + " (got K = " +
                        std::to_string(K) + ")");
  const ActionTable table(K, scenario.config.antennas);

  // Per-sender memo indexed by table position; rounds never interact.
  std::vector<std::vector<std::optional<RoundSolution>>> memo(static_cast<std::size_t>(K),
                                                              std::vector<std::optional<RoundSolution>>(table.size()));
  auto round_for = [&](UserId t, std::size_t g) -> const RoundSolution& {
    auto& slot = memo[static_cast<std::size_t>(t)][g];
    if (!slot) slot = solve_round(scenario.config, channels, t, table.for_sender(g, t), params);
    return *slot;
  };

  FeasibleEicEnumerator plans(scenario);
  std::vector<std::size_t> best_indices;
  double best = std::numeric_limits<double>::infinity();
  std::size_t examined = 0;
  while (plans.next()) {
    ++examined;
    const auto& idx = plans.indices();
    double total = 0.0;
    for (UserId t = 0; t < K; ++t) total += round_for(t, idx[static_cast<std::size_t>(t)]).time;
    if (best_indices.empty() || total < best) {
      best = total;
      best_indices = idx;
    }
  }
  if (best_indices.empty()) throw InfeasibleInstance("no feasible embedded index code for this scenario");

  PlanSolution out;
  for (UserId t = 0; t < K; ++t) {
    const RoundSolution& r = round_for(t, best_indices[static_cast<std::size_t>(t)]);
    out.plan.rounds.push_back(r.action);
    out.rounds.push_back(r);
    out.hit_iteration_cap = out.hit_iteration_cap || r.hit_iteration_cap;
  }
  out.total_time = sum_times(out.rounds);
  out.plans_examined = examined;
  return out;
}

PlanSolution sequential_optimize(const Scenario& scenario, const ChannelSet& channels, const SolverParams& params) {
  const int K = scenario.users();
  const int Nt = scenario.config.antennas;
  const int dest_cap = std::min(Nt, K - 1);
  const EicPlan cover = min_length_eic(scenario);

  std::vector<Block> cliques;
  for (const auto& r : cover.rounds)
    for (const auto& b : r.blocks) cliques.push_back(b);
  std::sort(cliques.begin(), cliques.end(), [](const Block& a, const Block& b) {
    return a.size() != b.size() ? a.size() > b.size() : a < b;
  });

  EicPlan plan;
  plan.rounds.resize(static_cast<std::size_t>(K));
  std::vector<int> dests_used(static_cast<std::size_t>(K), 0);
  bool packed = true;
  for (const auto& clique : cliques) {
    std::vector<std::pair<double, UserId>> candidates;
    for (UserId t = 0; t < K; ++t) {
      if (std::find(clique.begin(), clique.end(), t) != clique.end()) continue;
      if (!block_decodable(clique, t, scenario)) continue;
      double weakest = std::numeric_limits<double>::infinity();
      for (UserId k : clique) weakest = std::min(weakest, channels.link(t, k).norm());
      candidates.emplace_back(weakest, t);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    bool placed = false;
    for (const auto& [score, t] : candidates) {
      auto& round = plan.rounds[static_cast<std::size_t>(t)];
      auto& used = dests_used[static_cast<std::size_t>(t)];
      if (static_cast<int>(round.blocks.size()) < Nt && used + static_cast<int>(clique.size()) <= dest_cap) {
        round.blocks.push_back(clique);
        used += static_cast<int>(clique.size());
        placed = true;
        break;
      }
    }
    if (!placed) {
      packed = false;
      break;
    }
  }
  if (!packed) plan = cover;
  for (auto& r : plan.rounds) r.canonicalize();
  return evaluate_plan(plan, scenario, channels, params);
}

Method method_from_string(const std::string& name) {
  if (name == "exhaustive") return Method::exhaustive;
  if (name == "sequential") return Method::sequential;
  throw std::invalid_argument("unknown method '" + name + "' (expected exhaustive or sequential)");
}

std::string to_string(Method m) { return m == Method::exhaustive ? "exhaustive" : "sequential"; }

PlanSolution run_method(Method m, const Scenario& scenario, const ChannelSet& channels, const SolverParams& params) {
  return m == Method::exhaustive ? exhaustive_search(scenario, channels, params)
                                 : sequential_optimize(scenario, channels, params);
}

nlohmann::ordered_json solution_to_json(const PlanSolution& s, const std::string& method, bool include_beams) {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["plan"] = plan_to_json(s.plan);
  j["round_times"] = s.round_times();
  j["T"] = s.total_time;
  j["solver"] = {{"hit_iteration_cap", s.hit_iteration_cap}, {"plans_examined", s.plans_examined}};
  if (include_beams) {
    nlohmann::ordered_json beams = nlohmann::ordered_json::array();
    for (const auto& r : s.rounds) beams.push_back(beams_to_json(r.beams));
    j["beams"] = std::move(beams);
  }
  return j;
}

SolverParams solver_params_from_json(const nlohmann::ordered_json& j, const SolverParams& d) {
  SolverParams p = d;
  if (j.is_null()) return p;
  if (!j.is_object()) throw std::invalid_argument("solver params must be an object");
  p.mu = j.value("mu", p.mu);
  p.mu_decay = j.value("mu_decay", p.mu_decay);
  p.mu_floor = j.value("mu_floor", p.mu_floor);
  p.eps_dinkelbach = j.value("eps_dinkelbach", p.eps_dinkelbach);
  p.eps_grad = j.value("eps_grad", p.eps_grad);
  p.max_outer = j.value("max_outer", p.max_outer);
  p.max_inner = j.value("max_inner", p.max_inner);
  p.armijo_c = j.value("armijo_c", p.armijo_c);
  p.armijo_backtrack = j.value("armijo_backtrack", p.armijo_backtrack);
  p.validate();
  return p;
}

}  // namespace weic
