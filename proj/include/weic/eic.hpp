#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "weic/scenario.hpp"

namespace weic {

/// Destinations of one XOR-encoded message, sorted ascending. The message
/// payload is the XOR of the destinations' demands.
using Block = std::vector<UserId>;

struct EncodedMessage {
  std::vector<FileId> files;
  std::vector<UserId> dests;
  UserId sender = -1;
};

EncodedMessage encode_block(const Block& dests, UserId sender, const Scenario& scenario);

/// The messages one sender multiplexes in its round. Empty means skip.
/// Canonical form: members sorted, blocks ordered by their smallest member.
struct RoundAction {
  std::vector<Block> blocks;

  bool skip() const { return blocks.empty(); }
  std::vector<UserId> served() const;
  void canonicalize();

  friend bool operator==(const RoundAction&, const RoundAction&) = default;
  friend auto operator<=>(const RoundAction&, const RoundAction&) = default;
};

/// rounds[t] is what user t sends in round t.
struct EicPlan {
  std::vector<RoundAction> rounds;

  int message_count() const;
  int active_rounds() const;
  friend bool operator==(const EicPlan&, const EicPlan&) = default;
};

class InfeasibleInstance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// True iff the sender holds every file, the files are exactly the
/// destinations' demands, and each destination caches all the other files.
bool decodable(std::span<const FileId> files, UserId sender, std::span<const UserId> dests, const Scenario& scenario);
bool block_decodable(const Block& dests, UserId sender, const Scenario& scenario);
bool action_decodable(const RoundAction& action, UserId sender, const Scenario& scenario);

/// Bell triangle. Throws std::overflow_error past n = 25.
std::uint64_t bell_number(int n);

/// Sender-independent action index space: every set partition of every
/// subset of at most min(Nt, K-1) receiver slots. Slot j of sender t is user
/// j for j < t and user j + 1 otherwise. Index 0 is always the skip action.
class ActionTable {
 public:
  ActionTable(int users, int antennas);

  int users() const { return users_; }
  int antennas() const { return antennas_; }
  std::size_t size() const { return entries_.size(); }

  const std::vector<std::vector<int>>& slot_blocks(std::size_t index) const { return entries_.at(index); }
  RoundAction for_sender(std::size_t index, UserId sender) const;
  std::optional<std::size_t> index_of(const RoundAction& action, UserId sender) const;

  /// [{"index": g, "blocks": [[slot, ...], ...]}, ...]
  nlohmann::ordered_json to_json() const;

 private:
  int users_;
  int antennas_;
  std::vector<std::vector<std::vector<int>>> entries_;
  std::map<std::vector<std::vector<int>>, std::size_t> lookup_;
};

struct TableAction {
  std::size_t index = 0;
  RoundAction action;
  bool valid = true;
};

/// Full universal table for one sender, in index order. With
/// ignore_feasibility = false, entries with an undecodable block are flagged
/// invalid but keep their index.
std::vector<TableAction> enumerate_round_actions(UserId sender, const Scenario& scenario, bool ignore_feasibility = false);

/// Drops already-served destinations (pending[k] == 0) from action g, removes
/// emptied blocks, and falls back to skip if the residual is not decodable.
RoundAction mask_and_map(std::size_t index, std::span<const std::uint8_t> pending, const ActionTable& table,
                         UserId sender, const Scenario& scenario);

/// Every broken plan constraint: shape, stream limit, disjointness, exact
/// coverage and decodability.
std::vector<std::string> plan_violations(const EicPlan& plan, const Scenario& scenario);

/// Lazily walks all plans that cover every user exactly once using one table
/// action per sender. Deterministic depth-first order keyed on the lowest
/// uncovered user. Single consumer.
class FeasibleEicEnumerator {
 public:
  explicit FeasibleEicEnumerator(const Scenario& scenario);

  std::optional<EicPlan> next();
  /// Table index per round of the plan most recently returned by next().
  const std::vector<std::size_t>& indices() const { return chosen_; }

 private:
  struct Option {
    std::size_t index;
    std::uint32_t mask;
  };
  struct Frame {
    int user;
    int sender;
    std::size_t option;
  };

  bool seek(Frame& frame);
  void undo(const Frame& frame);
  bool backtrack();
  EicPlan current_plan() const;

  int users_;
  ActionTable table_;
  std::vector<std::vector<Option>> options_;
  std::vector<Frame> stack_;
  std::vector<std::size_t> chosen_;
  std::uint32_t covered_ = 0;
  std::uint32_t used_ = 0;
  bool started_ = false;
  bool done_ = false;
};

/// Minimum message count over all feasible plans; ties prefer fewer active
/// rounds, then the lexicographically smallest per-round index vector.
/// Throws InfeasibleInstance when no plan exists.
EicPlan min_length_eic(const Scenario& scenario);
std::vector<EicPlan> min_length_eics(const Scenario& scenario);
bool has_feasible_eic(const Scenario& scenario);

nlohmann::ordered_json action_to_json(const RoundAction& action);
RoundAction action_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json plan_to_json(const EicPlan& plan);
EicPlan plan_from_json(const nlohmann::ordered_json& j);

}  // namespace weic
