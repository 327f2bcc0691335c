#include "weic/eic.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

namespace weic {

namespace {

// Every set partition of {0..m-1} as restricted growth strings, lexicographic.
void restricted_growth_strings(int m, std::vector<int>& current, int max_label,
                               std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == m) {
    out.push_back(current);
    return;
  }
  for (int label = 0; label <= max_label + 1; ++label) {
    current.push_back(label);
    restricted_growth_strings(m, current, std::max(max_label, label), out);
    current.pop_back();
  }
}

void combinations(int n, int k, int start, std::vector<int>& current, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == k) {
    out.push_back(current);
    return;
  }
  for (int i = start; i <= n - (k - static_cast<int>(current.size())); ++i) {
    current.push_back(i);
    combinations(n, k, i + 1, current, out);
    current.pop_back();
  }
}

int slot_to_user(int slot, UserId sender) { return slot < sender ? slot : slot + 1; }
int user_to_slot(UserId user, UserId sender) { return user < sender ? user : user - 1; }

std::uint32_t mask_of(const RoundAction& action) {
  std::uint32_t m = 0;
  for (const auto& b : action.blocks)
    for (UserId u : b) m |= 1u << u;
  return m;
}

}  // namespace

EncodedMessage encode_block(const Block& dests, UserId sender, const Scenario& scenario) {
  EncodedMessage msg;
  msg.sender = sender;
  msg.dests = dests;
  for (UserId k : dests) msg.files.push_back(scenario.demands[static_cast<std::size_t>(k)]);
  std::sort(msg.files.begin(), msg.files.end());
  return msg;
}

std::vector<UserId> RoundAction::served() const {
  std::vector<UserId> out;
  for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  return out;
}

void RoundAction::canonicalize() {
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  std::erase_if(blocks, [](const Block& b) { return b.empty(); });
  std::sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) { return a.front() < b.front(); });
}

int EicPlan::message_count() const {
  int n = 0;
  for (const auto& r : rounds) n += static_cast<int>(r.blocks.size());
  return n;
}

int EicPlan::active_rounds() const {
  return static_cast<int>(std::count_if(rounds.begin(), rounds.end(), [](const RoundAction& r) { return !r.skip(); }));
}

bool decodable(std::span<const FileId> files, UserId sender, std::span<const UserId> dests, const Scenario& s) {
  const int K = s.users();
  if (dests.empty() || sender < 0 || sender >= K) return false;
  for (FileId f : files)
    if (!s.caches_file(sender, f)) return false;

  std::vector<FileId> wanted;
  for (UserId k : dests) {
    if (k < 0 || k >= K || k == sender) return false;
    wanted.push_back(s.demands[static_cast<std::size_t>(k)]);
  }
  std::vector<FileId> have(files.begin(), files.end());
  std::sort(wanted.begin(), wanted.end());
  std::sort(have.begin(), have.end());
  if (have != wanted || std::adjacent_find(have.begin(), have.end()) != have.end()) return false;

  for (UserId k : dests) {
    const FileId own = s.demands[static_cast<std::size_t>(k)];
    for (FileId f : files)
      if (f != own && !s.caches_file(k, f)) return false;
  }
  return true;
}

bool block_decodable(const Block& dests, UserId sender, const Scenario& s) {
  const auto msg = encode_block(dests, sender, s);
  return decodable(msg.files, sender, dests, s);
}

bool action_decodable(const RoundAction& action, UserId sender, const Scenario& s) {
  return std::all_of(action.blocks.begin(), action.blocks.end(),
                     [&](const Block& b) { return block_decodable(b, sender, s); });
}

std::uint64_t bell_number(int n) {
  if (n < 0) throw std::invalid_argument("Bell number of a negative size");
  if (n > 25) throw std::overflow_error("Bell numbers above B_25 are not supported");
  std::vector<std::uint64_t> row{1};
  for (int i = 0; i < n; ++i) {
    std::vector<std::uint64_t> next{row.back()};
    for (std::uint64_t v : row) next.push_back(next.back() + v);
    row = std::move(next);
  }
  return row.front();
}

ActionTable::ActionTable(int users, int antennas) : users_(users), antennas_(antennas) {
  if (users < 1) throw std::invalid_argument("action table needs at least one user");
  if (antennas < 0) throw std::invalid_argument("antenna count must be nonnegative");
  const int receivers = users - 1;
  const int max_size = std::min(antennas, receivers);
  for (int s = 0; s <= max_size; ++s) {
    std::vector<std::vector<int>> subsets;
    std::vector<int> scratch;
    combinations(receivers, s, 0, scratch, subsets);
    std::vector<std::vector<int>> labelings;
    restricted_growth_strings(s, scratch, -1, labelings);
    for (const auto& subset : subsets) {
      for (const auto& labels : labelings) {
        const int nblocks = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
        std::vector<std::vector<int>> blocks(static_cast<std::size_t>(nblocks));
        for (std::size_t i = 0; i < subset.size(); ++i) blocks[static_cast<std::size_t>(labels[i])].push_back(subset[i]);
        lookup_.emplace(blocks, entries_.size());
        entries_.push_back(std::move(blocks));
      }
    }
  }
}

RoundAction ActionTable::for_sender(std::size_t index, UserId sender) const {
  if (sender < 0 || sender >= users_) throw std::out_of_range("sender out of range");
  RoundAction a;
  for (const auto& slots : entries_.at(index)) {
    Block b;
    for (int slot : slots) b.push_back(slot_to_user(slot, sender));
    a.blocks.push_back(std::move(b));
  }
  return a;
}

std::optional<std::size_t> ActionTable::index_of(const RoundAction& action, UserId sender) const {
  std::vector<std::vector<int>> blocks;
  for (const auto& b : action.blocks) {
    std::vector<int> slots;
    for (UserId u : b) {
      if (u == sender || u < 0 || u >= users_) return std::nullopt;
      slots.push_back(user_to_slot(u, sender));
    }
    std::sort(slots.begin(), slots.end());
    if (!slots.empty()) blocks.push_back(std::move(slots));
  }
  std::sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  auto it = lookup_.find(blocks);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

nlohmann::ordered_json ActionTable::to_json() const {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (std::size_t g = 0; g < entries_.size(); ++g) {
    nlohmann::ordered_json e;
    e["index"] = g;
    e["blocks"] = entries_[g];
    out.push_back(e);
  }
  return out;
}

std::vector<TableAction> enumerate_round_actions(UserId sender, const Scenario& s, bool ignore_feasibility) {
  const ActionTable table(s.users(), s.config.antennas);
  std::vector<TableAction> out;
  out.reserve(table.size());
  for (std::size_t g = 0; g < table.size(); ++g) {
    TableAction a{g, table.for_sender(g, sender), true};
    if (!ignore_feasibility) a.valid = action_decodable(a.action, sender, s);
    out.push_back(std::move(a));
  }
  return out;
}

RoundAction mask_and_map(std::size_t index, std::span<const std::uint8_t> pending, const ActionTable& table,
                         UserId sender, const Scenario& s) {
  if (static_cast<int>(pending.size()) != s.users()) throw std::invalid_argument("pending vector must have K entries");
  RoundAction a = table.for_sender(index, sender);
  for (auto& b : a.blocks)
    std::erase_if(b, [&](UserId u) { return pending[static_cast<std::size_t>(u)] == 0; });
  a.canonicalize();
  if (!action_decodable(a, sender, s)) return {};
  return a;
}

std::vector<std::string> plan_violations(const EicPlan& plan, const Scenario& s) {
  std::vector<std::string> out;
  const int K = s.users();
  const int Nt = s.config.antennas;
  if (static_cast<int>(plan.rounds.size()) != K) {
    out.push_back("plan must have exactly K rounds");
    return out;
  }
  std::vector<int> hits(static_cast<std::size_t>(K), 0);
  for (int t = 0; t < K; ++t) {
    const auto& r = plan.rounds[static_cast<std::size_t>(t)];
    const std::string where = "round " + std::to_string(t) + ": ";
    if (static_cast<int>(r.blocks.size()) > Nt) out.push_back(where + "more messages than antennas");
    if (static_cast<int>(r.served().size()) > std::min(Nt, K - 1))
      out.push_back(where + "more destinations than the stream limit");
    for (const auto& b : r.blocks) {
      if (b.empty()) out.push_back(where + "empty message");
      for (UserId u : b) {
        if (u < 0 || u >= K) {
          out.push_back(where + "destination out of range");
          continue;
        }
        if (u == t) out.push_back(where + "sender serves itself");
        ++hits[static_cast<std::size_t>(u)];
      }
      if (!block_decodable(b, t, s)) out.push_back(where + "message not decodable");
    }
  }
  for (int k = 0; k < K; ++k) {
    if (hits[static_cast<std::size_t>(k)] == 0) out.push_back("user " + std::to_string(k) + " unserved");
    if (hits[static_cast<std::size_t>(k)] > 1) out.push_back("user " + std::to_string(k) + " served more than once");
  }
  return out;
}

FeasibleEicEnumerator::FeasibleEicEnumerator(const Scenario& s)
    : users_(s.users()), table_(s.users(), s.config.antennas) {
  if (users_ > 31) throw std::invalid_argument("plan enumeration supports at most 31 users");
  options_.resize(static_cast<std::size_t>(users_));
  chosen_.assign(static_cast<std::size_t>(users_), 0);
  for (UserId t = 0; t < users_; ++t)
    for (auto& a : enumerate_round_actions(t, s))
      if (a.valid && !a.action.skip()) options_[static_cast<std::size_t>(t)].push_back({a.index, mask_of(a.action)});
}

bool FeasibleEicEnumerator::seek(Frame& f) {
  for (; f.sender < users_; ++f.sender, f.option = 0) {
    if (f.sender == f.user || ((used_ >> f.sender) & 1u)) continue;
    const auto& opts = options_[static_cast<std::size_t>(f.sender)];
    for (; f.option < opts.size(); ++f.option) {
      const std::uint32_t m = opts[f.option].mask;
      if (((m >> f.user) & 1u) && (m & covered_) == 0) {
        covered_ |= m;
        used_ |= 1u << f.sender;
        chosen_[static_cast<std::size_t>(f.sender)] = opts[f.option].index;
        return true;
      }
    }
  }
  return false;
}

void FeasibleEicEnumerator::undo(const Frame& f) {
  covered_ &= ~options_[static_cast<std::size_t>(f.sender)][f.option].mask;
  used_ &= ~(1u << f.sender);
  chosen_[static_cast<std::size_t>(f.sender)] = 0;
}

bool FeasibleEicEnumerator::backtrack() {
  while (!stack_.empty()) {
    Frame f = stack_.back();
    stack_.pop_back();
    undo(f);
    ++f.option;
    if (seek(f)) {
      stack_.push_back(f);
      return true;
    }
  }
  return false;
}

EicPlan FeasibleEicEnumerator::current_plan() const {
  EicPlan plan;
  plan.rounds.reserve(static_cast<std::size_t>(users_));
  for (UserId t = 0; t < users_; ++t) plan.rounds.push_back(table_.for_sender(chosen_[static_cast<std::size_t>(t)], t));
  return plan;
}

std::optional<EicPlan> FeasibleEicEnumerator::next() {
  if (done_) return std::nullopt;
  if (started_ && !backtrack()) {
    done_ = true;
    return std::nullopt;
  }
  started_ = true;
  const std::uint32_t all = users_ == 32 ? ~0u : (1u << users_) - 1u;
  while (covered_ != all) {
    int u = 0;
    while ((covered_ >> u) & 1u) ++u;
    Frame f{u, 0, 0};
    if (seek(f)) {
      stack_.push_back(f);
    } else if (!backtrack()) {
      done_ = true;
      return std::nullopt;
    }
  }
  return current_plan();
}

namespace {

struct PlanKey {
  int messages;
  int active;
  std::vector<std::size_t> indices;
  auto tie() const { return std::tie(messages, active, indices); }
};

}  // namespace

std::vector<EicPlan> min_length_eics(const Scenario& s) {
  FeasibleEicEnumerator it(s);
  std::vector<std::pair<PlanKey, EicPlan>> best;
  int best_len = std::numeric_limits<int>::max();
  while (auto plan = it.next()) {
    const int len = plan->message_count();
    if (len > best_len) continue;
    if (len < best_len) {
      best.clear();
      best_len = len;
    }
    best.push_back({PlanKey{len, plan->active_rounds(), it.indices()}, std::move(*plan)});
  }
  std::stable_sort(best.begin(), best.end(), [](const auto& a, const auto& b) { return a.first.tie() < b.first.tie(); });
  std::vector<EicPlan> out;
  out.reserve(best.size());
  for (auto& [key, plan] : best) out.push_back(std::move(plan));
  return out;
}

EicPlan min_length_eic(const Scenario& s) {
  auto all = min_length_eics(s);
  if (all.empty()) throw InfeasibleInstance("no feasible embedded index code: some demand is not cached by any sender");
  return std::move(all.front());
}

bool has_feasible_eic(const Scenario& s) {
  FeasibleEicEnumerator it(s);
  return it.next().has_value();
}

nlohmann::ordered_json action_to_json(const RoundAction& a) { return a.blocks; }

RoundAction action_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_array()) throw std::invalid_argument("round action must be an array of destination lists");
  RoundAction a;
  try {
    a.blocks = j.get<std::vector<Block>>();
  } catch (const nlohmann::ordered_json::exception& e) {
    throw std::invalid_argument(std::string("bad round action: ") + e.what());
  }
  for (const auto& b : a.blocks)
    if (b.empty()) throw std::invalid_argument("empty message in round action");
  a.canonicalize();
  return a;
}

nlohmann::ordered_json plan_to_json(const EicPlan& plan) {
  nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
  for (const auto& r : plan.rounds) rounds.push_back(action_to_json(r));
  return nlohmann::ordered_json{{"rounds", rounds}};
}

EicPlan plan_from_json(const nlohmann::ordered_json& j) {
  const nlohmann::ordered_json& rounds = j.is_object() ? j.at("rounds") : j;
  if (!rounds.is_array()) throw std::invalid_argument("plan must be {\"rounds\": [...]}");
  EicPlan plan;
  for (const auto& r : rounds) plan.rounds.push_back(action_from_json(r));
  return plan;
}

}  // namespace weic
