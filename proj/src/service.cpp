#include "weic/service.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "weic/optimizer.hpp"

namespace weic {

using Json = nlohmann::ordered_json;

namespace {

// Carries a protocol error code up to the envelope.
class RequestError : public std::runtime_error {
 public:
  RequestError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

template <typename T>
T field(const Json& req, const char* name) {
  if (!req.contains(name)) throw RequestError("bad_request", std::string("missing field '") + name + "'");
  try {
    return req.at(name).get<T>();
  } catch (const Json::exception&) {
    throw RequestError("bad_request", std::string("field '") + name + "' has the wrong type");
  }
}

template <typename T>
T field_or(const Json& req, const char* name, T fallback) {
  return req.contains(name) && !req.at(name).is_null() ? field<T>(req, name) : fallback;
}

// The table action for this sender with already-served destinations removed.
// kept[i] is the position of residual block i in the unmasked action, so
// beams supplied for the unmasked blocks can follow their block.
struct MaskedAction {
  RoundAction action;
  std::vector<std::size_t> kept;
};

MaskedAction mask_action(const ActionTable& table, std::size_t index, UserId sender,
                         const std::vector<std::uint8_t>& pending) {
  if (index >= table.size())
    throw RequestError("bad_request", "action_index " + std::to_string(index) + " outside table of size " +
                                          std::to_string(table.size()));
  const RoundAction raw = table.for_sender(index, sender);
  std::vector<std::pair<Block, std::size_t>> parts;
  for (std::size_t i = 0; i < raw.blocks.size(); ++i) {
    Block b = raw.blocks[i];
    std::erase_if(b, [&](UserId u) { return pending[static_cast<std::size_t>(u)] == 0; });
    if (!b.empty()) parts.emplace_back(std::move(b), i);
  }
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.first.front() < b.first.front(); });
  MaskedAction m;
  for (auto& [b, i] : parts) {
    m.action.blocks.push_back(std::move(b));
    m.kept.push_back(i);
  }
  return m;
}

Json blocks_json(const RoundAction& a) { return action_to_json(a); }

BeamformerSet parse_beams(const Json& j) {
  try {
    return beams_from_json(j);
  } catch (const std::exception& e) {
    throw RequestError("bad_beams", e.what());
  }
}

Json error_body(const std::string& code, const std::string& message) {
  Json e;
  e["code"] = code;
  e["message"] = message;
  return e;
}

}  // namespace

Service::Service() : Service(Options{}) {}
Service::Service(Options options) : options_(std::move(options)) { options_.params.validate(); }

std::size_t Service::open_episodes() const {
  std::lock_guard lock(mutex_);
  return episodes_.size();
}

std::string Service::handle(const std::string& line) {
  Json request;
  try {
    request = Json::parse(line);
  } catch (const Json::parse_error& e) {
    Json out;
    out["v"] = kProtocolVersion;
    out["id"] = nullptr;
    out["ok"] = false;
    out["error"] = error_body("bad_request", std::string("malformed JSON: ") + e.what());
    return out.dump();
  }
  return handle_json(request).dump();
}

Json Service::handle_json(const Json& request) {
  Json out;
  out["v"] = kProtocolVersion;
  out["id"] = request.is_object() && request.contains("id") ? request.at("id") : Json(nullptr);
  try {
    if (!request.is_object()) throw RequestError("bad_request", "request must be a JSON object");
    if (request.contains("v") && request.at("v") != Json(kProtocolVersion))
      throw RequestError("unsupported_version", "this service speaks protocol version " +
                                                    std::to_string(kProtocolVersion));
    Json body = dispatch(field<std::string>(request, "op"), request);
    out["ok"] = true;
    for (auto& [k, v] : body.items()) out[k] = std::move(v);
  } catch (const RequestError& e) {
    out["ok"] = false;
    out["error"] = error_body(e.code(), e.what());
  } catch (const StepRejected& e) {
    out["ok"] = false;
    out["error"] = error_body(e.code(), e.what());
  } catch (const GuardExceeded& e) {
    out["ok"] = false;
    out["error"] = error_body("guard_exceeded", e.what());
  } catch (const InfeasibleScenario& e) {
    out["ok"] = false;
    out["error"] = error_body("infeasible_scenario", e.what());
  } catch (const InfeasibleInstance& e) {
    out["ok"] = false;
    out["error"] = error_body("infeasible_action", e.what());
  } catch (const std::invalid_argument& e) {
    out["ok"] = false;
    out["error"] = error_body("bad_request", e.what());
  } catch (const std::out_of_range& e) {
    out["ok"] = false;
    out["error"] = error_body("bad_request", e.what());
  } catch (const Json::exception& e) {
    out["ok"] = false;
    out["error"] = error_body("bad_request", e.what());
  } catch (const std::exception& e) {
    out["ok"] = false;
    out["error"] = error_body("internal_error", e.what());
  }
  return out;
}

Json Service::dispatch(const std::string& op, const Json& req) {
  if (op == "reset") return op_reset(req);
  if (op == "step") return op_step(req);
  if (op == "finalize") return op_finalize(req);
  if (op == "action_table") return op_action_table(req);
  if (op == "reference_beamformer") return op_reference_beamformer(req);
  if (op == "solve_plan") return op_solve_plan(req);
  if (op == "composite_similarity") return op_composite_similarity(req);
  if (op == "shutdown") {
    shutdown_ = true;
    return Json::object();
  }
  throw RequestError("bad_request", "unknown op '" + op + "'");
}

std::shared_ptr<Service::Slot> Service::find(const Json& req) const {
  const auto id = field<std::string>(req, "episode_id");
  std::lock_guard lock(mutex_);
  auto it = episodes_.find(id);
  if (it == episodes_.end()) throw RequestError("unknown_episode", "no open episode '" + id + "'");
  return it->second;
}

Json Service::op_reset(const Json& req) {
  const auto seed = field_or<std::uint64_t>(req, "seed", 0);
  const Json cfg = req.contains("config") ? req.at("config") : Json::object();
  Scenario scenario;
  if (req.contains("scenario")) {
    scenario = scenario_from_json(req.at("scenario"));
  } else {
    const SystemConfig config = config_from_json(cfg);
    scenario = generate_scenario(seed, config, field_or<double>(cfg, "r", options_.default_files_per_user));
  }
  ChannelOptions copt;
  copt.per_round_refresh = field_or<bool>(cfg, "per_round_refresh", false);
  ChannelSet channels = req.contains("channels") ? channels_from_json(req.at("channels"))
                                                 : sample_channels(seed, scenario.config, copt);
  EpisodeOptions eopt;
  eopt.penalty_time = field_or<double>(cfg, "penalty_time", -1.0);
  ActionTable table(scenario.users(), scenario.config.antennas);
  auto slot = std::make_shared<Slot>(Episode(scenario, std::move(channels), eopt), std::move(table));

  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "ep-" + std::to_string(next_episode_++);
    episodes_.emplace(id, slot);
  }
  Json out;
  out["episode_id"] = id;
  out["scenario"] = scenario_to_json(scenario);
  out["action_table_size"] = slot->table.size();
  out["penalty_time"] = slot->episode.penalty_time();
  Json obs = Json::array();
  for (UserId t = 0; t < scenario.users(); ++t) obs.push_back(observation_to_json(slot->episode.observe(t)));
  out["observations"] = std::move(obs);
  return out;
}

Json Service::op_step(const Json& req) {
  auto slot = find(req);
  std::lock_guard lock(slot->mutex);
  Episode& ep = slot->episode;
  const auto round = field<UserId>(req, "round");
  if (ep.done()) throw StepRejected("episode_done", "all rounds have been played");
  if (round != ep.next_round())
    throw StepRejected("out_of_order", "expected round " + std::to_string(ep.next_round()) + ", got " +
                                           std::to_string(round));
  const auto index = field<std::size_t>(req, "action_index");
  MaskedAction m = mask_action(slot->table, index, round, ep.pending());
  if (!action_decodable(m.action, round, ep.scenario()))
    throw StepRejected("infeasible_action", "action " + std::to_string(index) + " is not decodable after masking");

  BeamformerSet beams;
  bool reference = false;
  if (req.contains("beams") && !req.at("beams").is_null()) {
    const BeamformerSet given = parse_beams(req.at("beams"));
    const std::size_t expected = slot->table.for_sender(index, round).blocks.size();
    if (given.vectors.size() != expected)
      throw StepRejected("bad_beams", "expected " + std::to_string(expected) + " beamformers for action " +
                                          std::to_string(index) + ", got " + std::to_string(given.vectors.size()));
    for (std::size_t i : m.kept) beams.vectors.push_back(given.vectors[i]);
  } else if (!m.action.skip()) {
    beams = dtrcg_solve(ep.channels(), round, m.action, ep.scenario().config.power, options_.params).beams;
    reference = true;
  }
  const StepOutcome s = ep.step(round, m.action, beams, static_cast<long>(index));

  Json out;
  out["episode_id"] = req.at("episode_id");
  out["round"] = round;
  out["action"] = blocks_json(m.action);
  out["reference_beams"] = reference;
  out["time"] = s.time;
  out["sinrs"] = s.sinrs;
  out["pending"] = to_fulfilled(s.pending);
  out["done"] = ep.done();
  if (!ep.done()) out["observation"] = observation_to_json(ep.observe(ep.next_round()));
  return out;
}

Json Service::op_finalize(const Json& req) {
  auto slot = find(req);
  Json out;
  {
    std::lock_guard lock(slot->mutex);
    const EpisodeResult r = slot->episode.finalize();
    out["episode_id"] = req.at("episode_id");
    const Json result = episode_result_to_json(r);
    for (const auto& [k, v] : result.items()) out[k] = v;
    if (field_or<bool>(req, "replay", false)) {
      Json log = Json::array();
      for (const auto& line : slot->episode.replay_log()) log.push_back(Json::parse(line));
      out["replay"] = std::move(log);
    }
  }
  std::lock_guard lock(mutex_);
  episodes_.erase(req.at("episode_id").get<std::string>());
  return out;
}

Json Service::op_action_table(const Json& req) {
  std::shared_ptr<Slot> slot;
  int users = 0;
  int antennas = 0;
  if (req.contains("episode_id")) {
    slot = find(req);
    users = slot->table.users();
    antennas = slot->table.antennas();
  } else {
    const SystemConfig c = config_from_json(req.contains("config") ? req.at("config") : Json::object());
    users = c.users;
    antennas = c.antennas;
  }
  const ActionTable table = slot ? slot->table : ActionTable(users, antennas);
  Json out;
  out["K"] = users;
  out["Nt"] = antennas;
  out["size"] = table.size();
  out["entries"] = table.to_json();
  if (slot && req.contains("round")) {
    // Per-sender view with the masking the environment would apply now.
    std::lock_guard lock(slot->mutex);
    const auto sender = field<UserId>(req, "round");
    if (sender < 0 || sender >= users) throw RequestError("bad_request", "round out of range");
    const auto& pending = slot->episode.pending();
    Json actions = Json::array();
    for (std::size_t g = 0; g < table.size(); ++g) {
      const MaskedAction m = mask_action(table, g, sender, pending);
      Json a;
      a["index"] = g;
      a["blocks"] = blocks_json(table.for_sender(g, sender));
      a["masked"] = blocks_json(m.action);
      a["valid"] = action_decodable(m.action, sender, slot->episode.scenario());
      actions.push_back(std::move(a));
    }
    out["actions"] = std::move(actions);
  }
  return out;
}

Json Service::op_reference_beamformer(const Json& req) {
  auto slot = find(req);
  std::lock_guard lock(slot->mutex);
  const Episode& ep = slot->episode;
  const auto round = field<UserId>(req, "round");
  if (round < 0 || round >= ep.scenario().users()) throw RequestError("bad_request", "round out of range");
  const auto index = field<std::size_t>(req, "action_index");
  const auto solver = field_or<std::string>(req, "solver", "dtrcg");
  if (solver != "dtrcg" && solver != "mrt") throw RequestError("bad_request", "solver must be dtrcg or mrt");

  const MaskedAction m = mask_action(slot->table, index, round, ep.pending());
  if (!action_decodable(m.action, round, ep.scenario()))
    throw RequestError("infeasible_action", "action " + std::to_string(index) + " is not decodable after masking");
  Json out;
  out["round"] = round;
  out["action_index"] = index;
  out["action"] = blocks_json(m.action);
  out["solver"] = solver;
  if (m.action.skip()) {
    out["beams"] = Json::array();
    out["sinrs"] = Json::array();
    out["min_sinr"] = nullptr;
    out["time"] = 0.0;
    return out;
  }
  BeamformerSet beams;
  if (solver == "mrt") {
    beams = mrt_equal_power(RoundLinks(ep.channels(), round, m.action), ep.scenario().config.power);
  } else {
    beams = dtrcg_solve(ep.channels(), round, m.action, ep.scenario().config.power, options_.params).beams;
  }
  const auto sinrs = round_sinrs(ep.channels(), round, m.action, beams);
  out["beams"] = beams_to_json(beams);
  out["sinrs"] = sinrs;
  out["min_sinr"] = *std::min_element(sinrs.begin(), sinrs.end());
  out["time"] = round_time(sinrs, ep.scenario().config);
  return out;
}

Json Service::op_solve_plan(const Json& req) {
  Scenario scenario;
  ChannelSet channels;
  if (req.contains("episode_id")) {
    auto slot = find(req);
    std::lock_guard lock(slot->mutex);
    scenario = slot->episode.scenario();
    channels = slot->episode.channels();
  } else {
    scenario = scenario_from_json(field<Json>(req, "scenario"));
    channels = req.contains("channels") ? channels_from_json(req.at("channels"))
                                        : sample_channels(field_or<std::uint64_t>(req, "seed", 0), scenario.config);
  }
  const SolverParams params = solver_params_from_json(req.contains("params") ? req.at("params") : Json(nullptr),
                                                      options_.params);
  const bool with_beams = field_or<bool>(req, "beams", true);
  if (req.contains("plan")) {
    const EicPlan plan = plan_from_json(req.at("plan"));
    return solution_to_json(evaluate_plan(plan, scenario, channels, params), "evaluate", with_beams);
  }
  const Method method = method_from_string(field<std::string>(req, "method"));
  return solution_to_json(run_method(method, scenario, channels, params), to_string(method), with_beams);
}

Json Service::op_composite_similarity(const Json& req) {
  auto slot = find(req);
  std::lock_guard lock(slot->mutex);
  const ChannelSet& ch = slot->episode.channels();
  auto composite = [&](const char* name) {
    const Json& g = field<Json>(req, name);
    const auto sender = field<UserId>(g, "sender");
    const auto dests = field<std::vector<UserId>>(g, "dests");
    for (UserId k : dests)
      if (k < 0 || k >= ch.users()) throw RequestError("bad_request", "destination out of range");
    if (sender < 0 || sender >= ch.users()) throw RequestError("bad_request", "sender out of range");
    return composite_channel(ch, sender, dests);
  };
  Json out;
  out["similarity"] = composite_similarity(composite("a"), composite("b"));
  return out;
}

void serve_stream(Service& service, std::istream& in, std::ostream& out) {
  std::string line;
  while (!service.shutdown_requested() && std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << service.handle(line) << '\n' << std::flush;
  }
}

TcpServer::TcpServer(Service& service, std::uint16_t port, const std::string& host) : service_(service) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw std::invalid_argument("bad IPv4 address '" + host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() {
  stop();
  for (auto& w : workers_)
    if (w.joinable()) w.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::run() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    std::lock_guard lock(mutex_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    clients_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
  for (auto& w : workers_)
    if (w.joinable()) w.join();
}

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  std::lock_guard lock(mutex_);
  for (int fd : clients_) ::shutdown(fd, SHUT_RDWR);
}

void TcpServer::serve_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  auto send_all = [fd](const std::string& s) {
    std::size_t sent = 0;
    while (sent < s.size()) {
      const ssize_t n = ::send(fd, s.data() + sent, s.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) return false;
      sent += static_cast<std::size_t>(n);
    }
    return true;
  };
  bool open = true;
  while (open && !stopping_) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (!send_all(service_.handle(line) + "\n")) {
        open = false;
        break;
      }
      if (service_.shutdown_requested()) {
        open = false;
        stop();
        break;
      }
    }
  }
  std::lock_guard lock(mutex_);
  std::erase(clients_, fd);
  ::close(fd);
}

}  // namespace weic
