#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "weic/beamforming.hpp"
#include "weic/environment.hpp"

namespace weic {

inline constexpr int kProtocolVersion = 1;

/// Newline-delimited JSON request handler shared by the stdio and TCP
/// transports. handle() is thread-safe: requests on distinct episodes run
/// concurrently, requests on one episode are serialized.
class Service {
 public:
  struct Options {
    SolverParams params;
    double default_files_per_user = 2.0;
  };

  Service();
  explicit Service(Options options);

  /// One request line in, one response line out (no trailing newline).
  std::string handle(const std::string& line);
  nlohmann::ordered_json handle_json(const nlohmann::ordered_json& request);

  bool shutdown_requested() const { return shutdown_.load(); }
  std::size_t open_episodes() const;

 private:
  struct Slot {
    std::mutex mutex;
    Episode episode;
    ActionTable table;
    Slot(Episode e, ActionTable t) : episode(std::move(e)), table(std::move(t)) {}
  };

  nlohmann::ordered_json dispatch(const std::string& op, const nlohmann::ordered_json& req);
  nlohmann::ordered_json op_reset(const nlohmann::ordered_json& req);
  nlohmann::ordered_json op_step(const nlohmann::ordered_json& req);
  nlohmann::ordered_json op_finalize(const nlohmann::ordered_json& req);
  nlohmann::ordered_json op_action_table(const nlohmann::ordered_json& req);
  nlohmann::ordered_json op_reference_beamformer(const nlohmann::ordered_json& req);
  nlohmann::ordered_json op_solve_plan(const nlohmann::ordered_json& req);
  nlohmann::ordered_json op_composite_similarity(const nlohmann::ordered_json& req);

  std::shared_ptr<Slot> find(const nlohmann::ordered_json& req) const;

  Options options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> episodes_;
  std::uint64_t next_episode_ = 1;
  std::atomic<bool> shutdown_{false};
};

/// Reads requests until EOF or a shutdown op; flushes after every response.
void serve_stream(Service& service, std::istream& in, std::ostream& out);

/// Loopback TCP transport. Each connection gets its own thread and its
/// responses come back in request order.
class TcpServer {
 public:
  /// Port 0 picks an ephemeral port; see port().
  TcpServer(Service& service, std::uint16_t port = 0, const std::string& host = "127.0.0.1");
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }

  /// Accepts connections until stop() or a shutdown request.
  void run();
  void stop();

 private:
  void serve_connection(int fd);

  Service& service_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex mutex_;
  std::vector<int> clients_;
  std::vector<std::thread> workers_;
};

}  // namespace weic
