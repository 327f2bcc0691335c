#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace weic {

using UserId = int;
using FileId = int;

/// Static system parameters. Noise variance is fixed at one, so the transmit
/// power doubles as the transmit SNR.
struct SystemConfig {
  int users = 5;            // K
  int files = 5;            // N
  int antennas = 4;         // Nt, per user
  double power = 1.0;       // P, linear watts per sender
  double file_bits = 1e5;   // B
  double bandwidth = 1.0;   // W in Hz; times are reported in units of B/W when W = 1
  static constexpr double noise_power = 1.0;

  /// Throws std::invalid_argument on the first broken invariant.
  void validate() const;
};

/// One cache/demand instance. Files are indices 0..N-1 and users 0..K-1;
/// each cache is kept sorted ascending.
struct Scenario {
  SystemConfig config;
  std::vector<FileId> demands;
  std::vector<std::vector<FileId>> caches;

  int users() const { return config.users; }
  bool caches_file(UserId user, FileId file) const;
};

/// Directed side-information graph: edge i -> j iff user i caches d_j.
struct SideInfoGraph {
  int users = 0;
  std::vector<std::uint8_t> adjacency;  // row-major K x K

  bool edge(UserId from, UserId to) const { return adjacency[static_cast<std::size_t>(from * users + to)] != 0; }
};

struct Violation {
  std::string rule;
  int index = -1;
  std::string detail;
};

/// Raised when the requested cache load cannot coexist with distinct demands.
class InfeasibleScenario : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Draws distinct demands uniformly, then fills each cache with round(files_per_user)
/// files drawn uniformly from F \ {d_k}. Each user's cache is a prefix of a seeded
/// permutation, so for a fixed seed caches are nested as the load grows.
Scenario generate_scenario(std::uint64_t seed, const SystemConfig& config, double files_per_user);

SideInfoGraph side_info_graph(const Scenario& scenario);

/// Reports every broken invariant; never throws.
std::vector<Violation> validate_scenario(const Scenario& scenario);

nlohmann::ordered_json config_to_json(const SystemConfig& config);
SystemConfig config_from_json(const nlohmann::ordered_json& j, const SystemConfig& defaults = {});

/// Canonical key order: K, N, Nt, P, B, W, demands, caches.
nlohmann::ordered_json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::ordered_json& j);

}  // namespace weic
