#include "weic/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "weic/seeding.hpp"

namespace weic {

void SystemConfig::validate() const {
  if (users < 2) throw std::invalid_argument("K must be at least 2");
  if (files < users) throw std::invalid_argument("N must be at least K (demands are distinct)");
  if (antennas < 0) throw std::invalid_argument("Nt must be nonnegative");
  if (!(power > 0.0) || !std::isfinite(power)) throw std::invalid_argument("P must be positive");
  if (!(file_bits > 0.0) || !std::isfinite(file_bits)) throw std::invalid_argument("B must be positive");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw std::invalid_argument("W must be positive");
}

bool Scenario::caches_file(UserId user, FileId file) const {
  const auto& c = caches[static_cast<std::size_t>(user)];
  return std::binary_search(c.begin(), c.end(), file);
}

Scenario generate_scenario(std::uint64_t seed, const SystemConfig& config, double files_per_user) {
  config.validate();
  if (!std::isfinite(files_per_user) || files_per_user < 0.0)
    throw std::invalid_argument("cache load must be a finite nonnegative number of files per user");
  const long cache_size = std::lround(files_per_user);
  if (cache_size > config.files - 1)
    throw InfeasibleScenario("cache load " + std::to_string(cache_size) + " exceeds N-1 = " +
                             std::to_string(config.files - 1) + "; a user cannot avoid caching its own demand");

  std::mt19937_64 rng(mix_seed(seed));
  Scenario s;
  s.config = config;

  std::vector<FileId> library(static_cast<std::size_t>(config.files));
  std::iota(library.begin(), library.end(), 0);
  std::shuffle(library.begin(), library.end(), rng);
  s.demands.assign(library.begin(), library.begin() + config.users);

  s.caches.resize(static_cast<std::size_t>(config.users));
  for (int k = 0; k < config.users; ++k) {
    std::vector<FileId> others;
    others.reserve(static_cast<std::size_t>(config.files - 1));
    for (FileId f = 0; f < config.files; ++f)
      if (f != s.demands[static_cast<std::size_t>(k)]) others.push_back(f);
    std::shuffle(others.begin(), others.end(), rng);
    auto& cache = s.caches[static_cast<std::size_t>(k)];
    cache.assign(others.begin(), others.begin() + cache_size);
    std::sort(cache.begin(), cache.end());
  }
  return s;
}

SideInfoGraph side_info_graph(const Scenario& scenario) {
  const int K = scenario.users();
  SideInfoGraph g;
  g.users = K;
  g.adjacency.assign(static_cast<std::size_t>(K * K), 0);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      if (i != j && scenario.caches_file(i, scenario.demands[static_cast<std::size_t>(j)]))
        g.adjacency[static_cast<std::size_t>(i * K + j)] = 1;
  return g;
}

std::vector<Violation> validate_scenario(const Scenario& s) {
  std::vector<Violation> out;
  try {
    s.config.validate();
  } catch (const std::invalid_argument& e) {
    out.push_back({"config", -1, e.what()});
  }
  const int K = s.config.users;
  const int N = s.config.files;
  if (static_cast<int>(s.demands.size()) != K)
    out.push_back({"demand count", -1, "expected " + std::to_string(K) + " demands"});
  if (static_cast<int>(s.caches.size()) != K)
    out.push_back({"cache count", -1, "expected " + std::to_string(K) + " caches"});

  for (std::size_t k = 0; k < s.demands.size(); ++k) {
    const FileId d = s.demands[k];
    if (d < 0 || d >= N) out.push_back({"demand range", static_cast<int>(k), "file " + std::to_string(d)});
    for (std::size_t j = 0; j < k; ++j)
      if (s.demands[j] == d)
        out.push_back({"distinct demands", static_cast<int>(k),
                       "user " + std::to_string(k) + " repeats the demand of user " + std::to_string(j)});
  }
  for (std::size_t k = 0; k < s.caches.size(); ++k) {
    const auto& c = s.caches[k];
    for (FileId f : c)
      if (f < 0 || f >= N) out.push_back({"cache range", static_cast<int>(k), "file " + std::to_string(f)});
    if (!std::is_sorted(c.begin(), c.end()) || std::adjacent_find(c.begin(), c.end()) != c.end())
      out.push_back({"cache canonical", static_cast<int>(k), "cache must be sorted without duplicates"});
    if (k < s.demands.size() && std::find(c.begin(), c.end(), s.demands[k]) != c.end())
      out.push_back({"own demand cached", static_cast<int>(k), "file " + std::to_string(s.demands[k])});
  }
  return out;
}

nlohmann::ordered_json config_to_json(const SystemConfig& c) {
  nlohmann::ordered_json j;
  j["K"] = c.users;
  j["N"] = c.files;
  j["Nt"] = c.antennas;
  j["P"] = c.power;
  j["B"] = c.file_bits;
  j["W"] = c.bandwidth;
  return j;
}

SystemConfig config_from_json(const nlohmann::ordered_json& j, const SystemConfig& defaults) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  SystemConfig c = defaults;
  try {
    if (j.contains("K")) c.users = j.at("K").get<int>();
    c.files = j.contains("N") ? j.at("N").get<int>() : std::max(c.files, c.users);
    if (j.contains("Nt")) c.antennas = j.at("Nt").get<int>();
    if (j.contains("P")) c.power = j.at("P").get<double>();
    if (j.contains("B")) c.file_bits = j.at("B").get<double>();
    if (j.contains("W")) c.bandwidth = j.at("W").get<double>();
  } catch (const nlohmann::ordered_json::exception& e) {
    throw std::invalid_argument(std::string("bad config field: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::ordered_json scenario_to_json(const Scenario& s) {
  nlohmann::ordered_json j = config_to_json(s.config);
  j["demands"] = s.demands;
  j["caches"] = s.caches;
  return j;
}

Scenario scenario_from_json(const nlohmann::ordered_json& j) {
  Scenario s;
  s.config = config_from_json(j);
  try {
    s.demands = j.at("demands").get<std::vector<FileId>>();
    s.caches = j.at("caches").get<std::vector<std::vector<FileId>>>();
  } catch (const nlohmann::ordered_json::exception& e) {
    throw std::invalid_argument(std::string("bad scenario: ") + e.what());
  }
  for (auto& c : s.caches) std::sort(c.begin(), c.end());
  if (auto v = validate_scenario(s); !v.empty())
    throw std::invalid_argument("invalid scenario: " + v.front().rule + " (index " + std::to_string(v.front().index) +
                                ")");
  return s;
}

}  // namespace weic
