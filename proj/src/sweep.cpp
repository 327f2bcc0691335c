#include "weic/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "weic/channel.hpp"
#include "weic/eic.hpp"
#include "weic/optimizer.hpp"
#include "weic/seeding.hpp"

#ifndef WEIC_GIT_DESCRIBE
#define WEIC_GIT_DESCRIBE "unknown"
#endif
#ifndef WEIC_VERSION
#define WEIC_VERSION "0.0.0"
#endif

namespace weic {

using Json = nlohmann::ordered_json;

SweepKind sweep_kind_from_string(const std::string& name) {
  if (name == "snr") return SweepKind::snr;
  if (name == "users") return SweepKind::users;
  if (name == "load") return SweepKind::load;
  if (name == "cluster") return SweepKind::cluster;
  throw std::invalid_argument("unknown sweep kind '" + name + "' (expected snr, users, load or cluster)");
}

std::string to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::snr: return "snr";
    case SweepKind::users: return "users";
    case SweepKind::load: return "load";
    case SweepKind::cluster: return "cluster";
  }
  return "?";
}

std::vector<double> default_grid(SweepKind kind) {
  switch (kind) {
    case SweepKind::snr: return {0, 5, 10, 15, 20};
    case SweepKind::users: return {4, 5, 6, 10, 20, 30};
    case SweepKind::load: return {1, 2, 3, 4};
    case SweepKind::cluster: return {10, 20, 30};
  }
  return {};
}

std::vector<double> SweepConfig::grid() const { return points.empty() ? default_grid(kind) : points; }

namespace {

bool is_whole(double x) { return std::isfinite(x) && x == std::floor(x); }

bool cluster_point(const SweepConfig& c, double x) {
  return c.kind == SweepKind::cluster || (c.kind == SweepKind::users && x > kExhaustiveUserLimit);
}

}  // namespace

void SweepConfig::validate() const {
  base.validate();
  params.validate();
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (max_attempts < 1) throw std::invalid_argument("max_attempts must be at least 1");
  if (cluster_size < 2) throw std::invalid_argument("cluster_size must be at least 2");
  if (!(files_per_user >= 0.0)) throw std::invalid_argument("r must be nonnegative");
  if (methods.empty()) throw std::invalid_argument("at least one method is required");
  for (const auto& m : methods) method_from_string(m);
  const auto g = grid();
  if (g.empty()) throw std::invalid_argument("sweep grid is empty");
  for (double x : g) {
    if (!std::isfinite(x)) throw std::invalid_argument("sweep points must be finite");
    if (kind == SweepKind::users || kind == SweepKind::cluster) {
      if (!is_whole(x) || x < 2) throw std::invalid_argument("user counts must be integers >= 2");
      if (cluster_point(*this, x) && static_cast<long>(x) % cluster_size != 0)
        throw std::invalid_argument("K = " + std::to_string(static_cast<long>(x)) +
                                    " does not split into clusters of " + std::to_string(cluster_size));
    }
    if (kind == SweepKind::load && x < 0) throw std::invalid_argument("load points must be nonnegative");
  }
}

SweepConfig sweep_config_from_json(const Json& j, const SweepConfig& defaults) {
  if (!j.is_object()) throw std::invalid_argument("sweep config must be a JSON object");
  SweepConfig c = defaults;
  try {
    if (j.contains("kind")) c.kind = sweep_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("config")) c.base = config_from_json(j.at("config"), c.base);
    c.files_per_user = j.value("r", c.files_per_user);
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    c.points = j.value("points", c.points);
    c.methods = j.value("methods", c.methods);
    c.cluster_size = j.value("cluster_size", c.cluster_size);
    c.per_round_refresh = j.value("per_round_refresh", c.per_round_refresh);
    c.workers = j.value("workers", c.workers);
    c.max_attempts = j.value("max_attempts", c.max_attempts);
    if (j.contains("params")) c.params = solver_params_from_json(j.at("params"), c.params);
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("bad sweep config: ") + e.what());
  }
  c.validate();
  return c;
}

Json sweep_config_to_json(const SweepConfig& c) {
  // Worker count is left out on purpose: it never changes the results.
  Json j;
  j["kind"] = to_string(c.kind);
  j["config"] = config_to_json(c.base);
  j["r"] = c.files_per_user;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["points"] = c.grid();
  j["methods"] = c.methods;
  j["cluster_size"] = c.cluster_size;
  j["per_round_refresh"] = c.per_round_refresh;
  j["max_attempts"] = c.max_attempts;
  const auto& p = c.params;
  j["params"] = {{"mu", p.mu},
                 {"mu_decay", p.mu_decay},
                 {"mu_floor", p.mu_floor},
                 {"eps_dinkelbach", p.eps_dinkelbach},
                 {"eps_grad", p.eps_grad},
                 {"max_outer", p.max_outer},
                 {"max_inner", p.max_inner},
                 {"armijo_c", p.armijo_c},
                 {"armijo_backtrack", p.armijo_backtrack}};
  return j;
}

namespace {

struct Instance {
  Scenario scenario;
  ChannelSet channels;
  int attempts = 0;
};

// Redraws until a feasible code exists. Feasibility is judged at judge_load;
// caches only grow with the load for a fixed seed, so larger loads stay feasible.
Instance draw_instance(std::uint64_t trial_seed, std::uint64_t cluster, const SystemConfig& cfg, double load,
                       double judge_load, const SweepConfig& sc) {
  ChannelOptions copt;
  copt.per_round_refresh = sc.per_round_refresh;
  for (int attempt = 0; attempt < sc.max_attempts; ++attempt) {
    const std::uint64_t s = derive_seed(trial_seed, {cluster, static_cast<std::uint64_t>(attempt)});
    if (!has_feasible_eic(generate_scenario(s, cfg, judge_load))) continue;
    return Instance{generate_scenario(s, cfg, load), sample_channels(s, cfg, copt), attempt + 1};
  }
  throw std::runtime_error("no feasible instance after " + std::to_string(sc.max_attempts) +
                           " draws; raise r or max_attempts");
}

std::vector<TrialRecord> run_trial(const SweepConfig& sc, double x, int trial) {
  const std::uint64_t trial_seed = derive_seed(sc.seed, {static_cast<std::uint64_t>(trial)});
  SystemConfig cfg = sc.base;
  double load = sc.files_per_user;
  double judge = load;
  switch (sc.kind) {
    case SweepKind::snr: cfg.power = std::pow(10.0, x / 10.0); break;
    case SweepKind::load: {
      load = x;
      const auto g = sc.grid();
      judge = *std::min_element(g.begin(), g.end());
      break;
    }
    case SweepKind::users:
    case SweepKind::cluster: cfg.users = static_cast<int>(x); break;
  }

  std::vector<TrialRecord> out;
  auto record = [&](const std::string& mode, const std::string& method) -> TrialRecord& {
    TrialRecord r;
    r.x = x;
    r.mode = mode;
    r.method = method;
    r.trial = trial;
    r.seed = trial_seed;
    out.push_back(std::move(r));
    return out.back();
  };

  if (!cluster_point(sc, x)) {
    cfg.files = std::max(cfg.files, cfg.users);
    const Instance inst = draw_instance(trial_seed, 0, cfg, load, judge, sc);
    for (const auto& m : sc.methods) {
      TrialRecord& r = record("direct", m);
      r.attempts = inst.attempts;
      const PlanSolution s = run_method(method_from_string(m), inst.scenario, inst.channels, sc.params);
      r.total_time = s.total_time;
      r.hit_iteration_cap = s.hit_iteration_cap;
    }
    return out;
  }

  // Direct exhaustive search over all K users is out of reach here.
  if (cfg.users > kExhaustiveUserLimit &&
      std::find(sc.methods.begin(), sc.methods.end(), "exhaustive") != sc.methods.end()) {
    TrialRecord& r = record("direct", "exhaustive");
    r.status = "guard_exceeded";
    r.attempts = 0;
  }
  SystemConfig sub = cfg;
  sub.users = sc.cluster_size;
  sub.files = std::max(sc.base.files, sc.cluster_size);
  const int clusters = cfg.users / sc.cluster_size;
  std::vector<Instance> insts;
  int attempts = 0;
  for (int c = 0; c < clusters; ++c) {
    insts.push_back(draw_instance(trial_seed, static_cast<std::uint64_t>(c), sub, load, judge, sc));
    attempts += insts.back().attempts;
  }
  for (const auto& m : sc.methods) {
    TrialRecord& r = record("cluster", m);
    r.attempts = attempts;
    double total = 0.0;
    for (const auto& inst : insts) {
      const PlanSolution s = run_method(method_from_string(m), inst.scenario, inst.channels, sc.params);
      total += s.total_time;
      r.hit_iteration_cap = r.hit_iteration_cap || s.hit_iteration_cap;
    }
    r.total_time = total;
  }
  return out;
}

std::string fmt(double v, int digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  const auto grid = config.grid();
  const std::size_t tasks = grid.size() * static_cast<std::size_t>(config.trials);
  std::vector<std::vector<TrialRecord>> results(tasks);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks; i = next++) {
      try {
        results[i] = run_trial(config, grid[i / static_cast<std::size_t>(config.trials)],
                               static_cast<int>(i % static_cast<std::size_t>(config.trials)));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = tasks;
      }
    }
  };
  unsigned n = config.workers > 0 ? static_cast<unsigned>(config.workers) : std::thread::hardware_concurrency();
  n = std::clamp<unsigned>(n, 1, static_cast<unsigned>(std::max<std::size_t>(tasks, 1)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  SweepResult out;
  out.config = config;
  for (auto& r : results)
    for (auto& rec : r) out.records.push_back(std::move(rec));
  std::sort(out.records.begin(), out.records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.x, a.mode, a.method, a.trial) < std::tie(b.x, b.mode, b.method, b.trial);
  });

  for (std::size_t i = 0; i < out.records.size();) {
    std::size_t j = i;
    SweepRow row;
    row.x = out.records[i].x;
    row.mode = out.records[i].mode;
    row.method = out.records[i].method;
    std::vector<double> ts;
    for (; j < out.records.size() && out.records[j].x == row.x && out.records[j].mode == row.mode &&
           out.records[j].method == row.method;
         ++j)
      if (out.records[j].total_time) ts.push_back(*out.records[j].total_time);
    row.trials = static_cast<int>(ts.size());
    if (!ts.empty()) {
      for (double t : ts) row.mean += t;
      row.mean /= static_cast<double>(ts.size());
      if (ts.size() > 1) {
        double ss = 0.0;
        for (double t : ts) ss += (t - row.mean) * (t - row.mean);
        row.stddev = std::sqrt(ss / static_cast<double>(ts.size() - 1));
      }
    }
    out.rows.push_back(row);
    i = j;
  }
  return out;
}

std::string summary_csv(const SweepResult& result) {
  std::ostringstream o;
  const std::string kind = to_string(result.config.kind);
  o << "kind,x,mode,method,trials,mean_T,std_T\n";
  for (const auto& r : result.rows) {
    o << kind << ',' << fmt(r.x, 10) << ',' << r.mode << ',' << r.method << ',' << r.trials << ',';
    if (r.trials > 0) o << fmt(r.mean, 12) << ',' << fmt(r.stddev, 12);
    else o << ',';
    o << '\n';
  }
  return o.str();
}

std::string trials_csv(const SweepResult& result) {
  std::ostringstream o;
  const std::string kind = to_string(result.config.kind);
  o << "kind,x,mode,method,trial,seed,attempts,status,T,hit_iteration_cap\n";
  for (const auto& r : result.records) {
    o << kind << ',' << fmt(r.x, 10) << ',' << r.mode << ',' << r.method << ',' << r.trial << ',' << r.seed << ','
      << r.attempts << ',' << r.status << ',' << (r.total_time ? fmt(*r.total_time) : std::string()) << ','
      << (r.hit_iteration_cap ? 1 : 0) << '\n';
  }
  return o.str();
}

std::string config_hash(const SweepConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : sweep_config_to_json(config).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string provenance() { return std::string("weic ") + WEIC_VERSION + " (" + WEIC_GIT_DESCRIBE + ")"; }

Json sweep_manifest(const SweepResult& result) {
  Json j;
  j["provenance"] = provenance();
  j["config_hash"] = config_hash(result.config);
  j["config"] = sweep_config_to_json(result.config);
  std::size_t absent = 0;
  for (const auto& r : result.rows) absent += r.trials == 0 ? 1 : 0;
  j["rows"] = result.rows.size();
  j["absent_cells"] = absent;
  j["records"] = result.records.size();
  return j;
}

void write_sweep(const SweepResult& result, const std::filesystem::path& out_dir, const std::string& prefix) {
  std::filesystem::create_directories(out_dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(out_dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out_dir / name).string());
    f << text;
  };
  write(prefix + ".csv", summary_csv(result));
  write(prefix + "_trials.csv", trials_csv(result));
  write(prefix + "_manifest.json", sweep_manifest(result).dump(2) + "\n");
}

}  // namespace weic
