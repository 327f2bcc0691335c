// weic: command-line driver for scenario generation, solving, sweeps and the
// environment service.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "weic/beamforming.hpp"
#include "weic/channel.hpp"
#include "weic/eic.hpp"
#include "weic/optimizer.hpp"
#include "weic/scenario.hpp"
#include "weic/service.hpp"
#include "weic/sweep.hpp"

using namespace weic;
using Json = nlohmann::ordered_json;

namespace {

Json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void emit(const Json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + out_path);
  f << text;
}

// System parameters shared by gen/solve/evaluate: a JSON config file, then
// individual flags on top.
struct InstanceArgs {
  std::uint64_t seed = 1;
  std::string config_path;
  std::string scenario_path;
  std::string channels_path;
  int users = -1;
  int files = -1;
  int antennas = -1;
  double power = -1;
  double load = -1;
  bool refresh = false;

  void attach(CLI::App* app, bool with_scenario) {
    app->add_option("--seed", seed, "seed for the scenario and channel draw")->envname("WEIC_SEED");
    app->add_option("--config", config_path, "JSON file with K, N, Nt, P, B, W and r")->envname("WEIC_CONFIG");
    app->add_option("-K,--users", users, "number of users");
    app->add_option("-N,--files", files, "number of files");
    app->add_option("--Nt,--antennas", antennas, "antennas per user");
    app->add_option("-P,--power", power, "per-sender power budget (linear)");
    app->add_option("-r,--load", load, "cached files per user");
    app->add_flag("--per-round-refresh", refresh, "draw every link independently");
    if (with_scenario) {
      app->add_option("--scenario", scenario_path, "scenario JSON (overrides generation)");
      app->add_option("--channels", channels_path, "channel JSON (overrides the seeded draw)");
    }
  }

  std::pair<SystemConfig, double> config() const {
    Json j = config_path.empty() ? Json::object() : read_json_file(config_path);
    if (users > 0) j["K"] = users;
    if (files > 0) j["N"] = files;
    if (antennas >= 0) j["Nt"] = antennas;
    if (power > 0) j["P"] = power;
    const double r = load >= 0 ? load : j.value("r", 2.0);
    return {config_from_json(j), r};
  }

  Scenario scenario() const {
    if (!scenario_path.empty()) return scenario_from_json(read_json_file(scenario_path));
    const auto [cfg, r] = config();
    return generate_scenario(seed, cfg, r);
  }

  ChannelSet channels(const Scenario& s) const {
    if (!channels_path.empty()) return channels_from_json(read_json_file(channels_path));
    ChannelOptions o;
    o.per_round_refresh = refresh;
    return sample_channels(seed, s.config, o);
  }
};

void write_traces(const std::string& path, const PlanSolution& sol, const Scenario& s, const ChannelSet& ch,
                  const SolverParams& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "round,outer,eta,min_f,grad_norm,mu\n";
  for (UserId t = 0; t < s.users(); ++t) {
    const RoundAction& a = sol.plan.rounds[static_cast<std::size_t>(t)];
    if (a.skip()) continue;
    std::ostringstream rows;
    write_trace_csv(rows, dtrcg_solve(ch, t, a, s.config.power, params).trace);
    std::istringstream in(rows.str());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) f << t << ',' << line << '\n';
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Wireless embedded index coding: scenarios, joint optimization, sweeps and the RL environment service"};
  app.set_version_flag("--version", provenance());
  app.require_subcommand(1);

  std::string out_path;

  InstanceArgs gen_args;
  bool gen_channels = false;
  auto* gen = app.add_subcommand("gen", "write a seeded scenario as JSON");
  gen_args.attach(gen, false);
  gen->add_flag("--with-channels", gen_channels, "emit {scenario, channels} instead of the bare scenario");
  gen->add_option("-o,--out", out_path, "output file (default stdout)");

  InstanceArgs solve_args;
  std::string method = "exhaustive";
  std::string trace_path;
  bool no_beams = false;
  auto* solve = app.add_subcommand("solve", "jointly optimize the code and the beamformers");
  solve_args.attach(solve, true);
  solve->add_option("--method", method, "exhaustive or sequential")
      ->envname("WEIC_METHOD")
      ->check(CLI::IsMember({"exhaustive", "sequential"}));
  solve->add_option("--trace", trace_path, "write the solver iteration trace of every active round as CSV");
  solve->add_flag("--no-beams", no_beams, "omit beamformers from the output");
  solve->add_option("-o,--out", out_path, "output file (default stdout)");

  InstanceArgs eval_args;
  std::string plan_path;
  auto* evaluate = app.add_subcommand("evaluate", "price a fixed plan with optimized beamformers");
  eval_args.attach(evaluate, true);
  evaluate->add_option("--plan", plan_path, "plan JSON {\"rounds\": [[[dests], ...], ...]}")->required();
  evaluate->add_flag("--no-beams", no_beams, "omit beamformers from the output");
  evaluate->add_option("-o,--out", out_path, "output file (default stdout)");

  int table_users = 5;
  int table_antennas = 4;
  auto* table = app.add_subcommand("action-table", "print the universal per-round action table");
  table->add_option("-K,--users", table_users, "number of users");
  table->add_option("--Nt,--antennas", table_antennas, "antennas per user");
  table->add_option("-o,--out", out_path, "output file (default stdout)");

  std::string sweep_kind;
  std::string sweep_config;
  std::string out_dir = "results";
  int trials = -1;
  std::uint64_t sweep_seed = 0;
  std::string sweep_methods;
  int workers = -1;
  std::vector<double> points;
  auto* sweep = app.add_subcommand("sweep", "run a seeded multi-trial sweep and write CSV + manifest");
  sweep->add_option("kind", sweep_kind, "snr, users, load or cluster")
      ->required()
      ->check(CLI::IsMember({"snr", "users", "load", "cluster"}));
  sweep->add_option("--config", sweep_config, "sweep config JSON")->envname("WEIC_CONFIG");
  auto* seed_opt = sweep->add_option("--seed", sweep_seed, "seed base")->envname("WEIC_SEED");
  sweep->add_option("--trials", trials, "trials per point")->envname("WEIC_TRIALS");
  sweep->add_option("--method", sweep_methods, "comma-separated methods")->envname("WEIC_METHOD");
  sweep->add_option("--out-dir", out_dir, "output directory")->envname("WEIC_OUT_DIR");
  sweep->add_option("--workers", workers, "worker threads (0: all cores)")->envname("WEIC_WORKERS");
  sweep->add_option("--points", points, "sweep grid override")->delimiter(',');

  bool stdio = false;
  int port = -1;
  std::string host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "run the environment service (NDJSON over stdio or TCP)");
  auto* stdio_flag = serve->add_flag("--stdio", stdio, "serve on stdin/stdout");
  auto* port_opt = serve->add_option("--port", port, "serve on a loopback TCP port (0: ephemeral)")
                       ->envname("WEIC_PORT");
  serve->add_option("--host", host, "IPv4 address to bind");
  stdio_flag->excludes(port_opt);

  CLI11_PARSE(app, argc, argv);

  if (*gen) {
    const Scenario s = gen_args.scenario();
    if (gen_channels) {
      Json j;
      j["scenario"] = scenario_to_json(s);
      ChannelOptions o;
      o.per_round_refresh = gen_args.refresh;
      j["channels"] = channels_to_json(sample_channels(gen_args.seed, s.config, o));
      emit(j, out_path);
    } else {
      emit(scenario_to_json(s), out_path);
    }
    return 0;
  }
  if (*solve) {
    const Scenario s = solve_args.scenario();
    const ChannelSet ch = solve_args.channels(s);
    const SolverParams params;
    const PlanSolution sol = run_method(method_from_string(method), s, ch, params);
    if (!trace_path.empty()) write_traces(trace_path, sol, s, ch, params);
    emit(solution_to_json(sol, method, !no_beams), out_path);
    return 0;
  }
  if (*evaluate) {
    const Scenario s = eval_args.scenario();
    const ChannelSet ch = eval_args.channels(s);
    const PlanSolution sol = evaluate_plan(plan_from_json(read_json_file(plan_path)), s, ch);
    emit(solution_to_json(sol, "evaluate", !no_beams), out_path);
    return 0;
  }
  if (*table) {
    const ActionTable t(table_users, table_antennas);
    Json j;
    j["K"] = table_users;
    j["Nt"] = table_antennas;
    j["size"] = t.size();
    j["entries"] = t.to_json();
    emit(j, out_path);
    return 0;
  }
  if (*sweep) {
    SweepConfig c;
    c.kind = sweep_kind_from_string(sweep_kind);
    if (!sweep_config.empty()) {
      Json j = read_json_file(sweep_config);
      j["kind"] = sweep_kind;
      c = sweep_config_from_json(j, c);
    }
    if (seed_opt->count() > 0 || std::getenv("WEIC_SEED")) c.seed = sweep_seed;
    if (trials > 0) c.trials = trials;
    if (workers >= 0) c.workers = workers;
    if (!points.empty()) c.points = points;
    if (!sweep_methods.empty()) {
      c.methods.clear();
      std::istringstream in(sweep_methods);
      for (std::string m; std::getline(in, m, ',');)
        if (!m.empty()) c.methods.push_back(m);
    }
    const SweepResult r = run_sweep(c);
    write_sweep(r, out_dir, sweep_kind);
    std::cout << summary_csv(r);
    return 0;
  }
  if (*serve) {
    Service service;
    if (port >= 0) {
      TcpServer server(service, static_cast<std::uint16_t>(port), host);
      std::cerr << "listening on " << host << ":" << server.port() << std::endl;
      server.run();
    } else {
      std::ios::sync_with_stdio(false);
      serve_stream(service, std::cin, std::cout);
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const GuardExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
