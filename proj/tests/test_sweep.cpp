#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "weic/sweep.hpp"

using namespace weic;

namespace {

SweepConfig small(SweepKind kind) {
  SweepConfig c;
  c.kind = kind;
  c.base.users = 3;
  c.base.files = 3;
  c.base.antennas = 2;
  c.trials = 3;
  c.seed = 42;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("sweep") {
  TEST_CASE("snr sweep emits one row per point and method") {
    SweepConfig c = small(SweepKind::snr);
    c.points = {0, 10};
    const SweepResult r = run_sweep(c);
    REQUIRE(r.rows.size() == 4);
    CHECK(r.records.size() == 12);
    for (const auto& row : r.rows) CHECK(row.trials == 3);
    const std::string csv = summary_csv(r);
    CHECK(csv.rfind("kind,x,mode,method,trials,mean_T,std_T\nsnr,0,direct,exhaustive,3,", 0) == 0);
    // Both methods see the same instance in each trial.
    for (const auto& e : r.records) {
      if (e.method != "exhaustive") continue;
      for (const auto& q : r.records)
        if (q.method == "sequential" && q.x == e.x && q.trial == e.trial) {
          CHECK(q.seed == e.seed);
          CHECK(*e.total_time <= *q.total_time);
        }
    }
  }

  TEST_CASE("worker count does not change a byte") {
    SweepConfig c = small(SweepKind::load);
    c.points = {1, 2};
    c.workers = 1;
    const SweepResult a = run_sweep(c);
    c.workers = 3;
    const SweepResult b = run_sweep(c);
    CHECK(summary_csv(a) == summary_csv(b));
    CHECK(trials_csv(a) == trials_csv(b));
    CHECK(config_hash(a.config) == config_hash(b.config));
  }

  TEST_CASE("large systems run clustered and leave direct exhaustive absent") {
    SweepConfig c = small(SweepKind::users);
    c.base.antennas = 4;
    c.points = {4, 10};
    c.trials = 2;
    const SweepResult r = run_sweep(c);
    int absent = 0;
    int clustered = 0;
    for (const auto& row : r.rows) {
      if (row.x == 4) CHECK(row.mode == "direct");
      if (row.x == 10 && row.mode == "direct") {
        CHECK(row.method == "exhaustive");
        CHECK(row.trials == 0);
        ++absent;
      }
      if (row.x == 10 && row.mode == "cluster") {
        CHECK(row.trials == 2);
        ++clustered;
      }
    }
    CHECK(absent == 1);
    CHECK(clustered == 2);
    CHECK(summary_csv(r).find("users,10,direct,exhaustive,0,,\n") != std::string::npos);
    CHECK(sweep_manifest(r)["absent_cells"] == 1);
  }

  TEST_CASE("cluster totals add up per cluster") {
    SweepConfig c = small(SweepKind::cluster);
    c.base.antennas = 4;
    c.points = {10};
    c.trials = 1;
    c.methods = {"sequential"};
    const SweepResult r = run_sweep(c);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].mode == "cluster");
    CHECK(r.records[0].total_time.value() > 0);
  }

  TEST_CASE("config parsing, validation and artifacts") {
    const auto j = nlohmann::ordered_json::parse(
        R"({"kind":"snr","config":{"K":3,"Nt":2},"r":2,"trials":2,"seed":5,"points":[0],"methods":["sequential"]})");
    const SweepConfig c = sweep_config_from_json(j);
    CHECK(c.base.users == 3);
    CHECK(c.base.files == 5);
    CHECK(c.trials == 2);
    SweepConfig other = c;
    other.seed = 6;
    CHECK(config_hash(c) != config_hash(other));
    CHECK(config_hash(c).size() == 16);
    CHECK_THROWS(sweep_kind_from_string("sinr"));
    SweepConfig bad = small(SweepKind::users);
    bad.points = {7};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // 7 users do not split into 5-user clusters
    bad.points = {4};
    bad.methods = {"marl"};
    CHECK_THROWS(bad.validate());

    const auto dir = std::filesystem::temp_directory_path() / "weic_sweep_test";
    std::filesystem::remove_all(dir);
    const SweepResult r = run_sweep(c);
    write_sweep(r, dir, "snr");
    CHECK(slurp(dir / "snr.csv") == summary_csv(r));
    CHECK(slurp(dir / "snr_trials.csv") == trials_csv(r));
    const auto manifest = nlohmann::ordered_json::parse(slurp(dir / "snr_manifest.json"));
    CHECK(manifest["config_hash"] == config_hash(c));
    CHECK(manifest["provenance"].get<std::string>().rfind("weic ", 0) == 0);
    std::filesystem::remove_all(dir);
  }
}
