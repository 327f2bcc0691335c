#include <doctest.h>

#include <algorithm>
#include <set>

#include "weic/scenario.hpp"

using namespace weic;

namespace {

Scenario two_user_xor() {
  // Each of two users caches what the other wants.
  Scenario s;
  s.config.users = 2;
  s.config.files = 2;
  s.config.antennas = 1;
  s.demands = {0, 1};
  s.caches = {{1}, {0}};
  return s;
}

bool has_rule(const std::vector<Violation>& v, const std::string& rule) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.rule == rule; });
}

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("generated scenarios satisfy every invariant") {
    SystemConfig c;
    c.users = 5;
    c.files = 10;
    const Scenario s = generate_scenario(1, c, 4.0);
    CHECK(validate_scenario(s).empty());
    std::set<FileId> demands(s.demands.begin(), s.demands.end());
    CHECK(demands.size() == 5);
    for (int k = 0; k < 5; ++k) {
      CHECK(s.caches[k].size() == 4);
      CHECK(std::is_sorted(s.caches[k].begin(), s.caches[k].end()));
      CHECK_FALSE(s.caches_file(k, s.demands[k]));
    }
  }

  TEST_CASE("zero load leaves every cache empty") {
    const Scenario s = generate_scenario(9, SystemConfig{}, 0.0);
    for (const auto& c : s.caches) CHECK(c.empty());
    CHECK(validate_scenario(s).empty());
  }

  TEST_CASE("same seed gives the same scenario, caches nest as the load grows") {
    SystemConfig c;
    c.files = 8;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Scenario a = generate_scenario(seed, c, 2.0);
      const Scenario b = generate_scenario(seed, c, 2.0);
      CHECK(a.demands == b.demands);
      CHECK(a.caches == b.caches);
      const Scenario big = generate_scenario(seed, c, 5.0);
      CHECK(big.demands == a.demands);
      for (int k = 0; k < c.users; ++k)
        CHECK(std::includes(big.caches[k].begin(), big.caches[k].end(), a.caches[k].begin(), a.caches[k].end()));
    }
  }

  TEST_CASE("load beyond N-1 is infeasible, negative load is rejected") {
    SystemConfig c;
    CHECK_THROWS_AS(generate_scenario(1, c, 5.0), InfeasibleScenario);
    CHECK_NOTHROW(generate_scenario(1, c, 4.0));
    CHECK_THROWS_AS(generate_scenario(1, c, -1.0), std::invalid_argument);
    c.files = 3;
    CHECK_THROWS_AS(generate_scenario(1, c, 1.0), std::invalid_argument);  // N < K
  }

  TEST_CASE("side-information graph of the two-user exchange") {
    const SideInfoGraph g = side_info_graph(two_user_xor());
    CHECK_FALSE(g.edge(0, 0));
    CHECK(g.edge(0, 1));
    CHECK(g.edge(1, 0));
    CHECK_FALSE(g.edge(1, 1));
  }

  TEST_CASE("side-information graph matches set membership") {
    SystemConfig c;
    c.users = 4;
    c.files = 7;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Scenario s = generate_scenario(seed, c, 3.0);
      const SideInfoGraph g = side_info_graph(s);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          const auto& m = s.caches[i];
          const bool expect = i != j && std::find(m.begin(), m.end(), s.demands[j]) != m.end();
          CHECK(g.edge(i, j) == expect);
        }
    }
    Scenario empty = generate_scenario(3, c, 0.0);
    const SideInfoGraph g = side_info_graph(empty);
    CHECK(std::count(g.adjacency.begin(), g.adjacency.end(), 1) == 0);
  }

  TEST_CASE("validation reports broken invariants") {
    CHECK(validate_scenario(two_user_xor()).empty());
    Scenario dup = two_user_xor();
    dup.demands = {0, 0};
    dup.caches = {{1}, {1}};
    CHECK(has_rule(validate_scenario(dup), "distinct demands"));
    Scenario own = two_user_xor();
    own.caches[0] = {0, 1};
    auto v = validate_scenario(own);
    REQUIRE(has_rule(v, "own demand cached"));
    CHECK(std::find_if(v.begin(), v.end(), [](const Violation& x) { return x.rule == "own demand cached"; })->index ==
          0);
    Scenario range = two_user_xor();
    range.demands = {0, 7};
    CHECK(has_rule(validate_scenario(range), "demand range"));
  }

  TEST_CASE("JSON round trip keeps canonical key order") {
    SystemConfig c;
    const Scenario s = generate_scenario(4, c, 2.0);
    const std::string text = scenario_to_json(s).dump();
    CHECK(text.rfind("{\"K\":5,\"N\":5,\"Nt\":4,\"P\":1.0,\"B\":100000.0,\"W\":1.0,\"demands\":", 0) == 0);
    const Scenario back = scenario_from_json(nlohmann::ordered_json::parse(text));
    CHECK(back.demands == s.demands);
    CHECK(back.caches == s.caches);
    CHECK(scenario_to_json(back).dump() == text);
    auto bad = scenario_to_json(s);
    bad["demands"][0] = bad["demands"][1];
    CHECK_THROWS_AS(scenario_from_json(bad), std::invalid_argument);
  }

  TEST_CASE("config parsing fills N from K and validates") {
    const auto c = config_from_json(nlohmann::ordered_json::parse(R"({"K":7,"Nt":2})"));
    CHECK(c.users == 7);
    CHECK(c.files == 7);
    CHECK(c.antennas == 2);
    CHECK_THROWS_AS(config_from_json(nlohmann::ordered_json::parse(R"({"K":1})")), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(nlohmann::ordered_json::parse(R"({"P":"x"})")), std::invalid_argument);
  }
}
