#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <sstream>
#include <thread>

#include "weic/service.hpp"

using namespace weic;
using Json = nlohmann::ordered_json;

namespace {

Json call(Service& s, const std::string& line) { return Json::parse(s.handle(line)); }

std::string reset_line(int id, int seed, const std::string& extra = "") {
  return R"({"v":1,"id":)" + std::to_string(id) + R"(,"op":"reset","seed":)" + std::to_string(seed) +
         R"(,"config":{"K":3,"N":3,"Nt":2,"r":2)" + extra + "}}";
}

std::vector<std::string> scripted_session() {
  return {
      reset_line(1, 7),
      R"({"v":1,"id":2,"op":"action_table","episode_id":"ep-1","round":0})",
      R"({"v":1,"id":3,"op":"reference_beamformer","episode_id":"ep-1","round":0,"action_index":3})",
      R"({"v":1,"id":4,"op":"step","episode_id":"ep-1","round":0,"action_index":3})",
      R"({"v":1,"id":5,"op":"step","episode_id":"ep-1","round":1,"action_index":1})",
      R"({"v":1,"id":6,"op":"step","episode_id":"ep-1","round":2,"action_index":0})",
      R"({"v":1,"id":7,"op":"finalize","episode_id":"ep-1","replay":true})",
  };
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("reset, step with reference beams, finalize") {
    Service svc;
    const Json r = call(svc, reset_line(1, 7));
    REQUIRE(r["ok"] == true);
    CHECK(r["id"] == 1);
    CHECK(r["v"] == 1);
    CHECK(r["episode_id"] == "ep-1");
    CHECK(r["observations"].size() == 3);
    CHECK(r["observations"][0]["e"] == Json::parse("[0,0,0]"));
    CHECK(r["action_table_size"] == 5);
    // Fully cached K=3: sender 0 XORs d_1 and d_2 (table index 3 is the coded pair).
    const Json s = call(svc, R"({"id":"a","op":"step","episode_id":"ep-1","round":0,"action_index":3})");
    REQUIRE(s["ok"] == true);
    CHECK(s["id"] == "a");
    CHECK(s["action"] == Json::parse("[[1,2]]"));
    CHECK(s["reference_beams"] == true);
    CHECK(s["pending"] == Json::parse("[0,1,1]"));
    CHECK(s["time"].get<double>() > 0);
    CHECK(s["observation"]["agent"] == 1);
    // Index 3 for sender 1 is {0,2}; user 2 is already served so it masks to {0}.
    const Json s2 = call(svc, R"({"op":"step","episode_id":"ep-1","round":1,"action_index":3})");
    CHECK(s2["action"] == Json::parse("[[0]]"));
    CHECK(s2["pending"] == Json::parse("[1,1,1]"));
    const Json s3 = call(svc, R"({"op":"step","episode_id":"ep-1","round":2,"action_index":0})");
    CHECK(s3["done"] == true);
    CHECK(s3["time"] == 0.0);
    const Json f = call(svc, R"({"op":"finalize","episode_id":"ep-1"})");
    CHECK(f["reward"].get<double>() == doctest::Approx(1.0 / f["total_time"].get<double>()));
    CHECK(f["served"] == Json::parse("[1,1,1]"));
    CHECK(svc.open_episodes() == 0);
    CHECK(call(svc, R"({"op":"finalize","episode_id":"ep-1"})")["error"]["code"] == "unknown_episode");
  }

  TEST_CASE("action table entries") {
    Service svc;
    const Json t = call(svc, R"({"op":"action_table","config":{"K":5,"Nt":4}})");
    CHECK(t["size"] == 52);
    CHECK(t["entries"].size() == 52);
    CHECK(t["entries"][0]["blocks"] == Json::array());
    call(svc, reset_line(1, 3));
    const Json m = call(svc, R"({"op":"action_table","episode_id":"ep-1","round":1})");
    REQUIRE(m["actions"].size() == 5);
    CHECK(m["actions"][0]["valid"] == true);
  }

  TEST_CASE("caller beams follow their blocks through masking") {
    Service svc;
    call(svc, reset_line(1, 5));
    call(svc, R"({"op":"step","episode_id":"ep-1","round":0,"action_index":1})");  // serves user 1
    // Sender 1, index 4 = {0},{2} split. Nothing masked; beam 1 has zero power.
    const Json s = call(svc, R"({"op":"step","episode_id":"ep-1","round":1,"action_index":4,
      "beams":[[[0.5,0],[0.5,0]],[[0,0],[0,0]]]})");
    REQUIRE(s["ok"] == true);
    CHECK(s["action"] == Json::parse("[[0],[2]]"));
    CHECK(s["sinrs"][1] == 0.0);
    // Sender 2, index 4 = {0},{1}: both served, so the action masks to skip.
    const Json k = call(svc, R"({"op":"step","episode_id":"ep-1","round":2,"action_index":4,
      "beams":[[[1,0],[0,0]],[[0,0],[0,0]]]})");
    CHECK(k["action"] == Json::array());
    CHECK(k["time"] == 0.0);
  }

  TEST_CASE("error envelopes") {
    Service svc;
    const Json bad = call(svc, "{not json");
    CHECK(bad["ok"] == false);
    CHECK(bad["id"].is_null());
    CHECK(bad["error"]["code"] == "bad_request");
    CHECK(call(svc, R"({"id":9,"op":"dance"})")["error"]["code"] == "bad_request");
    CHECK(call(svc, R"({"id":9})")["error"]["code"] == "bad_request");
    CHECK(call(svc, R"([1,2])")["error"]["code"] == "bad_request");
    CHECK(call(svc, R"({"v":2,"op":"reset"})")["error"]["code"] == "unsupported_version");
    CHECK(call(svc, R"({"op":"reset","config":{"K":1}})")["error"]["code"] == "bad_request");
    CHECK(call(svc, R"({"op":"reset","config":{"K":3,"r":5}})")["error"]["code"] == "infeasible_scenario");
    CHECK(call(svc, R"({"op":"step","episode_id":"nope","round":0,"action_index":0})")["error"]["code"] ==
          "unknown_episode");
    call(svc, reset_line(1, 1));
    CHECK(call(svc, R"({"op":"step","episode_id":"ep-1","round":1,"action_index":0})")["error"]["code"] ==
          "out_of_order");
    CHECK(call(svc, R"({"op":"step","episode_id":"ep-1","round":0,"action_index":99})")["error"]["code"] ==
          "bad_request");
    CHECK(call(svc, R"({"op":"step","episode_id":"ep-1","round":0,"action_index":1,"beams":[[[2,0],[0,0]]]})")
              ["error"]["code"] == "power_violation");
    CHECK(call(svc, R"({"op":"step","episode_id":"ep-1","round":0,"action_index":1,"beams":[]})")["error"]["code"] ==
          "bad_beams");
    CHECK(call(svc, R"({"op":"step","episode_id":"ep-1","round":0,"action_index":1,"beams":[[[1,0]]]})")
              ["error"]["code"] == "bad_beams");
    // Still at round 0 after all the rejections.
    CHECK(call(svc, R"({"op":"step","episode_id":"ep-1","round":0,"action_index":0})")["ok"] == true);
    for (int r = 1; r < 3; ++r)
      call(svc, R"({"op":"step","episode_id":"ep-1","round":)" + std::to_string(r) + R"(,"action_index":0})");
    CHECK(call(svc, R"({"op":"step","episode_id":"ep-1","round":3,"action_index":0})")["error"]["code"] ==
          "episode_done");
  }

  TEST_CASE("undecodable actions") {
    Service svc;
    // Empty caches: only uncoded unicast from a user caching the demand, and nobody caches anything.
    call(svc, R"({"op":"reset","seed":1,"config":{"K":3,"Nt":2,"r":0}})");
    CHECK(call(svc, R"({"op":"step","episode_id":"ep-1","round":0,"action_index":1})")["error"]["code"] ==
          "infeasible_action");
    CHECK(call(svc, R"({"op":"reference_beamformer","episode_id":"ep-1","round":0,"action_index":1})")["error"]
              ["code"] == "infeasible_action");
    const Json f = call(svc, R"({"op":"finalize","episode_id":"ep-1"})");
    CHECK(f["served"] == Json::parse("[0,0,0]"));
    CHECK(f["reward"].get<double>() > 0);
  }

  TEST_CASE("reference beamformers") {
    Service svc;
    call(svc, reset_line(1, 2));
    const Json skip = call(svc, R"({"op":"reference_beamformer","episode_id":"ep-1","round":0,"action_index":0})");
    CHECK(skip["beams"] == Json::array());
    CHECK(skip["time"] == 0.0);
    const Json mrt =
        call(svc, R"({"op":"reference_beamformer","episode_id":"ep-1","round":0,"action_index":1,"solver":"mrt"})");
    const Json dt = call(svc, R"({"op":"reference_beamformer","episode_id":"ep-1","round":0,"action_index":1})");
    REQUIRE(mrt["ok"] == true);
    CHECK(dt["min_sinr"].get<double>() == doctest::Approx(mrt["min_sinr"].get<double>()).epsilon(1e-3));
    const Json coded = call(svc, R"({"op":"reference_beamformer","episode_id":"ep-1","round":0,"action_index":3})");
    CHECK(coded["sinrs"].size() == 2);
    CHECK(coded["min_sinr"].get<double>() > 0);
    CHECK(call(svc, R"({"op":"reference_beamformer","episode_id":"ep-1","round":0,"action_index":1,"solver":"sdr"})")
              ["error"]["code"] == "bad_request");
  }

  TEST_CASE("solve_plan and composite similarity") {
    Service svc;
    call(svc, reset_line(1, 4));
    const Json ex = call(svc, R"({"op":"solve_plan","episode_id":"ep-1","method":"exhaustive","beams":false})");
    REQUIRE(ex["ok"] == true);
    const Json ev = call(svc, R"({"op":"solve_plan","episode_id":"ep-1","plan":)" + ex["plan"].dump() + "}");
    CHECK(ev["T"] == ex["T"]);
    CHECK(call(svc, R"({"op":"solve_plan","episode_id":"ep-1","plan":{"rounds":[[],[],[]]}})")["error"]["code"] ==
          "infeasible_action");
    const Json c =
        call(svc, R"({"op":"composite_similarity","episode_id":"ep-1","a":{"sender":0,"dests":[1]},"b":{"sender":0,"dests":[1]}})");
    CHECK(c["similarity"].get<double>() == doctest::Approx(1.0));
  }

  TEST_CASE("identical request sequences give identical bytes") {
    Service a;
    Service b;
    for (const auto& line : scripted_session()) CHECK(a.handle(line) == b.handle(line));
  }

  TEST_CASE("concurrent episodes") {
    Service svc;
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) ids.push_back(call(svc, reset_line(i, 10 + i))["episode_id"]);
    std::vector<std::thread> threads;
    std::vector<int> failures(4, 0);
    for (int i = 0; i < 4; ++i)
      threads.emplace_back([&, i] {
        for (int r = 0; r < 3; ++r) {
          const Json s = call(svc, R"({"op":"step","episode_id":")" + ids[i] + R"(","round":)" + std::to_string(r) +
                                       R"(,"action_index":0})");
          if (s["ok"] != true) ++failures[i];
        }
      });
    for (auto& t : threads) t.join();
    for (int f : failures) CHECK(f == 0);
    CHECK(svc.open_episodes() == 4);
  }

  TEST_CASE("stdio transport stops at shutdown") {
    Service svc;
    std::istringstream in(reset_line(1, 1) + "\n\n" + R"({"id":2,"op":"shutdown"})" + "\n" + reset_line(3, 1) + "\n");
    std::ostringstream out;
    serve_stream(svc, in, out);
    std::istringstream lines(out.str());
    std::string first, second, third;
    std::getline(lines, first);
    std::getline(lines, second);
    CHECK(Json::parse(first)["id"] == 1);
    CHECK(Json::parse(second)["ok"] == true);
    CHECK_FALSE(std::getline(lines, third));
  }

  TEST_CASE("TCP transport answers pipelined requests in order") {
    Service svc;
    TcpServer server(svc, 0);
    REQUIRE(server.port() != 0);
    std::thread loop([&] { server.run(); });

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(server.port());
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    std::string batch;
    for (const auto& line : scripted_session()) batch += line + "\n";
    batch += R"({"id":99,"op":"shutdown"})" "\n";
    ::send(fd, batch.data(), batch.size(), 0);
    std::string received;
    char buf[4096];
    for (ssize_t n; (n = ::recv(fd, buf, sizeof buf, 0)) > 0;) received.append(buf, static_cast<std::size_t>(n));
    ::close(fd);
    loop.join();

    Service reference;
    std::istringstream lines(received);
    std::string line;
    int count = 0;
    for (const auto& req : scripted_session()) {
      REQUIRE(std::getline(lines, line));
      CHECK(line == reference.handle(req));
      ++count;
    }
    REQUIRE(std::getline(lines, line));
    CHECK(Json::parse(line)["id"] == 99);
    CHECK(count == 7);
  }
}
