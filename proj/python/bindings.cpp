#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "weic/beamforming.hpp"
#include "weic/channel.hpp"
#include "weic/eic.hpp"
#include "weic/environment.hpp"
#include "weic/optimizer.hpp"
#include "weic/scenario.hpp"
#include "weic/service.hpp"

namespace py = pybind11;
using namespace weic;

namespace {

RoundAction to_action(const std::vector<std::vector<UserId>>& blocks) {
  RoundAction a{blocks};
  a.canonicalize();
  return a;
}

BeamformerSet to_beams(const std::vector<CVector>& vs) { return BeamformerSet{vs}; }

py::dict solution_dict(const PlanSolution& s) {
  py::dict d;
  std::vector<std::vector<std::vector<UserId>>> plan;
  std::vector<std::vector<CVector>> beams;
  for (const auto& r : s.rounds) {
    plan.push_back(r.action.blocks);
    beams.push_back(r.beams.vectors);
  }
  d["plan"] = plan;
  d["round_times"] = s.round_times();
  d["T"] = s.total_time;
  d["beams"] = beams;
  d["hit_iteration_cap"] = s.hit_iteration_cap;
  d["plans_examined"] = s.plans_examined;
  return d;
}

EicPlan to_plan(const std::vector<std::vector<std::vector<UserId>>>& rounds) {
  EicPlan p;
  for (const auto& r : rounds) p.rounds.push_back(to_action(r));
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Wireless embedded index coding core: scenarios, channels, action tables, beamforming and the env service";
  m.attr("__version__") = WEIC_VERSION;

  py::register_exception<InfeasibleScenario>(m, "InfeasibleScenario", PyExc_ValueError);
  py::register_exception<InfeasibleInstance>(m, "InfeasibleInstance", PyExc_ValueError);
  py::register_exception<GuardExceeded>(m, "GuardExceeded", PyExc_RuntimeError);

  py::class_<SystemConfig>(m, "SystemConfig")
      .def(py::init([](int K, int N, int Nt, double P, double B, double W) {
             SystemConfig c{K, N < 0 ? K : N, Nt, P, B, W};
             c.validate();
             return c;
           }),
           py::arg("K") = 5, py::arg("N") = -1, py::arg("Nt") = 4, py::arg("P") = 1.0, py::arg("B") = 1e5,
           py::arg("W") = 1.0)
      .def_readwrite("K", &SystemConfig::users)
      .def_readwrite("N", &SystemConfig::files)
      .def_readwrite("Nt", &SystemConfig::antennas)
      .def_readwrite("P", &SystemConfig::power)
      .def_readwrite("B", &SystemConfig::file_bits)
      .def_readwrite("W", &SystemConfig::bandwidth)
      .def("__repr__", [](const SystemConfig& c) { return "SystemConfig(" + config_to_json(c).dump() + ")"; });

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("config", &Scenario::config)
      .def_readonly("demands", &Scenario::demands)
      .def_readonly("caches", &Scenario::caches)
      .def("to_json", [](const Scenario& s) { return scenario_to_json(s).dump(); })
      .def_static("from_json", [](const std::string& text) {
        return scenario_from_json(nlohmann::ordered_json::parse(text));
      });

  m.def("generate_scenario", &generate_scenario, py::arg("seed"), py::arg("config"), py::arg("r"));
  m.def("has_feasible_eic", &has_feasible_eic, py::arg("scenario"));
  m.def("min_length_eic", [](const Scenario& s) {
    std::vector<std::vector<std::vector<UserId>>> out;
    for (const auto& r : min_length_eic(s).rounds) out.push_back(r.blocks);
    return out;
  });
  m.def("plan_violations", [](const std::vector<std::vector<std::vector<UserId>>>& plan, const Scenario& s) {
    return plan_violations(to_plan(plan), s);
  });

  py::class_<ChannelSet>(m, "ChannelSet")
      .def_property_readonly("K", &ChannelSet::users)
      .def_property_readonly("Nt", &ChannelSet::antennas)
      .def("link", [](const ChannelSet& c, UserId t, UserId k) -> CMatrix { return c.link(t, k); },
           py::arg("sender"), py::arg("receiver"));
  m.def("sample_channels",
        [](std::uint64_t seed, const SystemConfig& c, bool refresh) {
          return sample_channels(seed, c, ChannelOptions{refresh});
        },
        py::arg("seed"), py::arg("config"), py::arg("per_round_refresh") = false);
  m.def("composite_channel", [](const ChannelSet& c, UserId t, const std::vector<UserId>& dests) {
    return composite_channel(c, t, dests);
  });
  m.def("composite_similarity", &composite_similarity);

  m.def("bell_number", &bell_number);
  py::class_<ActionTable>(m, "ActionTable")
      .def(py::init<int, int>(), py::arg("K"), py::arg("Nt"))
      .def("__len__", &ActionTable::size)
      .def("slot_blocks", &ActionTable::slot_blocks)
      .def("for_sender", [](const ActionTable& t, std::size_t g, UserId s) { return t.for_sender(g, s).blocks; })
      .def("index_of", [](const ActionTable& t, const std::vector<std::vector<UserId>>& blocks, UserId s) {
        return t.index_of(to_action(blocks), s);
      });

  m.def("round_sinrs",
        [](const ChannelSet& c, UserId t, const std::vector<std::vector<UserId>>& blocks,
           const std::vector<CVector>& beams) { return round_sinrs(c, t, to_action(blocks), to_beams(beams)); });
  m.def("round_time", [](const std::vector<double>& sinrs, const SystemConfig& c) { return round_time(sinrs, c); });
  m.def("mrt_beamformer", &mrt_beamformer, py::arg("H"), py::arg("power"));
  m.def(
      "dtrcg_solve",
      [](const ChannelSet& c, UserId t, const std::vector<std::vector<UserId>>& blocks, double power) {
        py::gil_scoped_release nogil;
        const SolveResult r = dtrcg_solve(c, t, to_action(blocks), power);
        return std::make_tuple(r.beams.vectors, r.min_sinr);
      },
      py::arg("channels"), py::arg("sender"), py::arg("blocks"), py::arg("power"));

  m.def("exhaustive_search", [](const Scenario& s, const ChannelSet& c) {
    PlanSolution sol;
    {
      py::gil_scoped_release nogil;
      sol = exhaustive_search(s, c);
    }
    return solution_dict(sol);
  });
  m.def("sequential_optimize", [](const Scenario& s, const ChannelSet& c) {
    return solution_dict(sequential_optimize(s, c));
  });
  m.def("evaluate_plan",
        [](const std::vector<std::vector<std::vector<UserId>>>& plan, const Scenario& s, const ChannelSet& c) {
          return solution_dict(evaluate_plan(to_plan(plan), s, c));
        });

  m.def("finalize_reward", [](const std::vector<std::uint8_t>& pending, const std::vector<double>& times,
                              double penalty) { return finalize(pending, times, penalty).reward; });

  py::class_<Service>(m, "Service")
      .def(py::init<>())
      .def("handle", [](Service& s, const std::string& line) {
        py::gil_scoped_release nogil;
        return s.handle(line);
      })
      .def_property_readonly("shutdown_requested", &Service::shutdown_requested)
      .def_property_readonly("open_episodes", &Service::open_episodes);
}
