#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hbvote/audit.hpp"
#include "hbvote/chain_io.hpp"
#include "hbvote/error.hpp"
#include "hbvote/run_dir.hpp"
#include "hbvote/sim.hpp"

namespace py = pybind11;
using namespace hbvote;

namespace {

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

py::object tally_dict(const TallyResult& t) { return json_loads(tally_to_json(t).dump()); }

py::list findings_list(const std::vector<Finding>& findings) {
  py::list out;
  for (const auto& f : findings) {
    py::dict d;
    d["file"] = f.file;
    d["line"] = f.line;
    d["code"] = f.code;
    d["detail"] = f.detail;
    out.append(std::move(d));
  }
  return out;
}

py::dict audit_dict(const AuditReport& r) {
  py::dict d;
  d["ok"] = r.ok();
  d["parse_error"] = r.parse_error;
  d["findings"] = findings_list(r.findings);
  d["tally"] = r.ok() ? tally_dict(r.tally) : py::none();
  return d;
}

AuditReport audit_path(const std::filesystem::path& target, const std::optional<std::filesystem::path>& config) {
  py::gil_scoped_release release;
  if (std::filesystem::is_directory(target)) return RunAuditor(target).audit();
  if (!config) throw Error(Errc::ConfigInvalid, "a single chain file needs the election config");
  return audit_chain_file(target, AuditContext::from_config(load_config(*config)));
}

}  // namespace

PYBIND11_MODULE(_hbvote, m) {
  m.doc() = "Hierarchical blockchain e-voting simulator and audit toolkit";

  // Owned by the module for the interpreter's lifetime.
  static PyObject* error_type = py::exception<Error>(m, "Error").ptr();
  static PyObject* parse_error_type = py::exception<ParseError>(m, "ParseError", error_type).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    auto raise = [](PyObject* type, const Error& e, py::object line) {
      py::object exc = py::reinterpret_borrow<py::object>(type)(e.what());
      exc.attr("code") = py::str(std::string(errc_name(e.code())));
      exc.attr("line") = std::move(line);
      PyErr_SetObject(type, exc.ptr());
    };
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      raise(parse_error_type, e, py::int_(e.line()));
    } catch (const Error& e) {
      raise(error_type, e, py::none());
    }
  });

  m.def("sha256_hex", [](py::bytes data) { return sha256(std::string(data)).hex(); }, py::arg("data"));
  m.def(
      "genesis_hash", [](const std::string& election_id, std::uint32_t level) {
        return hash_of(GenesisBlock{election_id, level}).hex();
      },
      py::arg("election_id"), py::arg("level"));
  m.def(
      "mine_vote",
      [](const std::string& election_id, const std::string& box, const std::string& candidate,
         const std::string& prev_hex, std::uint32_t zero_bits) {
        auto prev = HashDigest::from_hex(prev_hex);
        if (!prev) throw Error(Errc::IllegalCharacter, "prev_hash is not a 64-char lowercase hex digest");
        VoteBlock draft{election_id, box, candidate, *prev, ""};
        py::gil_scoped_release release;
        return mine(draft, DifficultyPattern{zero_bits});
      },
      py::arg("election_id"), py::arg("ballot_box_id"), py::arg("candidate_id"), py::arg("prev_hash"),
      py::arg("zero_bits"), "Smallest decimal nonce whose vote digest has `zero_bits` leading zero bits.");

  py::class_<ElectionConfig>(m, "Config")
      .def(py::init<>())
      .def_static("parse", [](const std::string& text) { return parse_config(text); }, py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def_readwrite("election_id", &ElectionConfig::election_id)
      .def_readwrite("levels", &ElectionConfig::levels)
      .def_readwrite("clusters", &ElectionConfig::clusters)
      .def_readwrite("centers_per_cluster", &ElectionConfig::centers_per_cluster)
      .def_readwrite("voters", &ElectionConfig::voters)
      .def_readwrite("sync_interval_s", &ElectionConfig::sync_interval_s)
      .def_readwrite("pause_s", &ElectionConfig::pause_s)
      .def_readwrite("latency_ms", &ElectionConfig::latency_ms)
      .def_readwrite("zero_bits", &ElectionConfig::zero_bits)
      .def_readwrite("election_duration_s", &ElectionConfig::election_duration_s)
      .def_readwrite("seed", &ElectionConfig::seed)
      .def_readwrite("retry_cap", &ElectionConfig::retry_cap)
      .def_readwrite("delegates_per_cluster", &ElectionConfig::delegates_per_cluster)
      .def_readwrite("candidates", &ElectionConfig::candidates)
      .def_readwrite("override_scale", &ElectionConfig::override_scale)
      .def("validate", &ElectionConfig::validate)
      .def("__str__", &format_config);

  py::class_<Simulation>(m, "Simulation")
      .def(py::init([](ElectionConfig config, const std::string& faults) {
             return std::make_unique<Simulation>(std::move(config), FaultScript::from_jsonl(faults));
           }),
           py::arg("config"), py::arg("faults") = "")
      .def(
          "run",
          [](Simulation& sim) {
            {
              py::gil_scoped_release release;
              sim.run();
            }
            return json_loads(report_json(sim, {}));
          },
          "Runs the election day and returns the report as a dict.")
      .def(
          "export", [](Simulation& sim, const std::filesystem::path& dir) {
            py::gil_scoped_release release;
            write_run_directory(dir, sim);
          },
          py::arg("dir"))
      .def_property_readonly("voters", [](const Simulation& sim) { return sim.credentials().size(); })
      .def_property_readonly("center_ids", [](const Simulation& sim) {
        std::vector<std::string> out;
        for (const auto& c : sim.centers()) out.push_back(c.node_id());
        return out;
      });

  m.def(
      "audit", [](const std::filesystem::path& target, std::optional<std::filesystem::path> config) {
        return audit_dict(audit_path(target, config));
      },
      py::arg("target"), py::arg("config") = py::none(),
      "Audits a run directory, or one chain file against a config.");

  m.def(
      "tamper",
      [](const std::filesystem::path& run_dir, std::size_t mutations, std::uint64_t seed) {
        TamperStats stats;
        {
          py::gil_scoped_release release;
          RunAuditor auditor(run_dir);
          stats = tamper_experiment(auditor, mutations, seed);
        }
        py::dict d;
        d["mutations"] = stats.mutations.size();
        d["detected"] = stats.detected();
        d["rate"] = stats.rate();
        return d;
      },
      py::arg("run_dir"), py::arg("mutations") = 1000, py::arg("seed") = 42);
}
