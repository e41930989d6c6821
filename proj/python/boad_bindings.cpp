// Python bindings: structured values cross the boundary as JSON text.
#include <fstream>
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "boad/agent_factory.hpp"
#include "boad/archive.hpp"
#include "boad/bandit.hpp"
#include "boad/credit.hpp"
#include "boad/error.hpp"
#include "boad/llm.hpp"
#include "boad/runner.hpp"
#include "boad/simenv.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

std::string run_optimize_py(const std::string& config_json, const std::string& events_path,
                            std::optional<std::uint64_t> stop_after_round) {
    const auto config = boad::config_from_json(json::parse(config_json));
    std::ofstream out(events_path, std::ios::binary | std::ios::trunc);
    boad::RunControl control;
    control.stop_after_round = stop_after_round;
    boad::RunResult r;
    {
        py::gil_scoped_release release;
        r = boad::run_optimize(config, out, control);
    }
    return boad::snapshot(r.archive);
}

std::string resume_py(const std::string& events_path) {
    boad::RunResult r;
    {
        py::gil_scoped_release release;
        r = boad::resume(events_path);
    }
    return boad::snapshot(r.archive);
}

std::map<std::string, std::uint64_t> simulate_bandit_py(const std::string& world_json, const std::string& policy,
                                                        std::uint64_t rounds, std::uint64_t k, std::uint64_t seed) {
    const auto world =
        world_json.empty() ? boad::sim::calibrated_world() : json::parse(world_json).get<boad::sim::WorldModel>();
    boad::BanditSimOptions o;
    o.rounds = rounds;
    o.k = k;
    o.seed = seed;
    o.policy = boad::sim_policy_from_string(policy);
    py::gil_scoped_release release;
    return boad::simulate_bandit(world, o).selection_counts;
}

}  // namespace

PYBIND11_MODULE(_boad, m) {
    m.doc() = "Bandit optimization of sub-agent teams";

    auto base = py::register_exception<boad::Error>(m, "BoadError");
    py::register_exception<boad::ContractError>(m, "ContractError", base.ptr());
    py::register_exception<boad::ParseError>(m, "ParseError", base.ptr());
    py::register_exception<boad::SchemaError>(m, "SchemaError", base.ptr());
    py::register_exception<boad::LogError>(m, "LogError", base.ptr());

    m.def("ucb_score", &boad::ucb_score, py::arg("mean"), py::arg("n"), py::arg("t"));
    m.def(
        "select_top_k",
        [](const std::vector<std::tuple<std::string, std::uint64_t, double, std::uint64_t>>& arms, std::uint64_t t,
           std::uint64_t k) {
            std::vector<boad::ArmStats> stats;
            for (const auto& [id, n, sum, created] : arms) stats.push_back({id, n, sum, 0.0, created});
            return boad::select_top_k(stats, t, k).chosen;
        },
        py::arg("arms"), py::arg("t"), py::arg("k"),
        "arms: (arm_id, n, label_sum, created_round) tuples; returns the chosen ids.");
    m.def("crp_expansion_decision", &boad::crp_expansion_decision, py::arg("theta"), py::arg("archive_size"),
          py::arg("draw"));
    m.def("simulate_crp_growth", &boad::simulate_crp_growth, py::arg("theta"), py::arg("initial_size"),
          py::arg("rounds"), py::arg("seed"));

    m.def(
        "rank_arms",
        [](const std::string& snapshot, const std::string& metric, std::size_t k) {
            return boad::rank_arms(boad::restore(snapshot), boad::rank_metric_from_string(metric), k);
        },
        py::arg("snapshot"), py::arg("metric"), py::arg("k"));
    m.def(
        "export_top_k",
        [](const std::string& snapshot, std::size_t k, const std::string& metric) {
            return boad::export_top_k(boad::restore(snapshot), k, boad::rank_metric_from_string(metric), false)
                .dump();
        },
        py::arg("snapshot"), py::arg("k"), py::arg("metric") = "helpfulness");

    m.def("template_ids", [] {
        std::vector<std::string> ids;
        for (auto id : boad::llm::template_ids()) ids.emplace_back(id);
        return ids;
    });
    m.def(
        "render_template",
        [](const std::string& id, const std::map<std::string, std::string>& bindings) {
            return boad::llm::render_template(id, bindings);
        },
        py::arg("template_id"), py::arg("bindings"));
    m.def("parse_judge_response", [](const std::string& text) {
        const auto v = boad::parse_judge_response(text);
        return py::make_tuple(v.helpful, v.reasoning);
    });
    m.def("parse_tool_document", [](const std::string& text) {
        const auto d = boad::parse_tool_document(text);
        return std::map<std::string, std::string>{{"name", d.name},
                                                  {"signature", d.signature},
                                                  {"docstring", d.docstring},
                                                  {"context_description", d.context_description}};
    });
    m.def("parse_updates", [](const std::string& text) {
        const auto u = boad::parse_updates(text);
        std::map<std::string, std::string> out;
        if (u.docstring) out["docstring"] = *u.docstring;
        if (u.context_description) out["context_description"] = *u.context_description;
        if (u.instance_template) out["instance_template"] = *u.instance_template;
        return out;
    });

    m.def("calibrated_world", [] { return json(boad::sim::calibrated_world()).dump(); });
    m.def("free_rider_world", [] { return json(boad::sim::free_rider_world()).dump(); });
    m.def(
        "expected_team_success",
        [](const std::string& world_json, const std::vector<std::string>& subset) {
            return boad::sim::expected_team_success(json::parse(world_json).get<boad::sim::WorldModel>(), subset);
        },
        py::arg("world"), py::arg("subset"));
    m.def("simulate_bandit", &simulate_bandit_py, py::arg("world") = "", py::arg("policy") = "ucb",
          py::arg("rounds") = 2000, py::arg("k") = 3, py::arg("seed") = 0);

    m.def("run_optimize", &run_optimize_py, py::arg("config"), py::arg("events_path"),
          py::arg("stop_after_round") = std::nullopt, "Returns the final archive snapshot (JSON text).");
    m.def("resume", &resume_py, py::arg("events_path"));
}
