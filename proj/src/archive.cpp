#include "boad/archive.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "boad/error.hpp"
#include "boad/rng.hpp"

namespace boad {

using nlohmann::json;

std::string_view to_string(Origin o) {
    switch (o) {
        case Origin::bootstrap: return "bootstrap";
        case Origin::crp_generated: return "crp_generated";
        case Origin::fixture: return "fixture";
    }
    return "?";
}

Origin origin_from_string(std::string_view s) {
    if (s == "bootstrap") return Origin::bootstrap;
    if (s == "crp_generated") return Origin::crp_generated;
    if (s == "fixture") return Origin::fixture;
    throw SchemaError("unknown arm origin: " + std::string(s));
}

RankMetric rank_metric_from_string(std::string_view s) {
    if (s == "helpfulness_mean" || s == "helpfulness") return RankMetric::helpfulness_mean;
    if (s == "success_rate_mean" || s == "success_rate" || s == "success-rate")
        return RankMetric::success_rate_mean;
    throw ContractError("unknown ranking metric: " + std::string(s));
}

std::string_view to_string(RankMetric m) {
    return m == RankMetric::helpfulness_mean ? "helpfulness_mean" : "success_rate_mean";
}

void SubAgentSpec::validate() const {
    if (arm_id.empty()) throw ContractError("sub-agent spec: empty arm_id");
    if (name.empty()) throw ContractError("sub-agent spec: empty name");
    for (char c : name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
            throw ContractError("sub-agent spec: name '" + name + "' is not a tool token");
    }
    if (!docstring.starts_with(kSubagentDocPrefix))
        throw ContractError("sub-agent spec '" + name + "': docstring must begin with [subagent]");
    if (instance_template.find(kContextPlaceholder) == std::string::npos)
        throw ContractError("sub-agent spec '" + name +
                            "': instance_template lacks the {{context}} placeholder");
}

std::string SubAgentSpec::render_instance(std::string_view context) const {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto hit = instance_template.find(kContextPlaceholder, pos);
        if (hit == std::string::npos) break;
        out.append(instance_template, pos, hit - pos);
        out.append(context);
        pos = hit + kContextPlaceholder.size();
    }
    out.append(instance_template, pos);
    return out;
}

Archive::Archive(double theta, std::uint64_t round_cursor) : theta_(theta), round_cursor_(round_cursor) {
    if (!(theta > 0.0)) throw ContractError("archive: theta must be positive");
}

void Archive::set_round_cursor(std::uint64_t r) { round_cursor_ = r; }

const SubAgentSpec& Archive::arm(const ArmId& id) const {
    auto it = std::find_if(arms_.begin(), arms_.end(), [&](const auto& a) { return a.arm_id == id; });
    if (it == arms_.end()) throw ContractError("archive: unknown arm " + id);
    return *it;
}

const ArmStats& Archive::stats(const ArmId& id) const {
    auto it = stats_.find(id);
    if (it == stats_.end()) throw ContractError("archive: unknown arm " + id);
    return it->second;
}

std::vector<ArmStats> Archive::stats_in_order() const {
    std::vector<ArmStats> out;
    out.reserve(arms_.size());
    for (const auto& a : arms_) out.push_back(stats_.at(a.arm_id));
    return out;
}

void Archive::add_arm(SubAgentSpec spec) {
    spec.validate();
    if (stats_.contains(spec.arm_id)) throw ContractError("archive: duplicate arm id " + spec.arm_id);
    spec.created_round = round_cursor_;
    ArmStats s;
    s.arm_id = spec.arm_id;
    s.created_round = round_cursor_;
    stats_.emplace(spec.arm_id, std::move(s));
    arms_.push_back(std::move(spec));
}

void Archive::update_stats(const ArmStats& s) {
    auto it = stats_.find(s.arm_id);
    if (it == stats_.end()) throw ContractError("archive: unknown arm " + s.arm_id);
    if (s.created_round != it->second.created_round)
        throw ContractError("archive: created_round of " + s.arm_id + " cannot change");
    it->second = s;
}

bool crp_expansion_decision(double theta, std::uint64_t archive_size, double draw) {
    if (!(theta > 0.0)) throw ContractError("crp_expansion_decision: theta must be positive");
    return draw < theta / (theta + static_cast<double>(archive_size));
}

Archive add_arm(Archive archive, SubAgentSpec spec) {
    archive.add_arm(std::move(spec));
    return archive;
}

std::vector<ArmId> rank_arms(const Archive& archive, RankMetric metric, std::size_t k) {
    struct Row {
        ArmId id;
        double value;
        std::uint64_t n;
    };
    std::vector<Row> rows;
    for (const auto& s : archive.stats_in_order()) {
        if (s.sample_count == 0) continue;
        const double v = metric == RankMetric::helpfulness_mean ? *s.mean() : *s.success_mean();
        rows.push_back({s.arm_id, v, s.sample_count});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.value != b.value) return a.value > b.value;
        if (a.n != b.n) return a.n > b.n;
        return a.id < b.id;
    });
    std::vector<ArmId> out;
    for (std::size_t i = 0; i < rows.size() && i < k; ++i) out.push_back(rows[i].id);
    return out;
}

void to_json(json& j, const SubAgentSpec& s) {
    j = {{"arm_id", s.arm_id},
         {"name", s.name},
         {"docstring", s.docstring},
         {"context_description", s.context_description},
         {"instance_template", s.instance_template},
         {"system_template", s.system_template},
         {"created_round", s.created_round},
         {"origin", to_string(s.origin)}};
}

namespace {

void require_exact_keys(const json& j, const std::set<std::string>& keys, const std::string& where) {
    if (!j.is_object()) throw SchemaError(where + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        if (!keys.contains(k)) throw SchemaError(where + ": unknown field '" + k + "'");
    }
    for (const auto& k : keys) {
        if (!j.contains(k)) throw SchemaError(where + ": missing field '" + k + "'");
    }
}

}  // namespace

void from_json(const json& j, SubAgentSpec& s) {
    require_exact_keys(j,
                       {"arm_id", "name", "docstring", "context_description", "instance_template",
                        "system_template", "created_round", "origin"},
                       "arm");
    s.arm_id = j.at("arm_id").get<std::string>();
    s.name = j.at("name").get<std::string>();
    s.docstring = j.at("docstring").get<std::string>();
    s.context_description = j.at("context_description").get<std::string>();
    s.instance_template = j.at("instance_template").get<std::string>();
    s.system_template = j.at("system_template").get<std::string>();
    s.created_round = j.at("created_round").get<std::uint64_t>();
    s.origin = origin_from_string(j.at("origin").get<std::string>());
}

std::string snapshot(const Archive& archive) {
    json arms = json::array();
    for (const auto& a : archive.arms()) arms.push_back(a);
    json stats = json::array();
    for (const auto& s : archive.stats_in_order()) {
        stats.push_back({{"arm_id", s.arm_id},
                         {"sample_count", s.sample_count},
                         {"label_sum", s.label_sum},
                         {"success_sum", s.success_sum}});
    }
    json doc = {{"version", 1},
                {"theta", archive.theta()},
                {"round_cursor", archive.round_cursor()},
                {"arms", arms},
                {"stats", stats}};
    return doc.dump(2) + "\n";
}

Archive restore(std::string_view bytes) {
    json doc;
    try {
        doc = json::parse(bytes);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("archive snapshot: unreadable document (") + e.what() + ")");
    }
    try {
        if (!doc.is_object() || !doc.contains("version"))
            throw SchemaError("archive snapshot: missing version");
        if (doc.at("version") != 1)
            throw SchemaError("archive snapshot: unsupported version " + doc.at("version").dump());
        require_exact_keys(doc, {"version", "theta", "round_cursor", "arms", "stats"}, "archive snapshot");

        Archive archive(doc.at("theta").get<double>(), 0);
        std::map<ArmId, ArmStats> stats;
        for (const auto& sj : doc.at("stats")) {
            require_exact_keys(sj, {"arm_id", "sample_count", "label_sum", "success_sum"}, "stats entry");
            ArmStats s;
            s.arm_id = sj.at("arm_id").get<std::string>();
            s.sample_count = sj.at("sample_count").get<std::uint64_t>();
            s.label_sum = sj.at("label_sum").get<double>();
            s.success_sum = sj.at("success_sum").get<double>();
            const auto n = static_cast<double>(s.sample_count);
            if (s.label_sum < 0 || s.label_sum > n || s.success_sum < 0 || s.success_sum > n)
                throw SchemaError("stats entry " + s.arm_id + ": sums out of range");
            if (!stats.emplace(s.arm_id, s).second)
                throw SchemaError("archive snapshot: duplicate stats for " + s.arm_id);
        }
        for (const auto& aj : doc.at("arms")) {
            auto spec = aj.get<SubAgentSpec>();
            archive.set_round_cursor(spec.created_round);
            archive.add_arm(spec);
            auto it = stats.find(spec.arm_id);
            if (it == stats.end()) throw SchemaError("archive snapshot: no stats for " + spec.arm_id);
            it->second.created_round = spec.created_round;
            archive.update_stats(it->second);
        }
        if (stats.size() != archive.size())
            throw SchemaError("archive snapshot: stats reference unknown arms");
        archive.set_round_cursor(doc.at("round_cursor").get<std::uint64_t>());
        return archive;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("archive snapshot: ") + e.what());
    } catch (const ContractError& e) {
        throw SchemaError(std::string("archive snapshot: ") + e.what());
    }
}

std::uint64_t simulate_crp_growth(double theta, std::uint64_t initial_size, std::uint64_t rounds,
                                  std::uint64_t seed) {
    std::uint64_t size = initial_size;
    for (std::uint64_t t = 1; t <= rounds; ++t) {
        Rng rng(seed, t, "expansion");
        if (crp_expansion_decision(theta, size, rng.uniform())) ++size;
    }
    return size - initial_size;
}

}  // namespace boad
