#pragma once
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "boad/archive.hpp"

namespace testing {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(BOAD_FIXTURES_DIR) / name; }

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("boad_unit_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline boad::SubAgentSpec spec(const std::string& id, std::uint64_t created = 0) {
    boad::SubAgentSpec s;
    s.arm_id = id;
    s.name = id;
    s.docstring = "[subagent] Does the " + id + " step.";
    s.context_description = "What to work on.";
    s.instance_template = "Task:\n{{context}}";
    s.system_template = "You are " + id + ".";
    s.created_round = created;
    s.origin = boad::Origin::fixture;
    return s;
}

inline boad::ArmStats stats(const std::string& id, std::uint64_t n, double sum, std::uint64_t created = 0) {
    boad::ArmStats s;
    s.arm_id = id;
    s.sample_count = n;
    s.label_sum = sum;
    s.created_round = created;
    return s;
}

}  // namespace testing
