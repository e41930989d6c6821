#include <algorithm>
#include <map>

#include "boad/error.hpp"
#include "boad/llm.hpp"

namespace boad::llm {

namespace detail {
const std::map<std::string_view, std::string_view>& embedded_templates();
}

namespace {

// Only the names listed here are substituted. The sub-agent template prompt
// carries {{command_docs}}, {{problem_statement}} and {{context}} as literal
// text for the downstream scaffold, and the generation prompt's feedback slot
// keeps its historical spelling.
const std::vector<TemplateAsset>& assets() {
    static const std::vector<TemplateAsset> table = [] {
        const auto& text = detail::embedded_templates();
        auto get = [&](std::string_view id) {
            auto it = text.find(id);
            if (it == text.end()) throw Error("template asset missing from build: " + std::string(id));
            return it->second;
        };
        return std::vector<TemplateAsset>{
            {"warmup_refine_v1", get("warmup_refine_v1"), {"TRAJECTORIES"}},
            {"subagent_gen_v1", get("subagent_gen_v1"), {"PREVIOUS_ITERATION_FEEBACK"}},
            {"subagent_templates_v1", get("subagent_templates_v1"), {"PREVIOUS_ITERATION_FEEDBACK"}},
            {"orchestrator_plan_v1", get("orchestrator_plan_v1"), {"subagents_overview"}},
            {"helpful_judge_v1", get("helpful_judge_v1"), {"TRAJECTORIES", "TOOL_NAME"}},
        };
    }();
    return table;
}

}  // namespace

const TemplateAsset& template_asset(std::string_view id) {
    const auto& all = assets();
    auto it = std::find_if(all.begin(), all.end(), [&](const TemplateAsset& a) { return a.id == id; });
    if (it == all.end()) throw ContractError("unknown template asset: " + std::string(id));
    return *it;
}

std::vector<std::string_view> template_ids() {
    std::vector<std::string_view> out;
    for (const auto& a : assets()) out.push_back(a.id);
    return out;
}

std::string render_text(std::string_view text, const std::vector<std::string_view>& placeholders,
                        const std::map<std::string, std::string>& bindings) {
    for (const auto& name : placeholders) {
        if (!bindings.contains(std::string(name)))
            throw ContractError("template binding missing for placeholder {{" + std::string(name) + "}}");
    }
    for (const auto& [name, value] : bindings) {
        if (std::find(placeholders.begin(), placeholders.end(), name) == placeholders.end())
            throw ContractError("template binding '" + name + "' has no placeholder");
    }

    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto open = text.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        const auto name = text.substr(open + 2, close - open - 2);
        out.append(text.substr(pos, open - pos));
        if (std::find(placeholders.begin(), placeholders.end(), name) != placeholders.end()) {
            out.append(bindings.at(std::string(name)));
            pos = close + 2;
        } else {
            out.append("{{");
            pos = open + 2;
        }
    }
    out.append(text.substr(pos));
    return out;
}

std::string render_template(std::string_view id, const std::map<std::string, std::string>& bindings) {
    const auto& asset = template_asset(id);
    return render_text(asset.text, asset.placeholders, bindings);
}

}  // namespace boad::llm
