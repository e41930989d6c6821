#include "boad/llm.hpp"

#include <cstdlib>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "boad/error.hpp"

namespace boad::llm {

using nlohmann::json;

std::string_view to_string(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "?";
}

void ChatExchange::validate() const {
    if (messages.empty()) throw ContractError("chat exchange: no messages");
    if (messages.front().role == Role::assistant)
        throw ContractError("chat exchange: first message must be system or user");
    if (temperature < 0.0) throw ContractError("chat exchange: negative temperature");
    if (max_output && *max_output == 0) throw ContractError("chat exchange: max_output must be positive");
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
    return os.str();
}

std::string prompt_hash(const ChatExchange& exchange) {
    std::string canon;
    for (const auto& m : exchange.messages) {
        canon.append(to_string(m.role));
        canon.push_back('\0');
        canon.append(m.content);
        canon.push_back('\0');
    }
    return sha256_hex(canon);
}

// ---- HTTP provider ----------------------------------------------------------

ProviderConfig ProviderConfig::from_environment() {
    ProviderConfig c;
    if (const char* base = std::getenv("BOAD_API_BASE"); base && *base) c.base_url = base;
    return c;
}

HttpChatProvider::HttpChatProvider(ProviderConfig config) : config_(std::move(config)) {}

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ContractError("provider base_url lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

}  // namespace

std::string HttpChatProvider::send(const ChatExchange& exchange) {
    exchange.validate();
    const auto url = split_url(config_.base_url);
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    json body;
    body["model"] = exchange.model_name.empty() ? config_.model : exchange.model_name;
    body["temperature"] = exchange.temperature;
    body["messages"] = json::array();
    for (const auto& m : exchange.messages)
        body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    if (exchange.max_output) body["max_tokens"] = *exchange.max_output;

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.credential_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    auto res = client.Post(url.path + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw TransportError("chat completion request failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) throw ProtocolError(res->status, res->body);
    try {
        const auto reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(res->status, "malformed completion body: " + res->body);
    }
}

// ---- mock provider ----------------------------------------------------------

void MockChatProvider::on_hash(std::string hash, std::string response) {
    std::lock_guard lock(mu_);
    by_hash_[std::move(hash)] = std::move(response);
}

void MockChatProvider::on_exchange(const ChatExchange& exchange, std::string response) {
    on_hash(prompt_hash(exchange), std::move(response));
}

void MockChatProvider::on_template(std::string template_id, Responder responder) {
    std::lock_guard lock(mu_);
    responders_[std::move(template_id)] = std::move(responder);
}

void MockChatProvider::queue(std::string template_id, std::vector<std::string> responses) {
    std::lock_guard lock(mu_);
    auto& seq = sequences_[template_id];
    seq.insert(seq.end(), std::make_move_iterator(responses.begin()), std::make_move_iterator(responses.end()));
}

std::size_t MockChatProvider::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::string MockChatProvider::send(const ChatExchange& exchange) {
    exchange.validate();
    Responder responder;
    {
        std::lock_guard lock(mu_);
        ++calls_;
        if (auto it = by_hash_.find(prompt_hash(exchange)); it != by_hash_.end()) return it->second;
        if (auto it = responders_.find(exchange.template_id); it != responders_.end()) {
            responder = it->second;
        } else if (auto sit = sequences_.find(exchange.template_id); sit != sequences_.end()) {
            auto& cursor = cursors_[exchange.template_id];
            if (cursor < sit->second.size()) return sit->second[cursor++];
        }
    }
    if (responder) return responder(exchange);
    throw Error("mock provider: no response registered for template '" + exchange.template_id +
                "' (prompt " + prompt_hash(exchange).substr(0, 12) + ")");
}

// ---- call log ---------------------------------------------------------------

void CallLog::append(const std::string& line) {
    std::lock_guard lock(mu_);
    ++records_;
    if (out_) {
        *out_ << line << '\n';
        out_->flush();
    }
}

std::size_t CallLog::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

// ---- gateway ----------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<ChatProvider> provider, GatewayOptions options, CallLog* log)
    : provider_(std::move(provider)), options_(std::move(options)), log_(log) {
    if (!provider_) throw ContractError("gateway: null provider");
}

namespace {

bool transient(const ProtocolError& e) { return e.status() == 429 || e.status() >= 500; }

}  // namespace

std::string Gateway::complete(ChatExchange exchange) {
    if (exchange.model_name.empty()) exchange.model_name = options_.default_model;
    exchange.validate();

    if (options_.max_in_flight > 0) {
        std::unique_lock lock(slots_mu_);
        slots_cv_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
        ++in_flight_;
    }
    struct SlotRelease {
        Gateway* g;
        ~SlotRelease() {
            if (g->options_.max_in_flight == 0) return;
            {
                std::lock_guard lock(g->slots_mu_);
                --g->in_flight_;
            }
            g->slots_cv_.notify_one();
        }
    } release{this};

    const auto budget = std::max<std::uint32_t>(1, options_.retry_budget);
    const auto started = std::chrono::steady_clock::now();
    auto backoff = options_.backoff;
    auto record = [&](std::uint32_t attempts, const std::string* response, const std::string& error) {
        if (!log_) return;
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
        json line = {{"template_id", exchange.template_id},
                     {"model", exchange.model_name},
                     {"prompt_hash", prompt_hash(exchange)},
                     {"attempts", attempts},
                     {"latency_ms", ms}};
        if (response) line["response_hash"] = sha256_hex(*response);
        if (!error.empty()) line["error"] = error;
        log_->append(line.dump());
    };

    for (std::uint32_t attempt = 1;; ++attempt) {
        try {
            auto text = provider_->send(exchange);
            record(attempt, &text, "");
            return text;
        } catch (const TransportError& e) {
            if (attempt >= budget) {
                record(attempt, nullptr, e.what());
                throw TransportError(std::string(e.what()) + " after " + std::to_string(attempt) + " attempts");
            }
        } catch (const ProtocolError& e) {
            if (!transient(e) || attempt >= budget) {
                record(attempt, nullptr, e.what());
                throw;
            }
        }
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
}

std::string Gateway::complete_prompt(std::string template_id, std::string prompt) {
    ChatExchange ex;
    ex.messages.push_back({Role::user, std::move(prompt)});
    ex.template_id = std::move(template_id);
    return complete(std::move(ex));
}

// ---- fenced blocks ----------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

std::vector<FencedBlock> fenced_blocks(std::string_view text) {
    std::vector<FencedBlock> out;
    std::optional<std::string> info;
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = text.substr(pos, nl - pos);
        const auto t = trim(line);
        if (t.starts_with("```")) {
            if (!info) {
                info = std::string(trim(t.substr(3)));
                lines.clear();
            } else if (trim(t.substr(3)).empty()) {
                FencedBlock block{std::move(*info), {}};
                for (std::size_t i = 0; i < lines.size(); ++i) {
                    if (i) block.body.push_back('\n');
                    block.body.append(lines[i]);
                }
                out.push_back(std::move(block));
                info.reset();
            } else {
                throw ParseError("nested code fence");
            }
        } else if (info) {
            lines.push_back(line);
        }
        pos = nl + 1;
    }
    if (info) throw ParseError("unterminated code fence");
    return out;
}

}  // namespace boad::llm
