#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace boad::llm {

enum class Role { system, user, assistant };

std::string_view to_string(Role r);

struct ChatMessage {
    Role role = Role::user;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatExchange {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    std::string model_name;
    std::optional<std::uint32_t> max_output;
    // Template asset the first prompt was rendered from; lets the mock provider
    // route by purpose. Not sent over the wire.
    std::string template_id;

    void validate() const;
};

/// Canonical content hash (sha256 hex) of an exchange's messages.
std::string prompt_hash(const ChatExchange& exchange);
std::string sha256_hex(std::string_view data);

/// A single attempt at a chat completion. Throws TransportError or ProtocolError.
class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string send(const ChatExchange& exchange) = 0;
};

struct ProviderConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string credential_env = "BOAD_API_KEY";  // name of the variable, never its value
    std::string model = "gpt-4o";
    std::chrono::milliseconds timeout{120'000};
    std::uint32_t retry_budget = 3;  // maximum attempts per completion
    std::chrono::milliseconds backoff{500};

    /// Reads BOAD_API_BASE when set.
    static ProviderConfig from_environment();
};

/// OpenAI-compatible chat-completions endpoint over HTTP(S).
class HttpChatProvider final : public ChatProvider {
public:
    explicit HttpChatProvider(ProviderConfig config);
    std::string send(const ChatExchange& exchange) override;

    const ProviderConfig& config() const noexcept { return config_; }

private:
    ProviderConfig config_;
};

/// Offline provider. Resolution order: exact prompt-hash table, then a
/// responder registered for the exchange's template id, then a queued
/// sequence for that template id. Anything else is an error.
class MockChatProvider final : public ChatProvider {
public:
    using Responder = std::function<std::string(const ChatExchange&)>;

    void on_hash(std::string hash, std::string response);
    void on_exchange(const ChatExchange& exchange, std::string response);
    void on_template(std::string template_id, Responder responder);
    void queue(std::string template_id, std::vector<std::string> responses);

    std::string send(const ChatExchange& exchange) override;

    std::size_t calls() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> by_hash_;
    std::map<std::string, Responder> responders_;
    std::map<std::string, std::vector<std::string>> sequences_;
    std::map<std::string, std::size_t> cursors_;
    std::size_t calls_ = 0;
};

/// Serialized JSON-lines sink for per-call records: template id, prompt hash,
/// response hash, attempts and latency. Never sees credentials.
class CallLog {
public:
    explicit CallLog(std::ostream* out = nullptr) : out_(out) {}
    void append(const std::string& line);
    std::size_t records() const;

private:
    mutable std::mutex mu_;
    std::ostream* out_;
    std::size_t records_ = 0;
};

struct GatewayOptions {
    std::uint32_t retry_budget = 3;
    std::chrono::milliseconds backoff{500};
    std::uint32_t max_in_flight = 0;  // 0 = unlimited
    std::string default_model;
};

/// The entry point used by generation, planning, judging and the scaffold.
class Gateway {
public:
    Gateway(std::shared_ptr<ChatProvider> provider, GatewayOptions options = {}, CallLog* log = nullptr);

    /// Returns the assistant text. Transport failures are retried with
    /// exponential backoff up to `retry_budget` attempts in total; protocol
    /// errors with 429 or 5xx status count as transient too.
    std::string complete(ChatExchange exchange);

    /// Convenience: one user message rendered from a template asset.
    std::string complete_prompt(std::string template_id, std::string prompt);

private:
    std::shared_ptr<ChatProvider> provider_;
    GatewayOptions options_;
    CallLog* log_;
    std::mutex slots_mu_;
    std::condition_variable slots_cv_;
    std::uint32_t in_flight_ = 0;
};

// ---- prompt templates -------------------------------------------------------

struct TemplateAsset {
    std::string_view id;
    std::string_view text;
    std::vector<std::string_view> placeholders;  // substituted names; other braces are literal
};

const TemplateAsset& template_asset(std::string_view id);
std::vector<std::string_view> template_ids();

/// Single-pass literal substitution of the asset's declared {{NAME}}
/// placeholders. Missing or extra bindings throw ContractError.
std::string render_template(std::string_view id, const std::map<std::string, std::string>& bindings);

std::string render_text(std::string_view text, const std::vector<std::string_view>& placeholders,
                        const std::map<std::string, std::string>& bindings);

// ---- structured-output helpers ----------------------------------------------

struct FencedBlock {
    std::string info;  // language tag after the opening fence, e.g. "yaml"
    std::string body;
};

/// All ``` fenced blocks, in order. An unterminated fence throws ParseError.
std::vector<FencedBlock> fenced_blocks(std::string_view text);

}  // namespace boad::llm
