#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mirage/error.hpp"

namespace mirage {

struct SamplingParams {
    double temperature = 0.0;
    double top_p = 1.0;
    bool operator==(const SamplingParams&) const = default;
};

struct ChatClientConfig {
    std::string endpoint;
    std::string model;
    SamplingParams defaults{};
    int max_retries = 3;
    double timeout_s = 60.0;
    /// Sampling parameters for the 1st, 2nd, ... consecutive failure; the last
    /// rung is reused once the ladder runs out.
    std::vector<SamplingParams> escalation{{0.3, 0.95}, {0.6, 0.97}, {0.9, 1.0}};
    int max_tokens = 1024;
    /// Name of the environment variable holding the bearer token. The token
    /// itself is never stored or logged.
    std::string token_env = "MIRAGE_API_TOKEN";

    void validate() const;
    SamplingParams params_after_failures(int failures) const;
};

struct ChatMessage {
    std::string role;
    std::string text;
    std::vector<std::string> images_png_base64;
};

/// One chat-completions call. `purpose` and `payload` never go on the wire;
/// they let offline responders answer without parsing prompt prose.
struct ChatRequest {
    std::string purpose;
    std::vector<ChatMessage> messages;
    SamplingParams params{};
    int max_tokens = 1024;
    nlohmann::json payload = nlohmann::json::object();
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    /// Returns the assistant text. Transport failures throw a service error.
    virtual std::string complete(const ChatRequest& request) = 0;
};

/// Chat-completions request body (model, messages, temperature, top_p, max_tokens).
nlohmann::json build_chat_body(const ChatRequest& request, const std::string& model);
/// Extracts choices[0].message.content; throws a service error otherwise.
std::string parse_chat_response(const std::string& body);

class HttpChatClient final : public ChatClient {
public:
    explicit HttpChatClient(ChatClientConfig config);
    std::string complete(const ChatRequest& request) override;

private:
    ChatClientConfig config_;
};

/// Replays canned replies in order. With `cycle`, wraps around instead of
/// failing when the script runs out. Records every request it sees.
class ScriptedChatClient final : public ChatClient {
public:
    explicit ScriptedChatClient(std::vector<std::string> replies, bool cycle = false);

    /// Transcript file: {"replies": [...], "cycle": bool} or a bare array.
    static std::unique_ptr<ScriptedChatClient> from_file(const std::filesystem::path& path);

    std::string complete(const ChatRequest& request) override;

    std::vector<ChatRequest> requests() const;
    std::size_t calls() const;

private:
    std::vector<std::string> replies_;
    bool cycle_;
    std::size_t next_ = 0;
    std::vector<ChatRequest> seen_;
    mutable std::mutex mutex_;
};

/// Deterministic offline responder. Answers each purpose from the request
/// payload: decomposition through the stub grammar, grounding through the
/// synthetic-scene localizer, benchmark stages from fixed vocabularies.
class EchoChatClient final : public ChatClient {
public:
    std::string complete(const ChatRequest& request) override;
    std::size_t calls() const;

private:
    std::size_t calls_ = 0;
    std::size_t pair_cursor_ = 0;
    mutable std::mutex mutex_;
};

/// Raised by validators when a reply violates the expected schema.
class SchemaViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses a reply as JSON, tolerating a surrounding markdown code fence.
nlohmann::json parse_reply_json(std::string_view reply);

template <class T>
struct Structured {
    T value;
    int retries = 0;
    std::vector<std::string> raw_outputs;
    std::vector<SamplingParams> params_used;
};

/// Sends the request and validates the reply. On a schema violation the
/// conversation is extended with the bad reply and a repair prompt quoting
/// the schema and the first validator error, and re-sent with escalated
/// sampling parameters. At most 1 + max_retries calls are made; exhausting
/// them throws ClientError carrying the last raw reply.
template <class T>
Structured<T> request_structured(ChatClient& client, const ChatClientConfig& config, ChatRequest request,
                                 std::string_view schema,
                                 const std::function<T(const nlohmann::json&)>& validate);

std::string render_repair_prompt(std::string_view schema, std::string_view error);

}  // namespace mirage

#include "mirage/chat_impl.hpp"
