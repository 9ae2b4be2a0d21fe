#include "mirage/chat.hpp"

#include <cstdlib>
#include <fstream>

#include "http_util.hpp"
#include "mirage/prompts.hpp"
#include "strings.hpp"

namespace mirage {

void ChatClientConfig::validate() const {
    auto check = [](const SamplingParams& p, const std::string& what) {
        if (!(p.temperature >= 0.0 && p.temperature <= 2.0)) {
            throw Error(ErrorKind::validation, what + " temperature must be in [0, 2]");
        }
        if (!(p.top_p > 0.0 && p.top_p <= 1.0)) throw Error(ErrorKind::validation, what + " top_p must be in (0, 1]");
    };
    check(defaults, "default");
    for (const auto& rung : escalation) check(rung, "escalation");
    if (max_retries < 0) throw Error(ErrorKind::validation, "max_retries must be >= 0");
    if (escalation.size() > static_cast<std::size_t>(max_retries)) {
        throw Error(ErrorKind::validation, "escalation ladder has " + std::to_string(escalation.size()) +
                                               " rungs but max_retries is " + std::to_string(max_retries));
    }
    if (!(timeout_s > 0.0)) throw Error(ErrorKind::validation, "timeout must be positive");
    if (max_tokens <= 0) throw Error(ErrorKind::validation, "max_tokens must be positive");
}

SamplingParams ChatClientConfig::params_after_failures(int failures) const {
    if (failures <= 0 || escalation.empty()) return defaults;
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(failures), escalation.size()) - 1;
    return escalation[idx];
}

nlohmann::json build_chat_body(const ChatRequest& request, const std::string& model) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : request.messages) {
        if (m.images_png_base64.empty()) {
            messages.push_back({{"role", m.role}, {"content", m.text}});
            continue;
        }
        nlohmann::json parts = nlohmann::json::array();
        parts.push_back({{"type", "text"}, {"text", m.text}});
        for (const auto& img : m.images_png_base64) {
            parts.push_back({{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + img}}}});
        }
        messages.push_back({{"role", m.role}, {"content", parts}});
    }
    return {{"model", model},
            {"messages", messages},
            {"temperature", request.params.temperature},
            {"top_p", request.params.top_p},
            {"max_tokens", request.max_tokens}};
}

std::string parse_chat_response(const std::string& body) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::service, std::string("chat response is not JSON: ") + e.what());
    }
    try {
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        if (content.is_string()) return content.get<std::string>();
        if (content.is_array()) {
            std::string out;
            for (const auto& part : content) {
                if (part.value("type", "") == "text") out += part.value("text", "");
            }
            return out;
        }
    } catch (const nlohmann::json::exception&) {
    }
    throw Error(ErrorKind::service, "chat response has no choices[0].message.content");
}

HttpChatClient::HttpChatClient(ChatClientConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.endpoint.empty()) throw Error(ErrorKind::validation, "chat endpoint is empty");
}

std::string HttpChatClient::complete(const ChatRequest& request) {
    auto url = http::split_url(config_.endpoint);
    if (url.path.empty()) url.path = "/v1/chat/completions";
    auto client = http::make_client(url, config_.timeout_s);
    httplib::Headers headers;
    if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    const auto body = build_chat_body(request, config_.model).dump();
    auto res = client->Post(url.path, headers, body, "application/json");
    if (!res) {
        throw Error(ErrorKind::service, request.purpose + ": chat endpoint unreachable (" + httplib::to_string(res.error()) + ")");
    }
    if (res->status != 200) {
        throw Error(ErrorKind::service, request.purpose + ": chat endpoint returned HTTP " + std::to_string(res->status));
    }
    return parse_chat_response(res->body);
}

ScriptedChatClient::ScriptedChatClient(std::vector<std::string> replies, bool cycle)
    : replies_(std::move(replies)), cycle_(cycle) {}

std::unique_ptr<ScriptedChatClient> ScriptedChatClient::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::validation, "cannot open transcript " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::validation, "transcript " + path.string() + " is not JSON: " + e.what());
    }
    bool cycle = false;
    nlohmann::json list = doc;
    if (doc.is_object()) {
        list = doc.value("replies", nlohmann::json::array());
        cycle = doc.value("cycle", false);
    }
    if (!list.is_array()) throw Error(ErrorKind::validation, "transcript " + path.string() + " needs a replies array");
    std::vector<std::string> replies;
    for (const auto& r : list) replies.push_back(r.is_string() ? r.get<std::string>() : r.dump());
    return std::make_unique<ScriptedChatClient>(std::move(replies), cycle);
}

std::string ScriptedChatClient::complete(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    seen_.push_back(request);
    if (next_ >= replies_.size()) {
        if (!cycle_ || replies_.empty()) {
            throw Error(ErrorKind::service, request.purpose + ": scripted transcript exhausted after " +
                                                std::to_string(replies_.size()) + " replies");
        }
        next_ = 0;
    }
    return replies_[next_++];
}

std::vector<ChatRequest> ScriptedChatClient::requests() const {
    std::lock_guard lock(mutex_);
    return seen_;
}

std::size_t ScriptedChatClient::calls() const {
    std::lock_guard lock(mutex_);
    return seen_.size();
}

nlohmann::json parse_reply_json(std::string_view reply) {
    std::string body = text::trim(reply);
    if (body.rfind("```", 0) == 0) {
        const auto first_nl = body.find('\n');
        const auto last_fence = body.rfind("```");
        if (first_nl != std::string::npos && last_fence != std::string::npos && last_fence > first_nl) {
            body = text::trim(std::string_view(body).substr(first_nl + 1, last_fence - first_nl - 1));
        }
    }
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaViolation(std::string("reply is not valid JSON: ") + e.what());
    }
}

std::string render_repair_prompt(std::string_view schema, std::string_view error) {
    return render_prompt(prompt_template("repair"), {{"schema", std::string(schema)}, {"error", std::string(error)}});
}

}  // namespace mirage
