#pragma once

// Template definitions for chat.hpp.

namespace mirage {

template <class T>
Structured<T> request_structured(ChatClient& client, const ChatClientConfig& config, ChatRequest request,
                                 std::string_view schema,
                                 const std::function<T(const nlohmann::json&)>& validate) {
    config.validate();
    Structured<T> out{};
    std::string last_error;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        request.params = config.params_after_failures(attempt);
        request.max_tokens = config.max_tokens;
        out.params_used.push_back(request.params);
        std::string reply = client.complete(request);
        out.raw_outputs.push_back(reply);
        try {
            out.value = validate(parse_reply_json(reply));
            out.retries = attempt;
            return out;
        } catch (const SchemaViolation& violation) {
            last_error = violation.what();
        }
        request.messages.push_back(ChatMessage{"assistant", reply, {}});
        request.messages.push_back(ChatMessage{"user", render_repair_prompt(schema, last_error), {}});
    }
    throw ClientError(ErrorKind::schema,
                      request.purpose + ": no valid reply after " + std::to_string(config.max_retries + 1) +
                          " attempts (last error: " + last_error + ")",
                      out.raw_outputs.empty() ? std::string{} : out.raw_outputs.back(),
                      static_cast<int>(out.raw_outputs.size()));
}

}  // namespace mirage
