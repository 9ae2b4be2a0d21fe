#pragma once

#include <map>
#include <string>
#include <string_view>

namespace mirage {

/// A prompt template shipped under assets/prompts. Placeholders are written
/// {{name}}. `hash` is the SHA-256 of the template body and is recorded in
/// manifests so prompt changes are visible.
struct PromptTemplate {
    std::string name;
    std::string version;
    std::string text;
    std::string hash;
};

const PromptTemplate& prompt_template(std::string_view name);

/// Substitutes every {{key}}; throws a validation error on a placeholder
/// left without a value.
std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values);

/// name -> hash for every shipped prompt.
std::map<std::string, std::string> prompt_hashes();

}  // namespace mirage
