#include "mirage/prompts.hpp"

#include "mirage/codec.hpp"
#include "mirage/error.hpp"
#include "strings.hpp"

namespace mirage {
namespace detail {
const std::map<std::string, std::string>& embedded_prompts();
}

namespace {

PromptTemplate load(const std::string& name, const std::string& raw) {
    // Asset layout: "version: N" line, "---" line, then the body.
    const auto sep = raw.find("\n---\n");
    if (raw.rfind("version:", 0) != 0 || sep == std::string::npos) {
        throw Error(ErrorKind::validation, "prompt asset '" + name + "' lacks a version header");
    }
    PromptTemplate t;
    t.name = name;
    t.version = text::trim(raw.substr(8, sep - 8));
    t.text = raw.substr(sep + 5);
    t.hash = sha256_hex(t.text);
    return t;
}

const std::map<std::string, PromptTemplate, std::less<>>& registry() {
    static const auto prompts = [] {
        std::map<std::string, PromptTemplate, std::less<>> out;
        for (const auto& [name, raw] : detail::embedded_prompts()) out.emplace(name, load(name, raw));
        return out;
    }();
    return prompts;
}

}  // namespace

const PromptTemplate& prompt_template(std::string_view name) {
    const auto& reg = registry();
    auto it = reg.find(name);
    if (it == reg.end()) throw Error(ErrorKind::validation, "unknown prompt '" + std::string(name) + "'");
    return it->second;
}

std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    const std::string& src = tmpl.text;
    std::size_t pos = 0;
    while (true) {
        const auto open = src.find("{{", pos);
        if (open == std::string::npos) {
            out.append(src, pos, std::string::npos);
            break;
        }
        const auto close = src.find("}}", open + 2);
        if (close == std::string::npos) throw Error(ErrorKind::validation, "unterminated placeholder in " + tmpl.name);
        out.append(src, pos, open - pos);
        const std::string key = src.substr(open + 2, close - open - 2);
        auto it = values.find(key);
        if (it == values.end()) {
            throw Error(ErrorKind::validation, "prompt " + tmpl.name + " needs a value for {{" + key + "}}");
        }
        out += it->second;
        pos = close + 2;
    }
    return out;
}

std::map<std::string, std::string> prompt_hashes() {
    std::map<std::string, std::string> out;
    for (const auto& [name, t] : registry()) out[name] = t.hash;
    return out;
}

}  // namespace mirage
