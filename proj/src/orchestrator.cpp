#include "mirage/orchestrator.hpp"

#include <cctype>
#include <cmath>

#include "mirage/codec.hpp"
#include "mirage/image_io.hpp"
#include "mirage/prompts.hpp"
#include "referring.hpp"
#include "strings.hpp"

namespace mirage {
namespace {

struct Token {
    std::string word;  // lowercased, trailing punctuation stripped
    std::size_t begin = 0;
    std::size_t end = 0;  // end of the word without trailing punctuation
};

std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i >= s.size()) break;
        const std::size_t b = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t e = i;
        while (e > b && std::ispunct(static_cast<unsigned char>(s[e - 1])) && s[e - 1] != ')') --e;
        if (e == b) e = i;
        out.push_back({text::lower(s.substr(b, e - b)), b, e});
    }
    return out;
}

bool is_preposition(std::string_view w) {
    return w == "of" || w == "to" || w == "on" || w == "onto" || w == "at" || w == "in" || w == "from" || w == "for";
}

DecompositionPair split_referent(std::string_view clause, const std::vector<Token>& toks, std::size_t first,
                                 std::size_t last, std::size_t index) {
    const std::size_t span_begin = toks[first].begin;
    const std::size_t span_end = toks[last].end;
    std::size_t cut_begin = span_begin;
    if (first > 0 && is_preposition(toks[first - 1].word)) cut_begin = toks[first - 1].begin;
    std::string edit =
        text::squeeze(std::string(clause.substr(0, cut_begin)) + " " + std::string(clause.substr(span_end)));
    while (!edit.empty() && (edit.back() == '.' || edit.back() == ',' || edit.back() == '!')) edit.pop_back();
    edit = text::trim(edit);
    if (!edit.empty()) edit[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(edit[0])));
    if (edit.empty()) {
        throw Error(ErrorKind::grammar, "clause " + std::to_string(index) + ": no edit besides the referent");
    }
    return {std::string(clause.substr(span_begin, span_end - span_begin)), edit};
}

DecompositionPair decompose_clause(std::string_view clause, std::size_t index) {
    const auto toks = tokenize(clause);
    for (std::size_t i = 0; i + 2 < toks.size(); ++i) {
        if (toks[i].word != "the" || !referring::is_position_word(toks[i + 1].word)) continue;
        std::size_t last = i + 2;
        if (last + 3 < toks.size() && toks[last + 1].word == "from" && toks[last + 2].word == "the" &&
            (toks[last + 3].word == "left" || toks[last + 3].word == "right")) {
            last += 3;
        }
        return split_referent(clause, toks, i, last, index);
    }
    // Bare "the <noun>" for scenes with a single candidate.
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
        if (toks[i].word == "the" && !is_preposition(toks[i + 1].word) && toks[i + 1].word != "the") {
            return split_referent(clause, toks, i, i + 1, index);
        }
    }
    throw Error(ErrorKind::grammar, "clause " + std::to_string(index) + ": expected a 'the [<position>] <noun>' referent in \"" +
                                        text::trim(clause) + "\"");
}

const nlohmann::json& first_object(const nlohmann::json& reply) {
    if (reply.is_object()) return reply;
    if (!reply.is_array() || reply.empty()) throw SchemaViolation("expected a non-empty JSON array");
    if (!reply[0].is_object()) throw SchemaViolation("entry 0 is not an object");
    return reply[0];
}

}  // namespace

Decomposition stub_decompose(std::string_view instruction) {
    Decomposition out;
    std::size_t index = 0;
    for (const auto& clause : text::split(instruction, ';')) {
        if (!text::trim(clause).empty()) out.pairs.push_back(decompose_clause(clause, index));
        ++index;
    }
    if (out.pairs.empty()) throw Error(ErrorKind::grammar, "instruction has no clauses");
    return out;
}

nlohmann::json pairs_to_json(const std::vector<DecompositionPair>& pairs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pairs) arr.push_back({{"refer", p.refer}, {"edit", p.edit}});
    return arr;
}

std::vector<DecompositionPair> validate_decomposition(const nlohmann::json& reply, std::string_view instruction) {
    if (!reply.is_array() || reply.empty()) throw SchemaViolation("expected a non-empty JSON array");
    std::vector<DecompositionPair> pairs;
    for (std::size_t i = 0; i < reply.size(); ++i) {
        const auto& e = reply[i];
        const auto where = "entry " + std::to_string(i);
        if (!e.is_object()) throw SchemaViolation(where + " is not an object");
        for (const char* key : {"refer", "edit"}) {
            if (!e.contains(key) || !e[key].is_string() || text::trim(e[key].get<std::string>()).empty()) {
                throw SchemaViolation(where + ": missing non-empty string field \"" + key + "\"");
            }
        }
        const auto refer = e["refer"].get<std::string>();
        if (instruction.find(refer) == std::string_view::npos) {
            throw SchemaViolation(where + ": refer \"" + refer + "\" is not copied verbatim from the instruction");
        }
        pairs.push_back({refer, e["edit"].get<std::string>()});
    }
    return pairs;
}

Decomposition decompose(std::string_view instruction, ChatClient& client, const ChatClientConfig& config) {
    ChatRequest req;
    req.purpose = "decompose";
    req.payload = {{"instruction", std::string(instruction)}};
    req.messages.push_back(
        {"user", render_prompt(prompt_template("decompose"), {{"instruction", std::string(instruction)}}), {}});
    const std::string instr(instruction);
    auto result = request_structured<std::vector<DecompositionPair>>(
        client, config, std::move(req), kDecompositionSchema,
        [&instr](const nlohmann::json& j) { return validate_decomposition(j, instr); });
    return {std::move(result.value), result.retries, std::move(result.raw_outputs)};
}

BoundingBox validate_grounding(const nlohmann::json& reply, int image_w, int image_h,
                               std::vector<std::string>& warnings) {
    const auto& obj = first_object(reply);
    if (!obj.contains("box") || !obj["box"].is_array() || obj["box"].size() != 4) {
        throw SchemaViolation("field \"box\" must be an array of four numbers");
    }
    double v[4];
    for (std::size_t i = 0; i < 4; ++i) {
        if (!obj["box"][i].is_number()) throw SchemaViolation("field \"box\" must be an array of four numbers");
        v[i] = obj["box"][i].get<double>();
        if (!std::isfinite(v[i])) throw SchemaViolation("box values must be finite");
    }
    const bool normalized = v[0] >= 0 && v[1] >= 0 && v[0] <= 1 && v[1] <= 1 && v[2] <= 1 && v[3] <= 1;
    if (normalized) {
        v[0] *= image_w;
        v[2] *= image_w;
        v[1] *= image_h;
        v[3] *= image_h;
        warnings.push_back("box looked normalized; rescaled to pixels");
    }
    int b[4];
    for (std::size_t i = 0; i < 4; ++i) b[i] = static_cast<int>(std::lround(v[i]));
    const int extent[4] = {image_w, image_h, image_w, image_h};
    bool clamped = false;
    for (std::size_t i = 0; i < 4; ++i) {
        if (b[i] < -kGroundingClampTolerancePx || b[i] > extent[i] + kGroundingClampTolerancePx) {
            throw SchemaViolation("box " + nlohmann::json(obj["box"]).dump() + " lies outside the " +
                                  std::to_string(image_w) + "x" + std::to_string(image_h) + " image");
        }
        const int c = std::clamp(b[i], 0, extent[i]);
        clamped |= c != b[i];
        b[i] = c;
    }
    if (clamped) warnings.push_back("box overshot the image by at most " + std::to_string(kGroundingClampTolerancePx) + " px; clamped");
    BoundingBox box{b[0], b[1], b[2], b[3]};
    if (box.x1 <= box.x0 || box.y1 <= box.y0) {
        throw SchemaViolation("box " + box.to_string() + " is empty or inverted (need x0 < x1, y0 < y1)");
    }
    return box;
}

GroundingResult ground(const PixelImage& image, std::string_view expression, ChatClient& client,
                       const ChatClientConfig& config) {
    const int w = static_cast<int>(image.width());
    const int h = static_cast<int>(image.height());
    ChatRequest req;
    req.purpose = "ground";
    req.payload = {{"expression", std::string(expression)}, {"width", w}, {"height", h}};
    req.messages.push_back({"user",
                            render_prompt(prompt_template("ground"), {{"width", std::to_string(w)},
                                                                      {"height", std::to_string(h)},
                                                                      {"expression", std::string(expression)}}),
                            {base64_encode(encode_png(image))}});
    std::vector<std::string> warnings;
    auto result = request_structured<BoundingBox>(client, config, std::move(req), kGroundingSchema,
                                                  [&](const nlohmann::json& j) {
                                                      warnings.clear();
                                                      return validate_grounding(j, w, h, warnings);
                                                  });
    return {result.value, result.retries, std::move(warnings), std::move(result.raw_outputs)};
}

}  // namespace mirage
