#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mirage/chat.hpp"
#include "mirage/geometry.hpp"

namespace mirage {

struct DecompositionPair {
    std::string refer;
    std::string edit;
    bool operator==(const DecompositionPair&) const = default;
};

struct Decomposition {
    std::vector<DecompositionPair> pairs;
    int retries = 0;
    std::vector<std::string> raw_outputs;
};

/// JSON schema text quoted in repair prompts.
inline constexpr std::string_view kDecompositionSchema =
    R"([{"refer": "<span copied verbatim from the instruction>", "edit": "<atomic edit>"}])";
inline constexpr std::string_view kGroundingSchema = R"([{"refer": "<expression>", "box": [x0, y0, x1, y1]}])";

/// Offline parser for the mini-grammar: clauses joined by ';', each holding
/// one "the <position> <noun>" referent, where position is a side word
/// (leftmost, rightmost, middle, center, left, right) or an ordinal (first ..
/// fifth, last) optionally followed after the noun by "from the left|right".
/// Clauses without a position word fall back to the first "the <noun>".
/// The edit is the clause minus the referent and a preposition directly in
/// front of it, with the first letter lowercased.
Decomposition stub_decompose(std::string_view instruction);

nlohmann::json pairs_to_json(const std::vector<DecompositionPair>& pairs);

/// Validates a decomposition reply: non-empty array of {refer, edit} string
/// objects, every refer a verbatim substring of the instruction. Throws
/// SchemaViolation.
std::vector<DecompositionPair> validate_decomposition(const nlohmann::json& reply, std::string_view instruction);

Decomposition decompose(std::string_view instruction, ChatClient& client, const ChatClientConfig& config);

struct GroundingResult {
    BoundingBox box;
    int retries = 0;
    std::vector<std::string> warnings;
    std::vector<std::string> raw_outputs;
};

inline constexpr int kGroundingClampTolerancePx = 2;

/// Validates a grounding reply against the image bounds. Replies whose four
/// values are all <= 1 are taken as normalized and rescaled; overshoot up to
/// the clamp tolerance is clamped. Both add a warning.
BoundingBox validate_grounding(const nlohmann::json& reply, int image_w, int image_h,
                               std::vector<std::string>& warnings);

GroundingResult ground(const PixelImage& image, std::string_view expression, ChatClient& client,
                       const ChatClientConfig& config);

}  // namespace mirage
