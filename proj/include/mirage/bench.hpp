#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirage/chat.hpp"
#include "mirage/geometry.hpp"
#include "mirage/segmenter.hpp"

namespace mirage {

struct CategoryScenePair {
    std::string category;
    std::string scene;
    bool operator==(const CategoryScenePair&) const = default;
};

enum class DedupDecision { keep, regenerate };

struct DedupVerdict {
    std::string candidate_id;
    std::optional<std::string> duplicate_of;
    DedupDecision decision = DedupDecision::keep;
    /// "exact" or "judge" for regenerate verdicts.
    std::string reason;
};

nlohmann::json to_json(const DedupVerdict& v);

struct BenchLimits {
    /// Rejected candidates tolerated per requested pair before giving up.
    int pair_attempts = 8;
    int refine_rounds = 4;
    /// Fresh pairs tried for one sample whose description never passes.
    int regenerations = 3;
};

struct PairGeneration {
    std::vector<CategoryScenePair> pairs;
    std::vector<std::string> ids;
    int candidates = 0;
    std::vector<DedupVerdict> events;
    /// Candidate requests sent with escalated sampling parameters.
    int escalations = 0;
    std::vector<SamplingParams> params_used;
};

/// Collects n unique pairs. Exact duplicates (case, whitespace and a plural
/// 's' ignored) and judge-declared duplicates are regenerated with the
/// sampling ladder indexed by consecutive rejections; defaults come back
/// after each accepted pair. Throws a budget error when one slot runs out of
/// attempts.
PairGeneration bench_generate_pairs(int n, ChatClient& client, ChatClient& judge, const ChatClientConfig& config,
                                    const BenchLimits& limits = {});

/// Adds `count` more unique pairs to an existing generation.
void extend_pairs(PairGeneration& state, int count, ChatClient& client, ChatClient& judge,
                  const ChatClientConfig& config, const BenchLimits& limits = {});

struct RefinementRound {
    int round = 0;
    std::string description;
    bool passed = false;
    std::vector<std::string> issues;
    std::string suggestions;
};

struct DescriptionOutcome {
    std::string description;
    std::vector<RefinementRound> transcript;
    int refinements = 0;
    /// Still failing after the last refinement round; restart from a new pair.
    bool regenerate = false;
};

DescriptionOutcome bench_generate_description(const CategoryScenePair& pair, int instance_count, ChatClient& client,
                                              ChatClient& judge, const ChatClientConfig& config,
                                              const std::vector<std::string>& accepted = {},
                                              const BenchLimits& limits = {});

struct SlotPlan {
    std::string repeated_category;
    int instance_count = 0;
    std::vector<std::string> ordered_instances;
    std::vector<std::string> extra_targets;
};

nlohmann::json to_json(const SlotPlan& plan);
/// Throws SchemaViolation. Extras must cover the 5 - instance_count slots.
SlotPlan validate_slot_plan(const nlohmann::json& reply, int expected_count);

SlotPlan bench_generate_slot_plan(const std::string& description, const CategoryScenePair& pair, int instance_count,
                                  ChatClient& client, const ChatClientConfig& config);

inline constexpr int kInstructionsPerSample = 5;
inline const std::vector<std::string> kEditTypes = {"addition", "removal", "replacement", "color modification",
                                                    "material modification"};

struct BenchInstruction {
    std::string instruction;
    std::string edit_type;
    std::string target;
    std::string referent;
};

struct InstructionSet {
    std::vector<BenchInstruction> items;
    int retries = 0;
};

/// Exactly five; instruction i < instance_count targets ordered_instances[i],
/// later ones target distinct extras. Throws SchemaViolation.
std::vector<BenchInstruction> validate_instructions(const nlohmann::json& reply, const SlotPlan& plan);
std::vector<std::string> validate_referents(const nlohmann::json& reply, const std::vector<BenchInstruction>& items);

InstructionSet bench_generate_instructions(const SlotPlan& plan, const PixelImage& image, ChatClient& client,
                                           const ChatClientConfig& config);

/// Per-sample instance counts: floor(n/4) fours, floor(n/4) fives, threes
/// for the rest, interleaved as 3, 4, 3, 5.
std::vector<int> instance_count_plan(int n);

struct BenchClients {
    ChatClient* generator = nullptr;
    ChatClient* judge = nullptr;
    ChatClient* grounder = nullptr;
    ChatClientConfig generator_config;
    ChatClientConfig judge_config;
    ChatClientConfig grounder_config;
    Segmenter* segmenter = nullptr;
};

struct BenchBuildConfig {
    int n = 1;
    std::filesystem::path out_dir = "bench";
    int image_size = 128;
    BenchLimits limits;
};

struct BenchBuildResult {
    std::filesystem::path manifest_path;
    int built = 0;
    std::vector<std::string> failures;
};

/// Writes images/, masks/, samples/<id>.json and manifest.json under
/// out_dir. Pair-stage budget errors abort; later per-sample failures are
/// listed in the manifest and the result.
BenchBuildResult bench_build(const BenchBuildConfig& config, BenchClients& clients);

}  // namespace mirage
