#include <array>

#include "mirage/chat.hpp"
#include "mirage/codec.hpp"
#include "mirage/image_io.hpp"
#include "mirage/orchestrator.hpp"
#include "mirage/scene.hpp"

namespace mirage {
namespace {

using nlohmann::json;

struct PairSeed {
    const char* category;
    const char* scene;
};

constexpr std::array<PairSeed, 12> kPairVocabulary{{
    {"mug", "kitchen counter in morning light"},
    {"plant", "sunny windowsill"},
    {"book", "library reading table"},
    {"candle", "dinner table at dusk"},
    {"apple", "wooden fruit crate at a market stall"},
    {"sneaker", "shoe store display shelf"},
    {"vase", "museum plinth row"},
    {"lamp", "furniture showroom"},
    {"teacup", "cafe window bar"},
    {"backpack", "school cloakroom bench"},
    {"bottle", "bar shelf with warm lighting"},
    {"cushion", "living room sofa"},
}};

constexpr std::array<const char*, 5> kColors{"red", "green", "blue", "yellow", "purple"};
constexpr std::array<const char*, 5> kEditTypes{"addition", "removal", "replacement", "color modification",
                                                "material modification"};

std::vector<std::string> ordered_descriptors(const std::string& category, int count) {
    const std::string c = category;
    switch (count) {
        case 3:
            return {"the leftmost " + c, "the middle " + c, "the rightmost " + c};
        case 4:
            return {"the leftmost " + c, "the second " + c + " from the left", "the second " + c + " from the right",
                    "the rightmost " + c};
        case 5:
            return {"the leftmost " + c, "the second " + c + " from the left", "the middle " + c,
                    "the second " + c + " from the right", "the rightmost " + c};
        default:
            break;
    }
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) out.push_back("the leftmost " + c);
    return out;
}

std::string instruction_for(const std::string& edit_type, const std::string& target) {
    if (edit_type == "addition") return "add a small paper crown on top of " + target;
    if (edit_type == "removal") return "remove " + target;
    if (edit_type == "replacement") return "replace " + target + " with a glass teapot";
    if (edit_type == "color modification") return "paint " + target + " bright blue";
    return "make " + target + " look like polished wood";
}

std::string echo_description(const json& p) {
    const auto category = p.value("category", std::string("object"));
    const auto scene = p.value("scene", std::string("plain room"));
    const int n = p.value("instance_count", 3);
    const auto names = ordered_descriptors(category, n);
    std::string text = "A photograph of a " + scene + ". " + std::to_string(n) + " " + category +
                       " items stand in one row without overlapping.";
    for (int i = 0; i < n; ++i) {
        std::string name = names[static_cast<std::size_t>(i)];
        name[0] = 'T';
        text += " " + name + " is " + kColors[static_cast<std::size_t>(i) % kColors.size()] + ".";
    }
    text += " An orange ball and a teal ball rest in the foreground. Soft daylight falls on a pale grey backdrop.";
    return text;
}

json echo_slot_plan(const json& p) {
    const auto category = p.value("category", std::string("object"));
    const int n = p.value("instance_count", 3);
    return json::array({{{"repeated_category", category},
                         {"instance_count", n},
                         {"ordered_instances", ordered_descriptors(category, n)},
                         {"extra_targets", {"the leftmost ball", "the rightmost ball"}}}});
}

json echo_instructions(const json& p) {
    const auto& plan = p.at("slot_plan");
    std::vector<std::string> targets = plan.at("ordered_instances").get<std::vector<std::string>>();
    for (const auto& extra : plan.value("extra_targets", json::array())) {
        if (targets.size() >= 5) break;
        targets.push_back(extra.get<std::string>());
    }
    json out = json::array();
    for (std::size_t i = 0; i < targets.size() && i < 5; ++i) {
        const std::string type = kEditTypes[i % kEditTypes.size()];
        out.push_back({{"instruction", instruction_for(type, targets[i])}, {"edit_type", type}, {"target", targets[i]}});
    }
    return out;
}

json echo_referents(const json& p) {
    json out = json::array();
    for (const auto& instr : p.at("instructions")) {
        out.push_back({{"refer", stub_decompose(instr.get<std::string>()).pairs.at(0).refer}});
    }
    return out;
}

json echo_ground(const ChatRequest& request) {
    const auto expression = request.payload.at("expression").get<std::string>();
    for (const auto& m : request.messages) {
        if (m.images_png_base64.empty()) continue;
        const auto image = decode_png(base64_decode(m.images_png_base64.front()));
        if (auto box = stub_localize(image, expression)) {
            return json::array({{{"refer", expression}, {"box", {box->x0, box->y0, box->x1, box->y1}}}});
        }
        return json::array({{{"refer", expression}, {"box", nullptr}}});
    }
    throw Error(ErrorKind::validation, "ground request carries no image");
}

}  // namespace

std::string EchoChatClient::complete(const ChatRequest& request) {
    std::lock_guard lock(mutex_);
    ++calls_;
    const auto& p = request.payload;
    const auto& purpose = request.purpose;
    if (purpose == "decompose") return pairs_to_json(stub_decompose(p.at("instruction").get<std::string>()).pairs).dump();
    if (purpose == "ground") return echo_ground(request).dump();
    if (purpose == "judge_pf_cons") return R"([{"prompt_following": 8.0, "consistency": 9.0}])";
    if (purpose == "judge_pq") return R"([{"perceptual_quality": 8.5}])";
    if (purpose == "bench_pair") {
        const auto& seed = kPairVocabulary[pair_cursor_ % kPairVocabulary.size()];
        const auto round = pair_cursor_ / kPairVocabulary.size();
        ++pair_cursor_;
        std::string scene = seed.scene;
        if (round > 0) scene += " (variant " + std::to_string(round + 1) + ")";
        return json::array({{{"category", seed.category}, {"scene", scene}}}).dump();
    }
    if (purpose == "bench_dedup") return R"([{"duplicate": false, "duplicate_of": null}])";
    if (purpose == "bench_description") return echo_description(p);
    if (purpose == "bench_verify") return R"([{"pass": true, "issues": [], "suggestions": ""}])";
    if (purpose == "bench_refine") return p.value("description", std::string());
    if (purpose == "bench_slot_plan") return echo_slot_plan(p).dump();
    if (purpose == "bench_instructions") return echo_instructions(p).dump();
    if (purpose == "bench_referents") return echo_referents(p).dump();
    throw Error(ErrorKind::service, "echo responder has no answer for purpose '" + purpose + "'");
}

std::size_t EchoChatClient::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

}  // namespace mirage
