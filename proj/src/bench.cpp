#include "mirage/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "mirage/codec.hpp"
#include "mirage/image_io.hpp"
#include "mirage/orchestrator.hpp"
#include "mirage/prompts.hpp"
#include "mirage/scene.hpp"
#include "strings.hpp"

namespace mirage {
namespace {

using nlohmann::json;

constexpr std::string_view kPairSchema = R"([{"category": "<object category>", "scene": "<scene>"}])";
constexpr std::string_view kDedupSchema = R"([{"duplicate": true|false, "duplicate_of": "<id or null>"}])";
constexpr std::string_view kVerifySchema = R"([{"pass": true|false, "issues": ["..."], "suggestions": "..."}])";
constexpr std::string_view kSlotPlanSchema =
    R"([{"repeated_category": "...", "instance_count": <3-5>, "ordered_instances": ["..."], "extra_targets": ["..."]}])";
constexpr std::string_view kInstructionSchema =
    R"([{"instruction": "...", "edit_type": "<type>", "target": "<descriptor from the layout>"}])";
constexpr std::string_view kReferentSchema = R"([{"refer": "<span copied from the instruction>"}])";

const json& single_object(const json& reply) {
    if (reply.is_object()) return reply;
    if (!reply.is_array() || reply.size() != 1 || !reply[0].is_object()) {
        throw SchemaViolation("expected a JSON array holding one object");
    }
    return reply[0];
}

std::string string_field(const json& obj, const char* key) {
    if (!obj.contains(key) || !obj[key].is_string() || text::trim(obj[key].get<std::string>()).empty()) {
        throw SchemaViolation(std::string("missing non-empty string field \"") + key + "\"");
    }
    return obj[key].get<std::string>();
}

std::string normalize(std::string_view s) {
    auto ws = text::words(text::lower(s));
    for (auto& w : ws) {
        if (w.size() > 3 && w.back() == 's') w.pop_back();
    }
    return text::join(ws, " ");
}

std::string text_reply(std::string_view reply) {
    auto body = text::trim(reply);
    if (body.rfind("```", 0) == 0) {
        const auto nl = body.find('\n');
        const auto end = body.rfind("```");
        if (nl != std::string::npos && end > nl) body = text::trim(std::string_view(body).substr(nl + 1, end - nl - 1));
    }
    if (body.empty()) throw Error(ErrorKind::schema, "empty description reply");
    return body;
}

std::string padded_id(const char* prefix, int n, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%0*d", prefix, width, n);
    return buf;
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::validation, "cannot write " + path.string());
    out << j.dump(2) << "\n";
}

struct Verification {
    bool pass = false;
    std::vector<std::string> issues;
    std::string suggestions;
};

Verification validate_verification(const json& reply) {
    const auto& o = single_object(reply);
    if (!o.contains("pass") || !o["pass"].is_boolean()) throw SchemaViolation("field \"pass\" must be a boolean");
    Verification v{o["pass"].get<bool>(), {}, {}};
    if (o.contains("issues")) {
        if (!o["issues"].is_array()) throw SchemaViolation("field \"issues\" must be an array of strings");
        for (const auto& i : o["issues"]) {
            if (!i.is_string()) throw SchemaViolation("field \"issues\" must be an array of strings");
            v.issues.push_back(i.get<std::string>());
        }
    }
    if (o.contains("suggestions") && o["suggestions"].is_string()) v.suggestions = o["suggestions"].get<std::string>();
    return v;
}

}  // namespace

json to_json(const DedupVerdict& v) {
    return {{"candidate_id", v.candidate_id},
            {"duplicate_of", v.duplicate_of ? json(*v.duplicate_of) : json(nullptr)},
            {"decision", v.decision == DedupDecision::keep ? "keep" : "regenerate"},
            {"reason", v.reason}};
}

void extend_pairs(PairGeneration& state, int count, ChatClient& client, ChatClient& judge,
                  const ChatClientConfig& config, const BenchLimits& limits) {
    if (count < 1) throw Error(ErrorKind::validation, "pair count must be >= 1");
    for (int slot = 0; slot < count; ++slot) {
        int failures = 0;
        while (true) {
            if (failures >= limits.pair_attempts) {
                throw Error(ErrorKind::budget, "pair generation: " + std::to_string(failures) +
                                                   " candidates rejected for one pair (budget " +
                                                   std::to_string(limits.pair_attempts) + ")",
                            "pairs");
            }
            ChatClientConfig cfg = config;
            cfg.defaults = config.params_after_failures(failures);
            if (failures > 0) ++state.escalations;

            std::string existing;
            json existing_json = json::array();
            for (std::size_t i = 0; i < state.pairs.size(); ++i) {
                existing += "- " + state.pairs[i].category + " / " + state.pairs[i].scene + "\n";
                existing_json.push_back({{"id", state.ids[i]}, {"category", state.pairs[i].category}, {"scene", state.pairs[i].scene}});
            }
            ChatRequest req;
            req.purpose = "bench_pair";
            req.payload = {{"existing", existing_json}};
            req.messages.push_back({"user", render_prompt(prompt_template("bench_pair"), {{"existing", existing.empty() ? "(none)" : existing}}), {}});
            auto res = request_structured<CategoryScenePair>(client, cfg, std::move(req), kPairSchema, [](const json& j) {
                const auto& o = single_object(j);
                return CategoryScenePair{text::squeeze(string_field(o, "category")), text::squeeze(string_field(o, "scene"))};
            });
            state.params_used.insert(state.params_used.end(), res.params_used.begin(), res.params_used.end());
            const auto id = padded_id("pair", ++state.candidates, 3);
            const auto& cand = res.value;

            std::optional<std::string> dup;
            for (std::size_t i = 0; i < state.pairs.size() && !dup; ++i) {
                if (normalize(state.pairs[i].category) == normalize(cand.category) &&
                    normalize(state.pairs[i].scene) == normalize(cand.scene)) {
                    dup = state.ids[i];
                }
            }
            if (dup) {
                state.events.push_back({id, dup, DedupDecision::regenerate, "exact"});
                ++failures;
                continue;
            }
            if (!state.pairs.empty()) {
                std::string listing;
                for (std::size_t i = 0; i < state.pairs.size(); ++i) {
                    listing += state.ids[i] + ": " + state.pairs[i].category + " / " + state.pairs[i].scene + "\n";
                }
                ChatRequest dreq;
                dreq.purpose = "bench_dedup";
                dreq.payload = {{"candidate", {{"id", id}, {"category", cand.category}, {"scene", cand.scene}}},
                                {"existing", existing_json}};
                dreq.messages.push_back({"user",
                                         render_prompt(prompt_template("bench_dedup"),
                                                       {{"candidate", cand.category + " / " + cand.scene}, {"existing", listing}}),
                                         {}});
                const auto ids = state.ids;
                auto verdict = request_structured<std::optional<std::string>>(
                    judge, config, std::move(dreq), kDedupSchema, [&ids](const json& j) -> std::optional<std::string> {
                        const auto& o = single_object(j);
                        if (!o.contains("duplicate") || !o["duplicate"].is_boolean()) {
                            throw SchemaViolation("field \"duplicate\" must be a boolean");
                        }
                        if (!o["duplicate"].get<bool>()) return std::nullopt;
                        if (!o.contains("duplicate_of") || !o["duplicate_of"].is_string()) {
                            throw SchemaViolation("a duplicate verdict needs \"duplicate_of\" naming a collected id");
                        }
                        const auto of = o["duplicate_of"].get<std::string>();
                        if (std::find(ids.begin(), ids.end(), of) == ids.end()) {
                            throw SchemaViolation("\"duplicate_of\" names unknown id " + of);
                        }
                        return of;
                    });
                if (verdict.value) {
                    state.events.push_back({id, verdict.value, DedupDecision::regenerate, "judge"});
                    ++failures;
                    continue;
                }
            }
            state.events.push_back({id, std::nullopt, DedupDecision::keep, ""});
            state.pairs.push_back(cand);
            state.ids.push_back(id);
            break;
        }
    }
}

PairGeneration bench_generate_pairs(int n, ChatClient& client, ChatClient& judge, const ChatClientConfig& config,
                                    const BenchLimits& limits) {
    PairGeneration state;
    extend_pairs(state, n, client, judge, config, limits);
    return state;
}

DescriptionOutcome bench_generate_description(const CategoryScenePair& pair, int instance_count, ChatClient& client,
                                              ChatClient& judge, const ChatClientConfig& config,
                                              const std::vector<std::string>& accepted, const BenchLimits& limits) {
    const std::map<std::string, std::string> base = {
        {"scene", pair.scene}, {"category", pair.category}, {"instance_count", std::to_string(instance_count)}};
    ChatRequest req;
    req.purpose = "bench_description";
    req.params = config.defaults;
    req.max_tokens = config.max_tokens;
    req.payload = {{"category", pair.category}, {"scene", pair.scene}, {"instance_count", instance_count}};
    req.messages.push_back({"user", render_prompt(prompt_template("bench_description"), base), {}});

    DescriptionOutcome out;
    out.description = text_reply(client.complete(req));
    std::string others;
    for (const auto& a : accepted) others += "- " + a + "\n";
    if (others.empty()) others = "(none)";

    for (int round = 0;; ++round) {
        ChatRequest vreq;
        vreq.purpose = "bench_verify";
        vreq.payload = {{"description", out.description}, {"instance_count", instance_count}, {"category", pair.category}};
        auto values = base;
        values["description"] = out.description;
        values["existing"] = others;
        vreq.messages.push_back({"user", render_prompt(prompt_template("bench_verify"), values), {}});
        const auto verdict = request_structured<Verification>(judge, config, std::move(vreq), kVerifySchema,
                                                              validate_verification).value;
        out.transcript.push_back({round, out.description, verdict.pass, verdict.issues, verdict.suggestions});
        if (verdict.pass) return out;
        if (round >= limits.refine_rounds) {
            out.regenerate = true;
            return out;
        }
        ChatRequest rreq;
        rreq.purpose = "bench_refine";
        rreq.params = config.defaults;
        rreq.max_tokens = config.max_tokens;
        rreq.payload = {{"description", out.description}, {"issues", verdict.issues}, {"suggestions", verdict.suggestions}};
        rreq.messages.push_back({"user",
                                 render_prompt(prompt_template("bench_refine"),
                                               {{"description", out.description},
                                                {"issues", verdict.issues.empty() ? "(none)" : "- " + text::join(verdict.issues, "\n- ")},
                                                {"suggestions", verdict.suggestions.empty() ? "(none)" : verdict.suggestions}}),
                                 {}});
        out.description = text_reply(client.complete(rreq));
        ++out.refinements;
    }
}

json to_json(const SlotPlan& plan) {
    return {{"repeated_category", plan.repeated_category},
            {"instance_count", plan.instance_count},
            {"ordered_instances", plan.ordered_instances},
            {"extra_targets", plan.extra_targets}};
}

SlotPlan validate_slot_plan(const json& reply, int expected_count) {
    const auto& o = single_object(reply);
    SlotPlan plan;
    plan.repeated_category = string_field(o, "repeated_category");
    if (!o.contains("instance_count") || !o["instance_count"].is_number_integer()) {
        throw SchemaViolation("field \"instance_count\" must be an integer");
    }
    plan.instance_count = o["instance_count"].get<int>();
    if (plan.instance_count < 3 || plan.instance_count > 5) throw SchemaViolation("instance_count must be 3, 4 or 5");
    if (plan.instance_count != expected_count) {
        throw SchemaViolation("instance_count is " + std::to_string(plan.instance_count) + ", the description has " +
                              std::to_string(expected_count));
    }
    auto strings = [&](const char* key) {
        std::vector<std::string> out;
        if (!o.contains(key) || !o[key].is_array()) throw SchemaViolation(std::string("field \"") + key + "\" must be an array of strings");
        for (const auto& v : o[key]) {
            if (!v.is_string() || text::trim(v.get<std::string>()).empty()) {
                throw SchemaViolation(std::string("field \"") + key + "\" must hold non-empty strings");
            }
            out.push_back(v.get<std::string>());
        }
        return out;
    };
    plan.ordered_instances = strings("ordered_instances");
    plan.extra_targets = o.contains("extra_targets") ? strings("extra_targets") : std::vector<std::string>{};
    if (plan.ordered_instances.size() != static_cast<std::size_t>(plan.instance_count)) {
        throw SchemaViolation("ordered_instances must list exactly instance_count descriptors");
    }
    if (plan.extra_targets.size() > 2) throw SchemaViolation("at most two extra_targets");
    if (static_cast<int>(plan.extra_targets.size()) < kInstructionsPerSample - plan.instance_count) {
        throw SchemaViolation("extra_targets must cover the " + std::to_string(kInstructionsPerSample - plan.instance_count) +
                              " instructions left after the repeated instances");
    }
    return plan;
}

SlotPlan bench_generate_slot_plan(const std::string& description, const CategoryScenePair& pair, int instance_count,
                                  ChatClient& client, const ChatClientConfig& config) {
    ChatRequest req;
    req.purpose = "bench_slot_plan";
    req.payload = {{"description", description}, {"category", pair.category}, {"instance_count", instance_count}};
    req.messages.push_back({"user", render_prompt(prompt_template("bench_slot_plan"), {{"description", description}}), {}});
    return request_structured<SlotPlan>(client, config, std::move(req), kSlotPlanSchema,
                                        [instance_count](const json& j) { return validate_slot_plan(j, instance_count); })
        .value;
}

std::vector<BenchInstruction> validate_instructions(const json& reply, const SlotPlan& plan) {
    if (!reply.is_array()) throw SchemaViolation("expected a JSON array of instructions");
    if (reply.size() != static_cast<std::size_t>(kInstructionsPerSample)) {
        throw SchemaViolation("expected exactly 5 instructions, got " + std::to_string(reply.size()));
    }
    std::vector<BenchInstruction> items;
    std::vector<std::string> used_extras;
    for (std::size_t i = 0; i < reply.size(); ++i) {
        const auto where = "instruction " + std::to_string(i + 1);
        if (!reply[i].is_object()) throw SchemaViolation(where + " is not an object");
        BenchInstruction item;
        try {
            item.instruction = string_field(reply[i], "instruction");
            item.edit_type = string_field(reply[i], "edit_type");
            item.target = string_field(reply[i], "target");
        } catch (const SchemaViolation& e) {
            throw SchemaViolation(where + ": " + e.what());
        }
        if (std::find(kEditTypes.begin(), kEditTypes.end(), item.edit_type) == kEditTypes.end()) {
            throw SchemaViolation(where + ": unknown edit_type \"" + item.edit_type + "\"");
        }
        if (i < static_cast<std::size_t>(plan.instance_count)) {
            if (item.target != plan.ordered_instances[i]) {
                throw SchemaViolation(where + " must target \"" + plan.ordered_instances[i] + "\" (left-to-right order)");
            }
        } else {
            if (std::find(plan.extra_targets.begin(), plan.extra_targets.end(), item.target) == plan.extra_targets.end()) {
                throw SchemaViolation(where + " must target one of the extra objects");
            }
            if (std::find(used_extras.begin(), used_extras.end(), item.target) != used_extras.end()) {
                throw SchemaViolation(where + " targets \"" + item.target + "\" a second time");
            }
            used_extras.push_back(item.target);
        }
        items.push_back(item);
    }
    return items;
}

std::vector<std::string> validate_referents(const json& reply, const std::vector<BenchInstruction>& items) {
    if (!reply.is_array() || reply.size() != items.size()) {
        throw SchemaViolation("expected one referent per instruction (" + std::to_string(items.size()) + ")");
    }
    std::vector<std::string> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!reply[i].is_object()) throw SchemaViolation("referent " + std::to_string(i + 1) + " is not an object");
        const auto refer = string_field(reply[i], "refer");
        if (items[i].instruction.find(refer) == std::string::npos) {
            throw SchemaViolation("referent " + std::to_string(i + 1) + " \"" + refer + "\" is not copied from its instruction");
        }
        out.push_back(refer);
    }
    return out;
}

InstructionSet bench_generate_instructions(const SlotPlan& plan, const PixelImage& image, ChatClient& client,
                                           const ChatClientConfig& config) {
    ChatRequest req;
    req.purpose = "bench_instructions";
    req.payload = {{"slot_plan", to_json(plan)}};
    req.messages.push_back({"user",
                            render_prompt(prompt_template("bench_instructions"),
                                          {{"slot_plan", to_json(plan).dump(2)},
                                           {"instance_count", std::to_string(plan.instance_count)},
                                           {"category", plan.repeated_category}}),
                            {base64_encode(encode_png(image))}});
    auto res = request_structured<std::vector<BenchInstruction>>(
        client, config, std::move(req), kInstructionSchema, [&plan](const json& j) { return validate_instructions(j, plan); });

    InstructionSet out{res.value, res.retries};
    json instructions = json::array();
    std::string listing;
    for (std::size_t i = 0; i < out.items.size(); ++i) {
        instructions.push_back(out.items[i].instruction);
        listing += std::to_string(i + 1) + ". " + out.items[i].instruction + "\n";
    }
    ChatRequest rreq;
    rreq.purpose = "bench_referents";
    rreq.payload = {{"instructions", instructions}};
    rreq.messages.push_back({"user", render_prompt(prompt_template("bench_referents"), {{"instructions", listing}}), {}});
    const auto& items = out.items;
    auto refs = request_structured<std::vector<std::string>>(
        client, config, std::move(rreq), kReferentSchema, [&items](const json& j) { return validate_referents(j, items); });
    out.retries += refs.retries;
    for (std::size_t i = 0; i < out.items.size(); ++i) out.items[i].referent = refs.value[i];
    return out;
}

std::vector<int> instance_count_plan(int n) {
    if (n < 1) throw Error(ErrorKind::validation, "sample count must be >= 1");
    std::map<int, int> left = {{4, n / 4}, {5, n / 4}};
    left[3] = n - left[4] - left[5];
    const int pattern[4] = {3, 4, 3, 5};
    std::vector<int> out;
    for (std::size_t i = 0; static_cast<int>(out.size()) < n; ++i) {
        const int c = pattern[i % 4];
        if (left[c] > 0) {
            --left[c];
            out.push_back(c);
        }
    }
    return out;
}

BenchBuildResult bench_build(const BenchBuildConfig& config, BenchClients& clients) {
    if (!clients.generator || !clients.judge || !clients.grounder || !clients.segmenter) {
        throw Error(ErrorKind::validation, "bench-build needs generator, judge, grounder and segmenter");
    }
    if (config.n < 1) throw Error(ErrorKind::validation, "bench-build needs n >= 1");
    namespace fs = std::filesystem;
    const fs::path root = config.out_dir;
    fs::create_directories(root / "samples");

    auto state = bench_generate_pairs(config.n, *clients.generator, *clients.judge, clients.generator_config, config.limits);
    const auto counts = instance_count_plan(config.n);
    const auto hashes = prompt_hashes();

    BenchBuildResult result;
    json samples = json::array();
    std::vector<std::string> accepted;
    std::map<int, int> histogram;
    for (int i = 0; i < config.n; ++i) {
        const auto id = padded_id("mira", i + 1, 4);
        const int count = counts[static_cast<std::size_t>(i)];
        std::string stage = "description";
        try {
            std::size_t pair_index = static_cast<std::size_t>(i);
            DescriptionOutcome desc;
            std::vector<json> discarded;
            int regenerations = 0;
            while (true) {
                desc = bench_generate_description(state.pairs[pair_index], count, *clients.generator, *clients.judge,
                                                  clients.judge_config, accepted, config.limits);
                if (!desc.regenerate) break;
                json rounds = json::array();
                for (const auto& r : desc.transcript) rounds.push_back({{"round", r.round}, {"passed", r.passed}, {"issues", r.issues}});
                discarded.push_back({{"pair_id", state.ids[pair_index]}, {"rounds", rounds}});
                if (++regenerations > config.limits.regenerations) {
                    throw Error(ErrorKind::budget, "description still failing after " +
                                                       std::to_string(config.limits.regenerations) + " regenerations");
                }
                stage = "pairs";
                extend_pairs(state, 1, *clients.generator, *clients.judge, clients.generator_config, config.limits);
                pair_index = state.pairs.size() - 1;
                stage = "description";
            }
            const auto& pair = state.pairs[pair_index];

            stage = "image";
            const auto scene = make_square_scene({config.image_size, config.image_size, count, pair.category, 2, "ball"});
            const auto image_rel = fs::path("images") / (id + ".png");
            write_png(root / image_rel, scene.image);

            stage = "slot_plan";
            const auto plan = bench_generate_slot_plan(desc.description, pair, count, *clients.generator, clients.generator_config);
            stage = "instructions";
            const auto instr = bench_generate_instructions(plan, scene.image, *clients.generator, clients.generator_config);

            stage = "grounding";
            std::vector<BoundingBox> boxes;
            json ground_retries = json::array();
            json warnings = json::array();
            for (const auto& item : instr.items) {
                const auto g = ground(scene.image, item.referent, *clients.grounder, clients.grounder_config);
                boxes.push_back(g.box);
                ground_retries.push_back(g.retries);
                for (const auto& w : g.warnings) warnings.push_back(item.referent + ": " + w);
            }
            stage = "segmentation";
            const auto masks = clients.segmenter->segment(scene.image, boxes);

            json mask_paths = json::array();
            json jboxes = json::array();
            json texts = json::array(), types = json::array(), targets = json::array(), referents = json::array();
            for (std::size_t k = 0; k < instr.items.size(); ++k) {
                const auto rel = fs::path("masks") / (id + "_" + std::to_string(k) + ".png");
                write_mask_png(root / rel, masks[k]);
                mask_paths.push_back(rel.generic_string());
                jboxes.push_back({boxes[k].x0, boxes[k].y0, boxes[k].x1, boxes[k].y1});
                texts.push_back(instr.items[k].instruction);
                types.push_back(instr.items[k].edit_type);
                targets.push_back(instr.items[k].target);
                referents.push_back(instr.items[k].referent);
            }
            json rounds = json::array();
            for (const auto& r : desc.transcript) {
                rounds.push_back({{"round", r.round},
                                  {"description", r.description},
                                  {"passed", r.passed},
                                  {"issues", r.issues},
                                  {"suggestions", r.suggestions}});
            }
            json dedup = json::array();
            for (const auto& e : state.events) dedup.push_back(to_json(e));
            const json sample = {
                {"id", id},
                {"pair", {{"id", state.ids[pair_index]}, {"category", pair.category}, {"scene", pair.scene}}},
                {"instance_count", count},
                {"description", desc.description},
                {"image_path", image_rel.generic_string()},
                {"instructions", texts},
                {"edit_types", types},
                {"targets", targets},
                {"referents", referents},
                {"boxes", jboxes},
                {"mask_paths", mask_paths},
                {"slot_plan", to_json(plan)},
                {"human_review", "pending"},
                {"provenance",
                 {{"retries", {{"instructions", instr.retries}, {"grounding", ground_retries}}},
                  {"rounds", rounds},
                  {"refinements", desc.refinements},
                  {"regenerations", regenerations},
                  {"discarded_descriptions", discarded},
                  {"prompt_hashes", hashes},
                  {"dedup_events", dedup},
                  {"escalations", state.escalations},
                  {"grounding_warnings", warnings}}},
            };
            const auto sample_rel = fs::path("samples") / (id + ".json");
            write_json(root / sample_rel, sample);
            samples.push_back({{"id", id}, {"path", sample_rel.generic_string()}, {"instance_count", count}});
            accepted.push_back(desc.description);
            ++histogram[count];
            ++result.built;
        } catch (const Error& e) {
            result.failures.push_back(id + " [" + stage + "]: " + e.what());
        }
    }

    json hist = json::object();
    for (const auto& [k, v] : histogram) hist[std::to_string(k)] = v;
    json pair_events = json::array();
    for (const auto& e : state.events) pair_events.push_back(to_json(e));
    const json manifest = {{"version", 1},
                           {"requested", config.n},
                           {"built", result.built},
                           {"samples", samples},
                           {"failures", result.failures},
                           {"instance_count_histogram", hist},
                           {"pair_events", pair_events},
                           {"escalations", state.escalations},
                           {"prompt_hashes", hashes}};
    result.manifest_path = root / "manifest.json";
    write_json(result.manifest_path, manifest);
    return result;
}

}  // namespace mirage
