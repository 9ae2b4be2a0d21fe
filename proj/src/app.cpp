#include "mirage/app.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "mirage/image_io.hpp"
#include "mirage/scheduler.hpp"
#include "mirage/toy_denoiser.hpp"
#include "strings.hpp"

namespace mirage {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

json box_json(const BoundingBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::validation, "cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::validation, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::validation, path.string() + " is not valid JSON: " + e.what());
    }
}

json client_json(const ChatClientConfig& c) {
    json ladder = json::array();
    for (const auto& r : c.escalation) ladder.push_back({r.temperature, r.top_p});
    return {{"endpoint", c.endpoint},   {"model", c.model},           {"temperature", c.defaults.temperature},
            {"top_p", c.defaults.top_p}, {"max_retries", c.max_retries}, {"timeout_s", c.timeout_s},
            {"escalation", ladder},      {"max_tokens", c.max_tokens}, {"token_env", c.token_env}};
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorKind::validation, where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
            throw Error(ErrorKind::validation, "unknown config key '" + key + "' in " + where);
        }
    }
}

ChatClientConfig client_from_json(const json& j, const std::string& role) {
    check_keys(j, {"endpoint", "model", "temperature", "top_p", "max_retries", "timeout_s", "escalation", "max_tokens", "token_env"},
               "clients." + role);
    ChatClientConfig c;
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.defaults.temperature = j.value("temperature", c.defaults.temperature);
    c.defaults.top_p = j.value("top_p", c.defaults.top_p);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.token_env = j.value("token_env", c.token_env);
    if (j.contains("escalation")) {
        c.escalation.clear();
        for (const auto& r : j["escalation"]) c.escalation.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
    }
    return c;
}

std::unique_ptr<ChatClient> client_for(const RunConfig& cfg, const std::string& role, const ChatClientConfig& c) {
    if (cfg.mock) {
        const auto path = *cfg.mock / (role + ".json");
        if (fs::exists(path)) return ScriptedChatClient::from_file(path);
        return std::make_unique<EchoChatClient>();
    }
    if (c.endpoint.empty()) return nullptr;
    return std::make_unique<HttpChatClient>(c);
}

ChatClient& require(const std::unique_ptr<ChatClient>& client, const std::string& role) {
    if (!client) {
        throw Error(ErrorKind::validation, "no chat endpoint configured for the " + role + "; set clients." + role +
                                               ".endpoint or pass --mock");
    }
    return *client;
}

std::string bridge_url(const std::string& spec) { return spec.substr(std::string("bridge:").size()); }

template <class F>
auto staged(const std::string& stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (Error& e) {
        if (e.stage().empty()) e.set_stage(stage);
        throw;
    }
}

// 3x5 glyphs, rows top to bottom, 3 bits per row (MSB = left).
const std::map<char, std::array<int, 5>>& glyphs() {
    static const std::map<char, std::array<int, 5>> g = {
        {'0', {7, 5, 5, 5, 7}}, {'1', {2, 6, 2, 2, 7}}, {'2', {7, 1, 7, 4, 7}}, {'3', {7, 1, 7, 1, 7}},
        {'4', {5, 5, 7, 1, 1}}, {'5', {7, 4, 7, 1, 7}}, {'6', {7, 4, 7, 5, 7}}, {'7', {7, 1, 1, 1, 1}},
        {'8', {7, 5, 7, 5, 7}}, {'9', {7, 5, 7, 1, 7}}, {'.', {0, 0, 0, 0, 2}}, {'s', {3, 4, 2, 1, 6}},
        {'=', {0, 7, 0, 7, 0}}, {'r', {0, 6, 4, 4, 4}}, {'g', {7, 4, 5, 5, 7}}, {' ', {0, 0, 0, 0, 0}},
    };
    return g;
}

void draw_text(PixelImage& img, int x, int y, const std::string& text) {
    for (char ch : text) {
        const auto it = glyphs().find(ch);
        if (it != glyphs().end()) {
            for (int row = 0; row < 5; ++row) {
                for (int col = 0; col < 3; ++col) {
                    if (!(it->second[static_cast<std::size_t>(row)] & (4 >> col))) continue;
                    const int px = x + col;
                    const int py = y + row;
                    if (px < 0 || py < 0 || px >= static_cast<int>(img.width()) || py >= static_cast<int>(img.height())) continue;
                    for (std::size_t c = 0; c < 3; ++c) img.set(c, py, px, 0.0);
                }
            }
        }
        x += 4;
    }
}

void fill_rect(PixelImage& img, int x0, int y0, int x1, int y1, const Rgb& color) {
    const double v[3] = {color.r, color.g, color.b};
    for (int y = std::max(0, y0); y < std::min<int>(y1, static_cast<int>(img.height())); ++y) {
        for (int x = std::max(0, x0); x < std::min<int>(x1, static_cast<int>(img.width())); ++x) {
            for (std::size_t c = 0; c < 3; ++c) img.set(c, y, x, v[c]);
        }
    }
}

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

void RunConfig::validate() const {
    if (steps < 1) throw Error(ErrorKind::validation, "steps must be >= 1");
    SwitchPolicy::checked(rho);
    if (vae_factor < 1 || patch < 1) throw Error(ErrorKind::validation, "vae_factor and patch must be >= 1");
    if (backend != "oracle" && backend.rfind("bridge:", 0) != 0) {
        throw Error(ErrorKind::validation, "backend must be 'oracle' or 'bridge:<url>', got '" + backend + "'");
    }
    if (segmenter != "box" && segmenter.rfind("bridge:", 0) != 0) {
        throw Error(ErrorKind::validation, "segmenter must be 'box' or 'bridge:<url>', got '" + segmenter + "'");
    }
    if (judge_repeats < 1) throw Error(ErrorKind::validation, "judge repeats must be >= 1");
    if (bench_image_size < 32) throw Error(ErrorKind::validation, "bench image size must be >= 32");
    parser.validate();
    grounder.validate();
    judge.validate();
    generator.validate();
}

json RunConfig::to_json() const {
    return {{"backend", backend},
            {"steps", steps},
            {"rho", rho},
            {"strategy", to_string(strategy)},
            {"seed", seed},
            {"vae_factor", vae_factor},
            {"patch", patch},
            {"trace", trace},
            {"parallel_branches", parallel_branches},
            {"out", out.generic_string()},
            {"mock", mock ? json(mock->generic_string()) : json(nullptr)},
            {"segmenter", segmenter},
            {"judge", {{"enabled", judge_enabled}, {"repeats", judge_repeats}}},
            {"bench_image_size", bench_image_size},
            {"clients",
             {{"parser", client_json(parser)},
              {"grounder", client_json(grounder)},
              {"judge", client_json(judge)},
              {"generator", client_json(generator)}}},
            {"image", image ? json(image->generic_string()) : json(nullptr)},
            {"instruction", instruction ? json(*instruction) : json(nullptr)}};
}

RunConfig RunConfig::from_json(const json& j) {
    check_keys(j,
               {"backend", "steps", "rho", "strategy", "seed", "vae_factor", "patch", "trace", "parallel_branches", "out",
                "mock", "segmenter", "judge", "bench_image_size", "clients", "image", "instruction"},
               "config");
    RunConfig c;
    try {
        c.backend = j.value("backend", c.backend);
        c.steps = j.value("steps", c.steps);
        c.rho = j.value("rho", c.rho);
        if (j.contains("strategy")) c.strategy = parse_strategy(j["strategy"].get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.vae_factor = j.value("vae_factor", c.vae_factor);
        c.patch = j.value("patch", c.patch);
        c.trace = j.value("trace", c.trace);
        c.parallel_branches = j.value("parallel_branches", c.parallel_branches);
        if (j.contains("out")) c.out = j["out"].get<std::string>();
        if (j.contains("mock") && !j["mock"].is_null()) c.mock = fs::path(j["mock"].get<std::string>());
        c.segmenter = j.value("segmenter", c.segmenter);
        if (j.contains("judge")) {
            check_keys(j["judge"], {"enabled", "repeats"}, "judge");
            c.judge_enabled = j["judge"].value("enabled", c.judge_enabled);
            c.judge_repeats = j["judge"].value("repeats", c.judge_repeats);
        }
        c.bench_image_size = j.value("bench_image_size", c.bench_image_size);
        if (j.contains("clients")) {
            check_keys(j["clients"], {"parser", "grounder", "judge", "generator"}, "clients");
            const auto& cl = j["clients"];
            if (cl.contains("parser")) c.parser = client_from_json(cl["parser"], "parser");
            if (cl.contains("grounder")) c.grounder = client_from_json(cl["grounder"], "grounder");
            if (cl.contains("judge")) c.judge = client_from_json(cl["judge"], "judge");
            if (cl.contains("generator")) c.generator = client_from_json(cl["generator"], "generator");
        }
        if (j.contains("image") && !j["image"].is_null()) c.image = fs::path(j["image"].get<std::string>());
        if (j.contains("instruction") && !j["instruction"].is_null()) c.instruction = j["instruction"].get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::validation, std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path& path) { return from_json(read_json(path)); }

Clients make_clients(const RunConfig& config) {
    Clients c;
    c.parser = client_for(config, "parser", config.parser);
    c.grounder = client_for(config, "grounder", config.grounder);
    c.judge = client_for(config, "judge", config.judge);
    c.generator = client_for(config, "generator", config.generator);
    return c;
}

std::shared_ptr<const DenoiserBackend> make_backend(const RunConfig& config, GridShape latent_shape) {
    if (config.backend == "oracle") {
        OracleOptions opts;
        opts.vae_factor = config.vae_factor;
        opts.patch = config.patch;
        opts.anchor = NoiseAnchor{config.seed, latent_shape};
        return std::make_shared<OracleBackend>(opts);
    }
    return std::make_shared<BridgeBackend>(bridge_url(config.backend));
}

json to_json(const RunReport& r) {
    return {{"steps", r.steps},
            {"rho", r.rho},
            {"strategy", to_string(r.strategy)},
            {"region_steps", r.region_steps},
            {"global_steps", r.global_steps},
            {"global_tokens_per_step", r.global_tokens_per_step},
            {"region_tokens_per_step", r.region_tokens_per_step},
            {"region_phase_tokens", r.region_phase_tokens},
            {"baseline_region_phase_tokens", r.baseline_region_phase_tokens},
            {"global_phase_tokens", r.global_phase_tokens},
            {"total_tokens", r.total_tokens},
            {"baseline_total_tokens", r.baseline_total_tokens},
            {"branch_token_sums", r.branch_token_sums}};
}

EditOutcome cmd_edit(const fs::path& image_path, const std::string& instruction, const RunConfig& config,
                     Clients& clients) {
    config.validate();
    if (text::trim(instruction).empty()) throw Error(ErrorKind::validation, "instruction must be non-empty", "parse");
    EditOutcome out;
    out.run_dir = config.out;
    out.reference = staged("input", [&] { return read_png(image_path); });
    const std::size_t h = out.reference.height();
    const std::size_t w = out.reference.width();
    const auto f = static_cast<std::size_t>(config.vae_factor);
    if (h % f || w % f) {
        throw Error(ErrorKind::shape, "image size " + std::to_string(w) + "x" + std::to_string(h) +
                                          " is not divisible by the codec factor", "input");
    }
    auto backend = staged("backend", [&] { return make_backend(config, {3, h / f, w / f}); });
    const auto desc = backend->descriptor();
    const int vf = desc.vae_factor;
    const int patch = desc.patch;

    const auto t_parse = std::chrono::steady_clock::now();
    std::vector<DecompositionPair> pairs;
    if (!is_noop_instruction(instruction)) {
        staged("parse", [&] {
            auto d = decompose(instruction, require(clients.parser, "parser"), config.parser);
            pairs = std::move(d.pairs);
            out.parse_retries = d.retries;
        });
    }
    const double parse_s = seconds_since(t_parse);

    const auto t_detect = std::chrono::steady_clock::now();
    std::vector<RegionInstance> regions;
    staged("detect", [&] {
        for (const auto& pair : pairs) {
            const auto g = ground(out.reference, pair.refer, require(clients.grounder, "grounder"), config.grounder);
            const auto aligned = align_box_to_latent(g.box, vf, patch, static_cast<int>(w), static_cast<int>(h));
            regions.push_back({pair.refer, pair.edit, aligned,
                               box_to_latent_mask(aligned, vf, h / static_cast<std::size_t>(vf), w / static_cast<std::size_t>(vf)),
                               crop(out.reference, aligned)});
            out.regions.push_back({pair, g.box, aligned, g.retries, g.warnings});
        }
    });
    const double detect_s = seconds_since(t_detect);

    EditResult result = staged("inference", [&] {
        SessionConfig sc{config.steps, config.rho, config.strategy, config.seed, config.trace, config.parallel_branches};
        auto session = EditSession::init(out.reference, instruction, regions, sc, backend);
        session.timings().parse_s = parse_s;
        session.timings().detect_s = detect_s;
        session.run();
        auto res = session.finalize();
        if (config.trace) {
            json entries = json::array();
            for (const auto& t : session.trace()) {
                char name[32];
                std::snprintf(name, sizeof name, "step_%03d.png", t.index);
                write_png(config.out / "trace" / name, backend->decode(t.latent));
                entries.push_back({{"index", t.index},
                                   {"s", t.s},
                                   {"phase", to_string(t.phase)},
                                   {"file", name},
                                   {"branch_tokens", t.branch_tokens}});
            }
            write_json(config.out / "trace" / "manifest.json",
                       {{"steps", config.steps}, {"rho", config.rho}, {"entries", entries}});
        }
        return res;
    });
    out.image = result.image;
    out.report = result.report;

    out.image_path = config.out / "edited.png";
    write_png(out.image_path, out.image);

    json regions_json = json::array();
    for (const auto& r : out.regions) {
        regions_json.push_back({{"refer", r.pair.refer},
                                {"edit", r.pair.edit},
                                {"grounded_box", box_json(r.grounded)},
                                {"box", box_json(r.aligned)},
                                {"grounding_retries", r.retries},
                                {"warnings", r.warnings}});
    }
    const auto& tm = out.report.timings;
    out.report_json = {
        {"instruction", instruction},
        {"backend", desc.name},
        {"vae_factor", vf},
        {"patch", patch},
        {"seed", config.seed},
        {"decomposition", {{"pairs", pairs_to_json(pairs)}, {"retries", out.parse_retries}}},
        {"regions", regions_json},
        {"run", to_json(out.report)},
        {"outputs", {{"image", "edited.png"}, {"trace", config.trace ? json("trace/manifest.json") : json(nullptr)}}},
        {"timings",
         {{"parse_s", round2(tm.parse_s)},
          {"detect_s", round2(tm.detect_s)},
          {"inference_s", round2(tm.inference_s)},
          {"total_s", round2(tm.total())}}},
    };
    out.report_path = config.out / "report.json";
    write_json(out.report_path, out.report_json);

    RunConfig resolved = config;
    resolved.image = fs::absolute(image_path);
    resolved.instruction = instruction;
    write_json(config.out / "config.json", resolved.to_json());
    return out;
}

EvalOutcome cmd_eval(const fs::path& manifest_path, const fs::path& results_dir, const RunConfig& config,
                     Clients& clients) {
    config.validate();
    const auto manifest = read_json(manifest_path);
    const auto root = manifest_path.parent_path();
    if (!manifest.contains("samples") || !manifest["samples"].is_array()) {
        throw Error(ErrorKind::validation, "manifest has no samples array");
    }
    ChatClient* judge = config.judge_enabled ? clients.judge.get() : nullptr;
    if (config.judge_enabled && !judge) require(clients.judge, "judge");

    EvalOutcome out;
    out.out_dir = config.out;
    for (const auto& entry : manifest["samples"]) {
        const auto id = entry.value("id", std::string("?"));
        try {
            const auto sample = read_json(root / entry.at("path").get<std::string>());
            const auto reference_path = root / sample.at("image_path").get<std::string>();
            if (!fs::exists(reference_path)) throw Error(ErrorKind::validation, "reference image missing");
            fs::path edited_path = results_dir / (id + ".png");
            if (!fs::exists(edited_path)) edited_path = results_dir / id / "edited.png";
            if (!fs::exists(edited_path)) throw Error(ErrorKind::validation, "edited image missing");
            const auto reference = read_png(reference_path);
            const auto edited = read_png(edited_path);
            std::vector<PixelMask> masks;
            for (const auto& m : sample.at("mask_paths")) {
                const auto p = root / m.get<std::string>();
                if (!fs::exists(p)) throw Error(ErrorKind::validation, "mask " + m.get<std::string>() + " missing");
                masks.push_back(read_mask_png(p));
            }
            const MaskSet set(reference.height(), reference.width(), std::move(masks));
            EvalRow row{id, background_metrics(reference, edited, set), std::nullopt};
            std::vector<std::string> instr;
            for (const auto& i : sample.value("instructions", json::array())) instr.push_back(i.get<std::string>());
            const auto joined = text::join(instr, "; ");
            JudgeReport jr = judge_scores(reference, edited, set, joined, judge, config.judge, config.judge_repeats);
            row.scores = jr.scores;
            const auto& bgm = row.background;
            json doc = {{"sample", id},
                        {"background",
                         {{"psnr", bgm.psnr},
                          {"mse", bgm.mse},
                          {"ssim", bgm.ssim ? json(*bgm.ssim) : json(nullptr)},
                          {"pixel_count", bgm.pixel_count},
                          {"mask_id", bgm.mask_id}}}};
            if (jr.scores) {
                doc["scores"] = {{"pf", jr.scores->pf},
                                 {"cons", jr.scores->cons},
                                 {"pq", jr.scores->pq},
                                 {"overall", overall_score(*jr.scores)},
                                 {"judge_retries", jr.retries}};
            } else {
                doc["scores"] = nullptr;
                doc["judge_note"] = jr.unavailable_reason;
            }
            write_json(config.out / "eval" / (id + ".json"), doc);
            out.rows.push_back(std::move(row));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::service && judge) throw;
            out.skipped.push_back(id + ": " + e.what());
        } catch (const json::exception& e) {
            out.skipped.push_back(id + ": malformed sample record (" + e.what() + ")");
        }
    }
    if (out.rows.empty()) {
        throw Error(ErrorKind::validation,
                    "no sample could be evaluated" + (out.skipped.empty() ? std::string() : ": " + out.skipped.front()), "eval");
    }
    fs::create_directories(config.out);
    {
        std::ofstream csv(config.out / "background.csv");
        csv << background_csv(out.rows);
    }
    const bool any_scores = std::any_of(out.rows.begin(), out.rows.end(), [](const EvalRow& r) { return r.scores.has_value(); });
    if (any_scores) {
        std::ofstream csv(config.out / "scores.csv");
        csv << scores_csv(out.rows);
    }
    double psnr = 0, mse = 0;
    for (const auto& r : out.rows) {
        psnr += r.background.psnr;
        mse += r.background.mse;
    }
    const double n = static_cast<double>(out.rows.size());
    write_json(config.out / "summary.json", {{"evaluated", out.rows.size()},
                                              {"skipped", out.skipped},
                                              {"mean_psnr", psnr / n},
                                              {"mean_mse", mse / n},
                                              {"judge_enabled", config.judge_enabled}});
    return out;
}

BenchBuildResult cmd_bench_build(int n, const RunConfig& config, Clients& clients) {
    config.validate();
    BoxFillSegmenter box_segmenter;
    std::unique_ptr<BridgeSegmenter> bridge_segmenter;
    BenchClients bc;
    bc.generator = &require(clients.generator, "generator");
    bc.judge = &require(clients.judge, "judge");
    bc.grounder = &require(clients.grounder, "grounder");
    bc.generator_config = config.generator;
    bc.judge_config = config.judge;
    bc.grounder_config = config.grounder;
    if (config.segmenter == "box") {
        bc.segmenter = &box_segmenter;
    } else {
        bridge_segmenter = std::make_unique<BridgeSegmenter>(bridge_url(config.segmenter));
        bc.segmenter = bridge_segmenter.get();
    }
    BenchBuildConfig bcfg;
    bcfg.n = n;
    bcfg.out_dir = config.out;
    bcfg.image_size = config.bench_image_size;
    return bench_build(bcfg, bc);
}

InspectOutcome cmd_inspect(const fs::path& run_dir) {
    const auto config_path = run_dir / "config.json";
    if (!fs::exists(config_path)) throw Error(ErrorKind::validation, "no config.json in " + run_dir.string());
    const auto cfg = RunConfig::load(config_path);
    if (!cfg.trace || !fs::exists(run_dir / "trace" / "manifest.json")) {
        throw Error(ErrorKind::validation,
                    "run has no trace; rerun with \"trace\": true in the config (or --trace)");
    }
    const auto manifest = read_json(run_dir / "trace" / "manifest.json");
    const auto& entries = manifest.at("entries");
    if (entries.empty()) throw Error(ErrorKind::validation, "trace manifest lists no steps");

    std::vector<PixelImage> tiles;
    for (const auto& e : entries) tiles.push_back(read_png(run_dir / "trace" / e.at("file").get<std::string>()));
    const int tw = static_cast<int>(tiles.front().width());
    const int th = static_cast<int>(tiles.front().height());
    const int border = 2;
    const int label_h = 9;
    const int label_w = 4 * 10 + 2;
    const int cell_w = std::max(tw + 2 * border, label_w) + 4;
    const int cell_h = th + 2 * border + label_h + 4;
    const int cols = std::min<int>(8, static_cast<int>(tiles.size()));
    const int rows = (static_cast<int>(tiles.size()) + cols - 1) / cols;
    PixelImage sheet(static_cast<std::size_t>(rows * cell_h), static_cast<std::size_t>(cols * cell_w), 1.0);
    const Rgb region_color{1.0, 140 / 255.0, 0.0};
    const Rgb global_color{40 / 255.0, 90 / 255.0, 1.0};

    InspectOutcome out;
    json sheet_entries = json::array();
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const auto& e = entries[i];
        const bool region = e.at("phase").get<std::string>() == "region";
        const int cx = static_cast<int>(i % static_cast<std::size_t>(cols)) * cell_w + 2;
        const int cy = static_cast<int>(i / static_cast<std::size_t>(cols)) * cell_h + 2;
        fill_rect(sheet, cx, cy, cx + tw + 2 * border, cy + th + 2 * border, region ? region_color : global_color);
        for (std::size_t c = 0; c < 3; ++c) {
            for (int y = 0; y < th; ++y) {
                for (int x = 0; x < tw; ++x) sheet.set(c, cy + border + y, cx + border + x, tiles[i].at(c, y, x));
            }
        }
        const double s = e.at("s").get<double>();
        draw_text(sheet, cx, cy + th + 2 * border + 2,
                  std::to_string(e.at("index").get<int>()) + " s=" + fixed(s, 2) + (region ? " r" : " g"));
        sheet_entries.push_back({{"index", e.at("index")}, {"s", s}, {"phase", region ? "region" : "global"}});
        ++out.tiles;
        (region ? out.region_tiles : out.global_tiles)++;
    }
    out.sheet_path = run_dir / "contact_sheet.png";
    write_png(out.sheet_path, sheet);
    write_json(run_dir / "contact_sheet.json", {{"tiles", sheet_entries},
                                                {"region_tiles", out.region_tiles},
                                                {"global_tiles", out.global_tiles}});
    return out;
}

void cmd_synth(const fs::path& out_png, const SceneSpec& spec) {
    const auto scene = make_square_scene(spec);
    write_png(out_png, scene.image);
    json objects = json::array();
    for (const auto& o : scene.objects) {
        objects.push_back({{"category", o.category},
                           {"shape", o.shape == SceneShape::square ? "square" : "disk"},
                           {"box", box_json(o.box)}});
    }
    auto sidecar = out_png;
    sidecar.replace_extension(".json");
    write_json(sidecar, {{"width", spec.width}, {"height", spec.height}, {"objects", objects}});
}

}  // namespace mirage
