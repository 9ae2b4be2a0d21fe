// mirage: region-aware image editing from the command line.

#include <cstdio>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "mirage/app.hpp"

namespace {

using namespace mirage;

struct CommonFlags {
    std::string config;
    std::string backend;
    int steps = 0;
    double rho = -1.0;
    std::string strategy;
    std::uint64_t seed = 0;
    bool trace = false;
    std::string mock;
    std::string out;
    int vae_factor = 0;
    int patch = 0;
    bool judge = false;
    std::string segmenter;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON config file; flags override it");
    cmd->add_option("--backend", f.backend, "oracle | bridge:<url>");
    cmd->add_option("--steps", f.steps, "Denoising steps T");
    cmd->add_option("--rho", f.rho, "Switch ratio in [0, 1]");
    cmd->add_option("--strategy", f.strategy, "both | no_target | no_background");
    cmd->add_option("--seed", f.seed, "Noise seed");
    cmd->add_flag("--trace", f.trace, "Record per-step latents");
    cmd->add_option("--mock", f.mock, "Directory of <role>.json transcripts (offline mode)");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--vae-factor", f.vae_factor, "Oracle codec factor (1 or 2)");
    cmd->add_option("--patch", f.patch, "Oracle patch size");
    cmd->add_flag("--judge", f.judge, "Ask the judge for PF/Cons/PQ scores");
    cmd->add_option("--segmenter", f.segmenter, "box | bridge:<url>");
}

RunConfig resolve(const CLI::App* cmd, const CommonFlags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
    auto given = [cmd](const char* name) { return cmd->count(name) > 0; };
    if (given("--backend")) c.backend = f.backend;
    if (given("--steps")) c.steps = f.steps;
    if (given("--rho")) c.rho = f.rho;
    if (given("--strategy")) c.strategy = parse_strategy(f.strategy);
    if (given("--seed")) c.seed = f.seed;
    if (given("--trace")) c.trace = true;
    if (given("--mock")) c.mock = f.mock;
    if (given("--out")) c.out = f.out;
    if (given("--vae-factor")) c.vae_factor = f.vae_factor;
    if (given("--patch")) c.patch = f.patch;
    if (given("--judge")) c.judge_enabled = true;
    if (given("--segmenter")) c.segmenter = f.segmenter;
    c.validate();
    return c;
}

int report_error(const Error& e) {
    std::cerr << "mirage: error";
    if (!e.stage().empty()) std::cerr << " [" << e.stage() << "]";
    std::cerr << " (" << to_string(e.kind()) << "): " << e.what() << "\n";
    if (const auto* ce = dynamic_cast<const ClientError*>(&e)) {
        std::cerr << "last model output after " << ce->attempts() << " attempt(s):\n" << ce->last_output() << "\n";
    }
    return exit_code_for(e);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mirage: multi-branch regional image editing"};
    app.require_subcommand(1);

    CommonFlags edit_flags;
    std::string edit_image;
    std::string edit_instruction;
    auto* edit = app.add_subcommand("edit", "Edit an image with a compositional instruction");
    edit->add_option("image", edit_image, "Input PNG");
    edit->add_option("instruction", edit_instruction, "Editing instruction");
    add_common(edit, edit_flags);

    CommonFlags eval_flags;
    std::string eval_manifest;
    std::string eval_results;
    auto* eval = app.add_subcommand("eval", "Background metrics and judge scores over a bench manifest");
    eval->add_option("manifest", eval_manifest, "manifest.json")->required();
    eval->add_option("results", eval_results, "Directory of edited images")->required();
    add_common(eval, eval_flags);

    CommonFlags bench_flags;
    int bench_n = 1;
    auto* bench = app.add_subcommand("bench-build", "Build a benchmark manifest");
    bench->add_option("-n,--count", bench_n, "Number of samples")->check(CLI::PositiveNumber);
    add_common(bench, bench_flags);

    std::string inspect_dir;
    auto* inspect = app.add_subcommand("inspect", "Contact sheet of a traced run");
    inspect->add_option("run_dir", inspect_dir, "Run directory")->required();

    std::string synth_out;
    SceneSpec synth_spec;
    int synth_size = 64;
    auto* synth = app.add_subcommand("synth", "Write a synthetic square scene");
    synth->add_option("out", synth_out, "Output PNG")->required();
    synth->add_option("--size", synth_size, "Width and height in pixels");
    synth->add_option("--instances", synth_spec.instance_count, "Repeated squares (1-5)");
    synth->add_option("--extras", synth_spec.extra_count, "Extra disks (0-2)");

    std::string check_url;
    auto* check = app.add_subcommand("bridge-check", "Run the bridge conformance suite");
    check->add_option("url", check_url, "Bridge base URL")->required();

    int stub_port = 8765;
    auto* stub = app.add_subcommand("bridge-stub", "Serve the in-process echo bridge until interrupted");
    stub->add_option("--port", stub_port, "Port on 127.0.0.1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*edit) {
            auto cfg = resolve(edit, edit_flags);
            const std::string image = edit_image.empty() && cfg.image ? cfg.image->string() : edit_image;
            const std::string instruction = edit_instruction.empty() && cfg.instruction ? *cfg.instruction : edit_instruction;
            if (image.empty() || instruction.empty()) {
                throw Error(ErrorKind::validation, "edit needs an image and an instruction (arguments or config)");
            }
            auto clients = make_clients(cfg);
            const auto out = cmd_edit(image, instruction, cfg, clients);
            std::cout << "wrote " << out.image_path.string() << " (" << out.regions.size() << " region(s), "
                      << out.report.region_steps << " region steps, " << out.report.total_tokens << " tokens)\n";
            return kExitOk;
        }
        if (*eval) {
            auto cfg = resolve(eval, eval_flags);
            auto clients = make_clients(cfg);
            const auto out = cmd_eval(eval_manifest, eval_results, cfg, clients);
            std::cout << "evaluated " << out.rows.size() << " sample(s) into " << out.out_dir.string() << "\n";
            for (const auto& s : out.skipped) std::cerr << "skipped " << s << "\n";
            return out.skipped.empty() ? kExitOk : kExitPartial;
        }
        if (*bench) {
            auto cfg = resolve(bench, bench_flags);
            auto clients = make_clients(cfg);
            const auto out = cmd_bench_build(bench_n, cfg, clients);
            std::cout << "built " << out.built << "/" << bench_n << " sample(s); manifest " << out.manifest_path.string() << "\n";
            for (const auto& f : out.failures) std::cerr << "failed " << f << "\n";
            if (out.built == 0) return kExitValidation;
            return out.failures.empty() ? kExitOk : kExitPartial;
        }
        if (*inspect) {
            const auto out = cmd_inspect(inspect_dir);
            std::cout << "wrote " << out.sheet_path.string() << " (" << out.tiles << " tiles: " << out.region_tiles
                      << " region, " << out.global_tiles << " global)\n";
            return kExitOk;
        }
        if (*synth) {
            synth_spec.width = synth_size;
            synth_spec.height = synth_size;
            cmd_synth(synth_out, synth_spec);
            std::cout << "wrote " << synth_out << "\n";
            return kExitOk;
        }
        if (*check) {
            const auto checks = run_bridge_conformance(check_url);
            bool ok = true;
            for (const auto& c : checks) {
                std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
                ok = ok && c.passed;
            }
            return ok ? kExitOk : kExitService;
        }
        if (*stub) {
            EchoBridgeServer server;
            server.start(stub_port);
            std::cout << "echo bridge on " << server.url() << "\n" << std::flush;
            while (true) std::this_thread::sleep_for(std::chrono::hours(1));
        }
    } catch (const Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << "mirage: error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
