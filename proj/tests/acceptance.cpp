// mirage_acceptance: one PASS/FAIL line per acceptance criterion. Exits 1 if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include "corpus.hpp"
#include "helpers.hpp"
#include "mirage/app.hpp"

using namespace mirage;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kComposite = "set_color the leftmost square to (1,0,0); set_color the rightmost square to (0,0,1)";

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

RunConfig mock_config(const testing::TempDir& dir, const std::string& sub) {
    RunConfig c;
    c.mock = dir.path() / "mock";
    fs::create_directories(*c.mock);
    c.out = dir.path() / sub;
    return c;
}

struct EditRun {
    EditOutcome outcome;
    double seconds = 0.0;
};

EditRun run_edit(const testing::TempDir& dir, const std::string& sub, double rho, Strategy strategy) {
    const auto png = dir.path() / "scene.png";
    if (!fs::exists(png)) cmd_synth(png, {});
    auto cfg = mock_config(dir, sub);
    cfg.rho = rho;
    cfg.strategy = strategy;
    auto clients = make_clients(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    EditRun r{cmd_edit(png, kComposite, cfg, clients), 0.0};
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// Largest deviation inside `box` from the toy target of `edit`.
double region_error(const PixelImage& image, const PixelImage& reference, const BoundingBox& box, const std::string& edit) {
    const auto ref_crop = crop(reference, box);
    const auto target = resolve_target({ref_crop, edit}, ref_crop);
    return testing::max_abs_diff(crop(image, box).values(), target.values());
}

// Pixels outside every box that differ from the reference.
std::size_t background_changes(const PixelImage& image, const PixelImage& reference, const std::vector<BoundingBox>& boxes) {
    std::size_t n = 0;
    for (std::size_t y = 0; y < image.height(); ++y)
        for (std::size_t x = 0; x < image.width(); ++x) {
            if (testing::in_any(boxes, y, x)) continue;
            for (std::size_t c = 0; c < 3; ++c) n += image.at(c, y, x) != reference.at(c, y, x);
        }
    return n;
}

std::vector<BoundingBox> boxes_of(const EditOutcome& o) {
    std::vector<BoundingBox> b;
    for (const auto& r : o.regions) b.push_back(r.aligned);
    return b;
}

int realized_clauses(const EditOutcome& o) {
    int n = 0;
    for (const auto& r : o.regions) n += region_error(o.image, o.reference, r.aligned, r.pair.edit) <= 1e-9;
    return n;
}

Verdict background_exactness() {
    testing::TempDir dir("acc-bg");
    const auto run = run_edit(dir, "run", 0.6, Strategy::both);
    const auto& o = run.outcome;
    const auto boxes = boxes_of(o);
    const auto in_memory = background_changes(o.image, o.reference, boxes);
    const auto in_png = background_changes(read_png(o.image_path), read_png(dir.path() / "scene.png"), boxes);
    std::ostringstream d;
    d << "K=" << boxes.size() << ", changed background values: " << in_memory << " in memory, " << in_png
      << " in PNG, " << run.seconds << " s";
    return {boxes.size() == 2 && in_memory == 0 && in_png == 0 && run.seconds < 1.0, d.str()};
}

Verdict regional_fidelity() {
    testing::TempDir dir("acc-fidelity");
    const auto run = run_edit(dir, "run", 0.6, Strategy::both);
    double worst = 0.0;
    for (const auto& r : run.outcome.regions)
        worst = std::max(worst, region_error(run.outcome.image, run.outcome.reference, r.aligned, r.pair.edit));
    std::ostringstream d;
    d << "max |region - target| = " << worst << ", " << run.seconds << " s";
    return {run.outcome.regions.size() == 2 && worst <= 1e-9 && run.seconds < 1.0, d.str()};
}

Verdict baseline_over_editing() {
    testing::TempDir dir("acc-baseline");
    const int global_only = realized_clauses(run_edit(dir, "global", 1.0, Strategy::no_background).outcome);
    const int defaults = realized_clauses(run_edit(dir, "defaults", 0.6, Strategy::both).outcome);
    const int rho0 = realized_clauses(run_edit(dir, "rho0", 0.0, Strategy::no_background).outcome);
    std::ostringstream d;
    d << "clauses realized: single global branch (rho=1, no_background) " << global_only << "/2, defaults " << defaults
      << "/2; rho=0 no_background " << rho0 << "/2";
    return {global_only == 1 && defaults == 2, d.str()};
}

Verdict overall_arithmetic() {
    const double a = overall_score({8.086, 9.006, 8.808});
    const double b = overall_score({6.046, 8.646, 8.988});
    std::ostringstream d;
    d << a << " vs 8.439, " << b << " vs 7.372";
    return {std::abs(a - 8.439) <= 5e-4 && std::abs(b - 7.372) <= 5e-4, d.str()};
}

Verdict rho_phase_accounting() {
    const auto grid = make_time_grid(50);
    bool ok = true;
    std::ostringstream d;
    std::vector<int> counts;
    for (double rho : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        const int n = region_step_count(grid, SwitchPolicy::checked(rho));
        counts.push_back(n);
        ok = ok && n == static_cast<int>(std::lround(50 * (1 - rho)));
        d << "rho=" << rho << ":" << n << " ";
    }
    std::sort(counts.begin(), counts.end());
    ok = ok && counts == std::vector<int>{0, 10, 20, 30, 40, 50};
    return {ok, d.str()};
}

Verdict token_savings() {
    const PixelImage canvas(1024, 1024, 0.5);
    auto backend = std::make_shared<testing::PoolingStub>(8, 2);
    auto s = EditSession::init(canvas, "set_color to (1,0,0)",
                               {testing::make_region(canvas, {256, 256, 512, 512}, "set_color to (1,0,0)", 8)},
                               SessionConfig{50, 0.6, Strategy::both, 0, false, true}, backend);
    s.run();
    const auto r = s.finalize().report;
    bool ok = r.region_phase_tokens == 20 * 256 && r.baseline_region_phase_tokens == 20 * 4096 &&
              r.region_phase_tokens < r.baseline_region_phase_tokens;

    // Sub-canvas regions on the square scene, every switch ratio with a region stage.
    testing::TempDir dir("acc-tokens");
    for (double rho : {0.0, 0.2, 0.4, 0.6, 0.8}) {
        const auto o = run_edit(dir, "rho" + std::to_string(rho), rho, Strategy::both).outcome;
        ok = ok && o.report.region_phase_tokens < o.report.baseline_region_phase_tokens;
    }
    std::ostringstream d;
    d << "1024^2 with one 256^2 region: " << r.region_phase_tokens << " vs " << r.baseline_region_phase_tokens;
    return {ok, d.str()};
}

Verdict strategy_ablation() {
    const auto scene = make_square_scene();
    const auto squares = scene.ordered("square");
    const std::vector<BoundingBox> boxes{squares.front().box, squares.back().box};
    const std::vector<std::string> edits{"set_color to (1,0,0)", "set_color to (0,0,1)"};
    std::map<Strategy, std::pair<bool, bool>> props;  // {regions on target, background exact}
    for (auto strategy : {Strategy::both, Strategy::no_target, Strategy::no_background}) {
        std::vector<RegionInstance> regions;
        for (std::size_t k = 0; k < 2; ++k) regions.push_back(testing::make_region(scene.image, boxes[k], edits[k]));
        auto s = EditSession::init(scene.image, kComposite, regions, SessionConfig{50, 0.6, strategy, 5, false, true},
                                   testing::anchored_oracle(5, scene.image));
        s.run();
        const auto img = s.finalize().image;
        bool on_target = true;
        for (std::size_t k = 0; k < 2; ++k) on_target = on_target && region_error(img, scene.image, boxes[k], edits[k]) <= 1e-9;
        props[strategy] = {on_target, background_changes(img, scene.image, boxes) == 0};
    }
    auto fmt = [&](Strategy st) {
        return to_string(st) + "(fidelity " + (props[st].first ? "yes" : "no") + ", background " +
               (props[st].second ? "exact" : "drifted") + ")";
    };
    const bool ok = props[Strategy::both] == std::pair{true, true} && !props[Strategy::no_target].first &&
                    props[Strategy::no_target].second && props[Strategy::no_background].first;
    return {ok, fmt(Strategy::both) + " " + fmt(Strategy::no_target) + " " + fmt(Strategy::no_background)};
}

Verdict metrics_suite() {
    const auto scene = make_square_scene();
    const auto boxes = std::vector<BoundingBox>{scene.ordered("square").front().box};
    const MaskSet masks(64, 64, {rasterize_box(boxes[0], 64, 64)});
    const auto same = background_metrics(scene.image, scene.image, masks);
    bool ok = same.mse == 0.0 && same.psnr == 100.0 && same.ssim && *same.ssim == 1.0;

    const auto shift = background_metrics(PixelImage(64, 64, 0.5), PixelImage(64, 64, 0.6), masks);
    ok = ok && std::abs(shift.psnr - 20.0) <= 1e-9;

    auto edited = scene.image;
    for (std::size_t y = boxes[0].y0; y < static_cast<std::size_t>(boxes[0].y1); ++y)
        for (std::size_t x = boxes[0].x0; x < static_cast<std::size_t>(boxes[0].x1); ++x) edited.set(1, y, x, 0.0);
    const auto inside = background_metrics(scene.image, edited, masks);
    ok = ok && inside.mse == same.mse && inside.psnr == same.psnr && inside.ssim == same.ssim;
    std::ostringstream d;
    d << "identical mse " << same.mse << " psnr " << same.psnr << " ssim " << same.ssim.value_or(-1) << "; +0.1 psnr "
      << shift.psnr << "; masked edit psnr " << inside.psnr;
    return {ok, d.str()};
}

Verdict parser_properties() {
    const auto cases = testing::corpus();
    EchoChatClient echo;
    ChatClientConfig cfg;
    int agree = 0;
    int substring_ok = 0;
    int pairs = 0;
    for (const auto& c : cases) {
        const auto stub = stub_decompose(c.instruction);
        const auto mocked = decompose(c.instruction, echo, cfg);
        agree += stub.pairs == mocked.pairs && stub.pairs == c.expected;
        for (const auto& p : mocked.pairs) {
            ++pairs;
            substring_ok += c.instruction.find(p.refer) != std::string::npos;
        }
    }
    bool budget_ok = true;
    for (int retries = 0; retries <= 4; ++retries) {
        ChatClientConfig c;
        c.max_retries = retries;
        c.escalation.resize(std::min<std::size_t>(c.escalation.size(), static_cast<std::size_t>(retries)));
        ScriptedChatClient always_bad({"not json"}, true);
        try {
            decompose("remove the leftmost cat", always_bad, c);
            budget_ok = false;
        } catch (const ClientError& e) {
            budget_ok = budget_ok && e.attempts() == retries + 1;
        }
    }
    std::ostringstream d;
    d << agree << "/" << cases.size() << " stub/mock agreement, " << substring_ok << "/" << pairs
      << " referents are substrings, retry budget " << (budget_ok ? "respected" : "exceeded");
    return {agree == static_cast<int>(cases.size()) && substring_ok == pairs && budget_ok, d.str()};
}

Verdict bench_policy() {
    testing::TempDir dir("acc-bench");
    auto cfg = mock_config(dir, "bench");
    cfg.bench_image_size = 96;
    auto clients = make_clients(cfg);
    const auto built = cmd_bench_build(8, cfg, clients);
    const auto manifest = json::parse(slurp(built.manifest_path));
    bool ok = built.built == 8 && manifest["instance_count_histogram"] == json{{"3", 4}, {"4", 2}, {"5", 2}};
    int bound = 0;
    for (const auto& entry : manifest["samples"]) {
        const auto sample = json::parse(slurp(cfg.out / entry["path"].get<std::string>()));
        const int count = sample["instance_count"];
        ok = ok && sample["instructions"].size() == kInstructionsPerSample;
        const auto scene = make_square_scene({96, 96, count, sample["pair"]["category"].get<std::string>(), 2, "ball"});
        const auto ordered = scene.ordered(sample["pair"]["category"].get<std::string>());
        for (int k = 0; k < count; ++k) {
            const auto& b = ordered[static_cast<std::size_t>(k)].box;
            const bool same = sample["boxes"][k] == json{b.x0, b.y0, b.x1, b.y1} &&
                              sample["targets"][k] == sample["slot_plan"]["ordered_instances"][k];
            ok = ok && same;
            bound += same;
        }
    }
    std::ostringstream d;
    d << built.built << " samples, histogram " << manifest["instance_count_histogram"].dump() << ", " << bound
      << " instance instructions bound left to right";
    return {ok, d.str()};
}

Verdict determinism() {
    testing::TempDir dir("acc-determinism");
    const auto a = run_edit(dir, "a", 0.6, Strategy::both).outcome;
    const auto b = run_edit(dir, "b", 0.6, Strategy::both).outcome;
    auto ra = a.report_json;
    auto rb = b.report_json;
    ra.erase("timings");
    rb.erase("timings");
    const bool images = slurp(a.image_path) == slurp(b.image_path);
    const bool reports = ra == rb;
    return {images && reports, std::string("images ") + (images ? "identical" : "differ") + ", reports " +
                                   (reports ? "identical" : "differ") + " (timings excluded)"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"background exactness", background_exactness},
        {"regional fidelity", regional_fidelity},
        {"baseline over-editing", baseline_over_editing},
        {"overall-score arithmetic", overall_arithmetic},
        {"rho-phase accounting", rho_phase_accounting},
        {"token savings", token_savings},
        {"strategy ablation", strategy_ablation},
        {"metrics suite", metrics_suite},
        {"parser properties", parser_properties},
        {"bench policy", bench_policy},
        {"determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += !v.pass;
        std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << "\n";
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
