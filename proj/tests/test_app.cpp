#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <iterator>

#include "helpers.hpp"
#include "mirage/app.hpp"

using namespace mirage;
using nlohmann::json;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

const char* kComposite = "set_color the leftmost square to (1,0,0); set_color the rightmost square to (0,0,1)";

RunConfig mock_config(const TempDir& dir, const std::string& sub) {
    RunConfig c;
    c.mock = dir.path() / "mock";
    fs::create_directories(*c.mock);
    c.out = dir.path() / sub;
    return c;
}

fs::path write_scene(const TempDir& dir) {
    const auto path = dir.path() / "scene.png";
    cmd_synth(path, {});
    return path;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

json without_timings(json report) {
    report.erase("timings");
    return report;
}

}  // namespace

TEST_CASE("run config json") {
    RunConfig c;
    c.steps = 12;
    c.rho = 0.25;
    c.strategy = Strategy::no_target;
    c.seed = 99;
    c.judge_enabled = true;
    c.instruction = "noop";
    const auto back = RunConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.strategy == Strategy::no_target);

    CHECK(RunConfig::from_json(json::object()).to_json() == RunConfig{}.to_json());
    CHECK_THROWS_AS(RunConfig::from_json(json{{"stpes", 10}}), Error);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"judge", {{"enable", true}}}}), Error);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"rho", 1.5}}), Error);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"backend", "torch"}}), Error);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"steps", "many"}}), Error);
}

TEST_CASE("edit recolors exactly the two grounded squares") {
    TempDir dir("app-edit");
    const auto png = write_scene(dir);
    auto cfg = mock_config(dir, "run");
    auto clients = make_clients(cfg);
    const auto out = cmd_edit(png, kComposite, cfg, clients);

    const auto scene = make_square_scene();
    REQUIRE(out.regions.size() == 2);
    const auto squares = scene.ordered("square");
    CHECK(out.regions[0].aligned == squares[0].box);
    CHECK(out.regions[1].aligned == squares[2].box);
    const std::vector<BoundingBox> boxes{squares[0].box, squares[2].box};

    const auto written = read_png(out.image_path);
    CHECK(written == decode_png(encode_png(out.image)));
    for (std::size_t y = 0; y < 64; ++y) {
        for (std::size_t x = 0; x < 64; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double got = written.at(c, y, x);
                if (testing::in_any({boxes[0]}, y, x)) {
                    CHECK(got == (c == 0 ? 1.0 : 0.0));
                } else if (testing::in_any({boxes[1]}, y, x)) {
                    CHECK(got == (c == 2 ? 1.0 : 0.0));
                } else if (got != scene.image.at(c, y, x)) {
                    FAIL("pixel outside the regions changed at " << y << "," << x);
                }
            }
        }
    }
    CHECK(out.report.region_steps == 20);
    CHECK(out.report_json["run"]["total_tokens"] == out.report.total_tokens);
    CHECK(fs::exists(cfg.out / "config.json"));
    const auto replay = RunConfig::load(cfg.out / "config.json");
    CHECK(replay.instruction == std::string(kComposite));
}

TEST_CASE("noop leaves the image bit-identical") {
    TempDir dir("app-noop");
    const auto png = write_scene(dir);
    auto cfg = mock_config(dir, "run");
    auto clients = make_clients(cfg);
    const auto out = cmd_edit(png, "noop", cfg, clients);
    CHECK(out.regions.empty());
    CHECK(read_png(out.image_path) == read_png(png));
}

TEST_CASE("edit errors carry their stage") {
    TempDir dir("app-errors");
    const auto png = write_scene(dir);
    auto cfg = mock_config(dir, "run");
    cfg.backend = "bridge:http://127.0.0.1:1";
    auto clients = make_clients(cfg);
    try {
        cmd_edit(png, kComposite, cfg, clients);
        FAIL("expected a service error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::service);
        CHECK(e.stage() == "backend");
        CHECK(exit_code_for(e) == kExitService);
    }

    cfg.backend = "oracle";
    try {
        cmd_edit(png, "make everything nicer", cfg, clients);
        FAIL("expected a parse failure");
    } catch (const Error& e) {
        CHECK(e.stage() == "parse");
    }
    try {
        cmd_edit(dir.path() / "missing.png", kComposite, cfg, clients);
        FAIL("expected an input failure");
    } catch (const Error& e) {
        CHECK(e.stage() == "input");
    }

    RunConfig live;
    live.out = dir.path() / "live";
    auto none = make_clients(live);
    CHECK(none.parser == nullptr);
    CHECK_THROWS_AS(cmd_edit(png, kComposite, live, none), Error);
}

TEST_CASE("edit runs are reproducible") {
    TempDir dir("app-determinism");
    const auto png = write_scene(dir);
    auto a_cfg = mock_config(dir, "a");
    auto b_cfg = mock_config(dir, "b");
    a_cfg.trace = b_cfg.trace = true;
    auto ca = make_clients(a_cfg);
    auto cb = make_clients(b_cfg);
    const auto a = cmd_edit(png, kComposite, a_cfg, ca);
    const auto b = cmd_edit(png, kComposite, b_cfg, cb);
    CHECK(slurp(a.image_path) == slurp(b.image_path));
    CHECK(without_timings(a.report_json) == without_timings(b.report_json));
    CHECK(slurp(a_cfg.out / "trace" / "step_050.png") == slurp(b_cfg.out / "trace" / "step_050.png"));
}

TEST_CASE("inspect contact sheet") {
    TempDir dir("app-inspect");
    const auto png = write_scene(dir);
    auto cfg = mock_config(dir, "run");
    cfg.steps = 4;
    cfg.rho = 0.5;
    cfg.trace = true;
    auto clients = make_clients(cfg);
    cmd_edit(png, kComposite, cfg, clients);
    const auto sheet = cmd_inspect(cfg.out);
    CHECK(sheet.tiles == 5);
    CHECK(sheet.region_tiles == 2);
    CHECK(sheet.global_tiles == 3);
    CHECK(fs::exists(sheet.sheet_path));

    auto plain = mock_config(dir, "plain");
    cmd_edit(png, kComposite, plain, clients);
    try {
        cmd_inspect(plain.out);
        FAIL("expected a validation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::validation);
        CHECK(std::string(e.what()).find("\"trace\": true") != std::string::npos);
    }
}

TEST_CASE("bench build and eval in mock mode") {
    TempDir dir("app-bench");
    auto cfg = mock_config(dir, "bench");
    cfg.bench_image_size = 96;
    auto clients = make_clients(cfg);
    const auto built = cmd_bench_build(2, cfg, clients);
    REQUIRE(built.built == 2);
    CHECK(built.failures.empty());
    const auto manifest = json::parse(slurp(built.manifest_path));
    REQUIRE(manifest["samples"].size() == 2);

    // Submitting the references unchanged gives a perfect background.
    const auto results = dir.path() / "results";
    fs::create_directories(results);
    for (const auto& entry : manifest["samples"]) {
        const auto sample = json::parse(slurp(cfg.out / entry["path"].get<std::string>()));
        fs::copy_file(cfg.out / sample["image_path"].get<std::string>(),
                      results / (entry["id"].get<std::string>() + ".png"));
    }
    auto eval_cfg = mock_config(dir, "eval");
    auto eval_clients = make_clients(eval_cfg);
    const auto ev = cmd_eval(built.manifest_path, results, eval_cfg, eval_clients);
    REQUIRE(ev.rows.size() == 2);
    CHECK(ev.skipped.empty());
    for (const auto& row : ev.rows) {
        CHECK(row.background.mse == 0.0);
        CHECK(row.background.psnr == 100.0);
        CHECK_FALSE(row.scores.has_value());
    }
    CHECK(fs::exists(eval_cfg.out / "background.csv"));
    CHECK_FALSE(fs::exists(eval_cfg.out / "scores.csv"));

    auto judged = mock_config(dir, "judged");
    judged.judge_enabled = true;
    auto judged_clients = make_clients(judged);
    const auto jv = cmd_eval(built.manifest_path, results, judged, judged_clients);
    for (const auto& row : jv.rows) {
        REQUIRE(row.scores.has_value());
        CHECK(row.scores->pf == doctest::Approx(8.0));
    }
    CHECK(fs::exists(judged.out / "scores.csv"));

    auto empty_cfg = mock_config(dir, "empty");
    CHECK_THROWS_AS(cmd_eval(built.manifest_path, dir.path() / "nowhere", empty_cfg, eval_clients), Error);
}
