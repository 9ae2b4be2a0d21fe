#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "mirage/error.hpp"

using namespace mirage;
using testing::make_region;
using testing::PoolingStub;
using testing::max_abs_diff;

namespace {

const char* kComposite = "set_color the leftmost square to (1,0,0); set_color the rightmost square to (0,0,1)";

struct Fixture {
    Scene scene = make_square_scene();
    BoundingBox left;
    BoundingBox right;

    Fixture() {
        const auto squares = scene.ordered("square");
        left = squares.front().box;
        right = squares.back().box;
    }

    std::vector<RegionInstance> regions() const {
        return {make_region(scene.image, left, "set_color to (1,0,0)"),
                make_region(scene.image, right, "set_color to (0,0,1)")};
    }
};

// Stand-in for a latent-diffusion backbone: f x f mean pooling, zero velocity.
SessionConfig config(double rho, Strategy strategy = Strategy::both, bool trace = false) {
    SessionConfig c;
    c.steps = 50;
    c.rho = rho;
    c.strategy = strategy;
    c.seed = 11;
    c.trace = trace;
    return c;
}

}  // namespace

TEST_CASE("K = 0 session keeps only the global branch") {
    Fixture fx;
    auto backend = std::make_shared<OracleBackend>();
    auto s = EditSession::init(fx.scene.image, "noop", {}, config(0.6), backend);
    CHECK(s.branches().size() == 1);
    CHECK(s.union_mask().count() == 0);
    for (int i = 0; i < s.region_steps(); ++i) {
        const auto fused = s.run_early_step(i);
        CHECK(fused == s.reference_at(s.time_grid().times[i + 1]));
    }
    CHECK(s.switch_to_global() == s.reference_at(0.6));
    while (!s.complete()) s.run_late_step(s.next_step());
    const auto r = s.finalize();
    CHECK(r.image == fx.scene.image);
    CHECK(r.report.region_phase_tokens == 0);
}

TEST_CASE("two disjoint regions start from crops of the same noise") {
    Fixture fx;
    auto s = EditSession::init(fx.scene.image, kComposite, fx.regions(), config(0.6), std::make_shared<OracleBackend>());
    REQUIRE(s.branches().size() == 3);
    CHECK(s.branches()[1].latent == crop_latent(s.noise(), fx.left, 1));
    CHECK(s.branches()[2].latent == crop_latent(s.noise(), fx.right, 1));
    CHECK(s.noise() == sample_noise(11, s.noise().shape()).grid);
}

TEST_CASE("duplicate boxes initialise identically and the later region wins") {
    Fixture fx;
    std::vector<RegionInstance> regions{make_region(fx.scene.image, fx.left, "set_color to (1,0,0)"),
                                        make_region(fx.scene.image, fx.left, "set_color to (0,1,0)")};
    auto s = EditSession::init(fx.scene.image, kComposite, regions, config(0.6), std::make_shared<OracleBackend>());
    CHECK(s.branches()[1].latent == s.branches()[2].latent);
    s.run_early_step(0);
    const auto fused_crop = crop_latent(s.fused(), fx.left, 1);
    CHECK(fused_crop == s.branches()[2].latent);
    CHECK_FALSE(fused_crop == s.branches()[1].latent);
}

TEST_CASE("whole-image region owns the fused latent") {
    Fixture fx;
    const BoundingBox all{0, 0, 64, 64};
    auto s = EditSession::init(fx.scene.image, "set_color to (1,0,0)",
                               {make_region(fx.scene.image, all, "set_color to (1,0,0)")}, config(0.6),
                               std::make_shared<OracleBackend>());
    for (int i = 0; i < 5; ++i) CHECK(s.run_early_step(i) == s.branches()[1].latent);
}

TEST_CASE("early fusion assembles cells from region and reference") {
    // 4x4 canvas, one 2x2 region; brute-force compositing of the two sources.
    PixelImage img(4, 4, 0.25);
    const BoundingBox box{2, 0, 4, 2};
    auto s = EditSession::init(img, "set_color to (0,1,0)", {make_region(img, box, "set_color to (0,1,0)")},
                               SessionConfig{4, 0.5, Strategy::both, 3, false, false},
                               std::make_shared<OracleBackend>());
    const auto fused = s.run_early_step(0);
    const auto ref = s.reference_at(0.75);
    const auto& region = s.branches()[1].latent;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 4; ++x) {
                const bool inside = y < 2 && x >= 2;
                const double expected = inside ? region.at(c, y, x - 2) : ref.at(c, y, x);
                CHECK(fused.at(c, y, x) == expected);
            }
}

TEST_CASE("phase and state errors") {
    Fixture fx;
    auto s = EditSession::init(fx.scene.image, kComposite, fx.regions(), config(0.6), std::make_shared<OracleBackend>());
    CHECK_THROWS_AS(s.run_late_step(0), Error);
    CHECK_THROWS_AS(s.switch_to_global(), Error);
    for (int i = 0; i < 20; ++i) s.run_early_step(i);
    CHECK(s.current_s() == doctest::Approx(0.6));
    try {
        s.run_early_step(20);
        FAIL("expected a phase error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::phase);
    }
    s.switch_to_global();
    try {
        s.switch_to_global();
        FAIL("expected a state error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::state);
    }
    try {
        s.run_early_step(20);
        FAIL("expected a phase error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::phase);
    }
    CHECK_THROWS_AS(s.finalize(), Error);
}

TEST_CASE("rho = 1 hands pure noise to the global branch") {
    Fixture fx;
    auto s = EditSession::init(fx.scene.image, kComposite, fx.regions(), config(1.0), std::make_shared<OracleBackend>());
    CHECK(s.region_steps() == 0);
    CHECK(s.switch_to_global() == s.noise());
}

TEST_CASE("K = 0 handoff is the reference latent at the switch") {
    Fixture fx;
    for (double rho : {0.2, 0.6, 0.8}) {
        auto s = EditSession::init(fx.scene.image, "noop", {}, config(rho), std::make_shared<OracleBackend>());
        while (s.next_step() < s.region_steps()) s.run_early_step(s.next_step());
        CHECK(s.switch_to_global() == s.reference_at(s.current_s()));
    }
}

TEST_CASE("background cells follow the reference at every step") {
    Fixture fx;
    auto s = EditSession::init(fx.scene.image, kComposite, fx.regions(), config(0.6, Strategy::both, true),
                               std::make_shared<OracleBackend>());
    s.run();
    const auto& u = s.union_mask();
    REQUIRE(s.trace().size() == 51);
    for (const auto& entry : s.trace()) {
        const auto ref = s.reference_at(entry.s);
        std::size_t mismatches = 0;
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < 64; ++y)
                for (std::size_t x = 0; x < 64; ++x)
                    if (!u.at(y, x) && entry.latent.at(c, y, x) != ref.at(c, y, x)) ++mismatches;
        CHECK(mismatches == 0);
    }
}

TEST_CASE("single recolor region lands on its target") {
    Fixture fx;
    auto backend = testing::anchored_oracle(11, fx.scene.image);
    auto s = EditSession::init(fx.scene.image, "set_color the leftmost square to (1,0,0)",
                               {make_region(fx.scene.image, fx.left, "set_color to (1,0,0)")}, config(0.6), backend);
    s.run();
    const auto out = s.finalize();
    const std::vector<BoundingBox> boxes{fx.left};
    double region_err = 0.0;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 64; ++y)
            for (std::size_t x = 0; x < 64; ++x) {
                if (testing::in_any(boxes, y, x)) {
                    region_err = std::max(region_err, std::abs(out.image.at(c, y, x) - (c == 0 ? 1.0 : 0.0)));
                } else {
                    CHECK(out.image.at(c, y, x) == fx.scene.image.at(c, y, x));
                }
            }
    CHECK(region_err <= 1e-9);
}

TEST_CASE("no_background and both agree on region cells") {
    Fixture fx;
    auto backend = testing::anchored_oracle(11, fx.scene.image);
    auto a = EditSession::init(fx.scene.image, kComposite, fx.regions(), config(0.6, Strategy::both), backend);
    auto b = EditSession::init(fx.scene.image, kComposite, fx.regions(), config(0.6, Strategy::no_background), backend);
    a.run();
    b.run();
    const auto ra = a.finalize();
    const auto rb = b.finalize();
    const auto& u = a.union_mask();
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 64; ++y)
            for (std::size_t x = 0; x < 64; ++x)
                if (u.at(y, x)) CHECK(ra.latent.at(c, y, x) == rb.latent.at(c, y, x));
}

TEST_CASE("parallel and sequential branches are bit-identical") {
    Fixture fx;
    auto backend = testing::anchored_oracle(11, fx.scene.image);
    auto cfg = config(0.6);
    auto a = EditSession::init(fx.scene.image, kComposite, fx.regions(), cfg, backend);
    cfg.parallel_branches = false;
    auto b = EditSession::init(fx.scene.image, kComposite, fx.regions(), cfg, backend);
    a.run();
    b.run();
    CHECK(a.finalize().latent == b.finalize().latent);
}

TEST_CASE("token accounting on a 1024 canvas with one 256 region") {
    PixelImage img(1024, 1024, 0.5);
    auto backend = std::make_shared<PoolingStub>(8, 2);
    const BoundingBox box{256, 256, 512, 512};
    auto s = EditSession::init(img, "set_color to (1,0,0)", {make_region(img, box, "set_color to (1,0,0)", 8)},
                               SessionConfig{50, 0.6, Strategy::both, 0, false, true}, backend);
    s.run();
    const auto r = s.finalize().report;
    CHECK(r.region_steps == 20);
    CHECK(r.region_tokens_per_step == std::vector<std::int64_t>{256});
    CHECK(r.global_tokens_per_step == 4096);
    CHECK(r.region_phase_tokens == 20 * 256);
    CHECK(r.baseline_region_phase_tokens == 20 * 4096);
    CHECK(r.global_phase_tokens == 30 * 4096);
    CHECK(r.total_tokens < r.baseline_total_tokens);
    CHECK(r.branch_token_sums == std::vector<std::int64_t>{30 * 4096, 20 * 256});
}

TEST_CASE("init validates region geometry") {
    Fixture fx;
    OracleOptions o;
    o.patch = 4;
    auto backend = std::make_shared<OracleBackend>(o);
    // 13 px wide: not a multiple of the patch.
    const BoundingBox odd{5, 26, 18, 38};
    CHECK_THROWS_AS(EditSession::init(fx.scene.image, kComposite, {make_region(fx.scene.image, odd, "noop")},
                                      config(0.6), backend),
                    Error);
    auto r = make_region(fx.scene.image, fx.left, "noop");
    r.mask = LatentMask(64, 64, true);
    CHECK_THROWS_AS(EditSession::init(fx.scene.image, kComposite, {r}, config(0.6), std::make_shared<OracleBackend>()),
                    Error);
    CHECK_THROWS_AS(EditSession::init(fx.scene.image, "", {}, config(0.6), std::make_shared<OracleBackend>()), Error);
}

TEST_CASE("same seed gives bit-identical output") {
    Fixture fx;
    auto run_once = [&] {
        auto s = EditSession::init(fx.scene.image, kComposite, fx.regions(), config(0.6),
                                   testing::anchored_oracle(11, fx.scene.image));
        s.run();
        return s.finalize();
    };
    const auto a = run_once();
    const auto b = run_once();
    CHECK(a.image == b.image);
    CHECK(a.latent == b.latent);
    CHECK(max_abs_diff(a.latent.values(), b.latent.values()) == 0.0);
}
