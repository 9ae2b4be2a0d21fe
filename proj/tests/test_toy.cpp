#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "mirage/error.hpp"

using namespace mirage;

namespace {

PixelImage checker(std::size_t n) {
    PixelImage img(n, n);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) img.set(c, y, x, static_cast<double>((x + y) % 2));
    return img;
}

bool solid(const PixelImage& img, Rgb rgb) {
    const double v[3] = {rgb.r, rgb.g, rgb.b};
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < img.height(); ++y)
            for (std::size_t x = 0; x < img.width(); ++x)
                if (img.at(c, y, x) != v[c]) return false;
    return true;
}

}  // namespace

TEST_CASE("grammar") {
    const auto ops = parse_toy_instruction("set_color the left mug to (1, 0.5, 0); remove it; replace x with checker; noop");
    REQUIRE(ops.size() == 4);
    CHECK(ops[0].op == ToyOpKind::set_color);
    CHECK(ops[0].color == Rgb{1.0, 0.5, 0.0});
    CHECK(ops[0].subject == "the left mug");
    CHECK(ops[1].op == ToyOpKind::remove);
    CHECK(ops[2].op == ToyOpKind::replace_pattern);
    CHECK(ops[2].pattern == "checker");
    CHECK(ops[3].op == ToyOpKind::noop);
}

TEST_CASE("grammar errors name the clause") {
    try {
        parse_toy_instruction("noop; paint it red");
        FAIL("expected a grammar error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::grammar);
        CHECK(std::string(e.what()).find("clause 1") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_toy_instruction(""), Error);
    CHECK_THROWS_AS(parse_toy_instruction("set_color to (2,0,0)"), Error);
    CHECK_THROWS_AS(parse_toy_instruction("replace it with plaid"), Error);
}

TEST_CASE("noop detection") {
    CHECK(is_noop_instruction("noop"));
    CHECK(is_noop_instruction("noop; noop"));
    CHECK_FALSE(is_noop_instruction("noop; remove it"));
    CHECK_FALSE(is_noop_instruction("gibberish"));
}

TEST_CASE("ops on a crop") {
    const auto base = checker(6);
    CHECK(solid(apply_toy_op(parse_toy_instruction("set_color to (1,0,0)").front(), base), {1, 0, 0}));
    CHECK(apply_toy_op(ToyEditOp{}, base) == base);
    const auto scene = make_square_scene();
    const auto removed = apply_toy_op(parse_toy_instruction("remove the square").front(), scene.image);
    CHECK(solid(removed, scene.background));
}

TEST_CASE("composite instruction realizes only its first clause") {
    const auto base = checker(4);
    const auto t = resolve_target(Condition{base, "set_color to (0,1,0); noop"}, base);
    CHECK(solid(t, {0, 1, 0}));
    CHECK_THROWS_AS(resolve_target(Condition{base, "bogus"}, base), Error);
}

TEST_CASE("codecs") {
    const PixelImage flat(8, 8, 0.4);
    CHECK(decode_latent(encode_pixels(flat, 1), 1) == flat);
    CHECK(decode_latent(encode_pixels(flat, 2), 2) == flat);
    const auto lat = encode_pixels(checker(8), 2);
    CHECK(lat.shape() == GridShape{3, 4, 4});
    for (double v : lat.values()) CHECK(v == 0.5);
    CHECK(solid(decode_latent(lat, 2), {0.5, 0.5, 0.5}));
    CHECK_THROWS_AS(encode_pixels(PixelImage(3, 4, 0.0), 2), Error);
}

TEST_CASE("velocity vanishes at the target") {
    OracleBackend oracle;
    const auto base = checker(4);
    const Condition cond{base, "set_color to (0.2,0.4,0.6)"};
    const auto target = oracle.encode(resolve_target(cond, base));
    for (double s : {1.0, 0.5, 0.02}) {
        const auto v = oracle.predict_velocity(target, s, cond);
        CHECK(v == LatentGrid(target.shape(), 0.0));
    }
}

TEST_CASE("Euler from noise lands on the target") {
    OracleBackend oracle;
    const auto base = checker(6);
    for (const char* instr : {"set_color to (0.2,0.4,0.6)", "replace it with hstripes", "noop"}) {
        const Condition cond{base, instr};
        const auto target = oracle.encode(resolve_target(cond, base));
        for (int steps : {1, 4, 50}) {
            const auto grid = make_time_grid(steps);
            auto z = sample_noise(9, target.shape()).grid;
            for (int i = 0; i < steps; ++i) {
                z = euler_step(z, oracle.predict_velocity(z, grid.times[i], cond), grid.step_size(i));
            }
            CHECK(testing::max_abs_diff(z.values(), target.values()) <= 1e-12);
        }
    }
}

TEST_CASE("anchored oracle keeps the implied clean image below the horizon") {
    const auto base = checker(4);
    const GridShape shape{3, 4, 4};
    OracleOptions o;
    o.anchor = NoiseAnchor{5, shape};
    OracleBackend anchored(o);
    OracleBackend plain;
    const auto eps = sample_noise(5, shape).grid;
    const Condition cond{base, "set_color to (1,0,0)"};
    const auto x = plain.encode(base);
    // Above the horizon the conditional velocity is used.
    const auto z_hi = reference_latent(x, eps, 0.8);
    CHECK(anchored.predict_velocity(z_hi, 0.8, cond) == plain.conditional_velocity(z_hi, 0.8, cond));
    // Below it, Euler stays on the line through x.
    const auto grid = make_time_grid(10);
    auto z = reference_latent(x, eps, 0.6);
    for (int i = 4; i < 10; ++i) z = euler_step(z, anchored.predict_velocity(z, grid.times[i], cond), grid.step_size(i));
    CHECK(testing::max_abs_diff(z.values(), x.values()) <= 1e-12);
    CHECK(anchored.descriptor().name == "oracle-anchored");
}

TEST_CASE("oracle options are validated") {
    OracleOptions o;
    o.vae_factor = 3;
    CHECK_THROWS_AS(OracleBackend{o}, Error);
    o.vae_factor = 1;
    o.semantic_horizon = 1.0;
    CHECK_THROWS_AS(OracleBackend{o}, Error);
}

TEST_CASE("synthetic scene geometry") {
    const auto scene = make_square_scene();
    const auto squares = scene.ordered("square");
    REQUIRE(squares.size() == 3);
    CHECK(squares[0].box == BoundingBox{5, 26, 17, 38});
    CHECK(squares[1].box == BoundingBox{26, 26, 38, 38});
    CHECK(squares[2].box == BoundingBox{47, 26, 59, 38});
    const auto comps = find_components(scene.image);
    REQUIRE(comps.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(comps[i].box == squares[i].box);
}
