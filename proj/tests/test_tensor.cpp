#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mirage/error.hpp"
#include "mirage/tensor.hpp"

using namespace mirage;

TEST_CASE("noise is reproducible per seed") {
    const auto a = sample_noise(7, {1, 2, 2});
    const auto b = sample_noise(7, {1, 2, 2});
    REQUIRE(a.grid.values().size() == 4);
    CHECK(std::memcmp(a.grid.values().data(), b.grid.values().data(), 4 * sizeof(double)) == 0);
    CHECK(a.seed == 7);
}

TEST_CASE("different seeds give different noise") {
    const auto a = sample_noise(7, {1, 2, 2});
    const auto b = sample_noise(8, {1, 2, 2});
    bool differs = false;
    for (std::size_t i = 0; i < 4; ++i) differs = differs || a.grid.values()[i] != b.grid.values()[i];
    CHECK(differs);
}

TEST_CASE("noise is roughly standard normal") {
    const auto n = sample_noise(123, {3, 64, 64});
    double sum = 0.0;
    double sq = 0.0;
    for (double v : n.grid.values()) {
        CHECK(std::isfinite(v));
        sum += v;
        sq += v * v;
    }
    const double count = static_cast<double>(n.grid.values().size());
    const double mean = sum / count;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(sq / count - mean * mean - 1.0) < 0.05);
}

TEST_CASE("noise rejects empty shapes") {
    CHECK_THROWS_AS(sample_noise(1, {0, 2, 2}), Error);
    CHECK_THROWS_AS(sample_noise(1, {1, 0, 2}), Error);
}

TEST_CASE("lerp endpoints and midpoint") {
    const LatentGrid a({1, 2, 2}, std::vector<double>{0.1, 0.2, 0.3, 0.4});
    const LatentGrid b({1, 2, 2}, std::vector<double>{1.5, -2.0, 3.25, 7.0});
    CHECK(lerp(a, b, 0.0) == a);
    CHECK(lerp(a, b, 1.0) == b);
    const LatentGrid zeros({1, 2, 2}, 0.0);
    const LatentGrid twos({1, 2, 2}, 2.0);
    const auto mid = lerp(zeros, twos, 0.25);
    for (double v : mid.values()) CHECK(v == 0.5);
}

TEST_CASE("lerp rejects shape mismatch") {
    CHECK_THROWS_AS(lerp(LatentGrid({1, 2, 2}), LatentGrid({1, 2, 3}), 0.5), Error);
}

TEST_CASE("masked blend per cell") {
    const LatentGrid base({1, 2, 2}, 0.0);
    const LatentGrid overlay({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    CHECK(masked_blend(base, overlay, LatentMask(2, 2, false)) == base);
    CHECK(masked_blend(base, overlay, LatentMask(2, 2, true)) == overlay);

    const LatentMask diag(2, 2, std::vector<std::uint8_t>{1, 0, 0, 1});
    const auto out = masked_blend(base, overlay, diag);
    // Brute-force compositing.
    std::vector<double> expected(4);
    for (std::size_t i = 0; i < 4; ++i) expected[i] = diag.bits()[i] ? overlay.values()[i] : base.values()[i];
    CHECK(std::vector<double>(out.values().begin(), out.values().end()) == expected);
    CHECK(expected == std::vector<double>{1, 0, 0, 4});
}

TEST_CASE("masked blend switches all channels of a cell") {
    const LatentGrid base({3, 1, 2}, 0.0);
    const LatentGrid overlay({3, 1, 2}, 1.0);
    const LatentMask m(1, 2, std::vector<std::uint8_t>{0, 1});
    const auto out = masked_blend(base, overlay, m);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(out.at(c, 0, 0) == 0.0);
        CHECK(out.at(c, 0, 1) == 1.0);
    }
}

TEST_CASE("patch token count") {
    CHECK(patch_token_count(1024, 1024, 8, 2) == 4096);
    CHECK(patch_token_count(256, 256, 8, 2) == 256);
    CHECK(patch_token_count(16, 16, 1, 1) == 256);
    CHECK(patch_token_count(17, 16, 8, 2) == 2);
    CHECK_THROWS_AS(patch_token_count(0, 16, 1, 1), Error);
}

TEST_CASE("non-finite values are rejected") {
    LatentGrid g({1, 1, 2}, 0.0);
    g.check_finite();
    g.at(0, 0, 1) = std::nan("");
    CHECK_THROWS_AS(g.check_finite(), Error);
}

TEST_CASE("pixel image range") {
    PixelImage img(2, 2, 0.5);
    CHECK(img.shape() == GridShape{3, 2, 2});
    CHECK_THROWS_AS(img.set(0, 0, 0, 1.5), Error);
}
