#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>

#include "corpus.hpp"
#include "helpers.hpp"
#include "mirage/orchestrator.hpp"

using namespace mirage;
using nlohmann::json;

namespace {

ChatClientConfig quiet(int max_retries = 3) {
    ChatClientConfig c;
    c.max_retries = max_retries;
    c.escalation.resize(std::min<std::size_t>(3, static_cast<std::size_t>(max_retries)));
    return c;
}

}  // namespace

TEST_CASE("stub and mock agree on the corpus") {
    const auto cases = testing::corpus();
    REQUIRE(cases.size() == 50);
    EchoChatClient echo;
    for (const auto& c : cases) {
        CAPTURE(c.instruction);
        const auto stub = stub_decompose(c.instruction);
        CHECK(stub.pairs == c.expected);
        const auto mocked = decompose(c.instruction, echo, quiet());
        CHECK(mocked.pairs == stub.pairs);
        CHECK(mocked.retries == 0);
        ScriptedChatClient scripted({pairs_to_json(c.expected).dump()});
        CHECK(decompose(c.instruction, scripted, quiet()).pairs == c.expected);
        for (const auto& p : mocked.pairs) CHECK(c.instruction.find(p.refer) != std::string::npos);
    }
}

TEST_CASE("worked decompositions") {
    const auto a = stub_decompose("Change the leftmost cat to a dog; remove the rightmost cat");
    CHECK(a.pairs == std::vector<DecompositionPair>{{"the leftmost cat", "change to a dog"}, {"the rightmost cat", "remove"}});
    const auto b = stub_decompose("remove the second cat from the left; add a hat to the rightmost cat");
    REQUIRE(b.pairs.size() == 2);
    CHECK(b.pairs[0].refer == "the second cat from the left");
    CHECK(b.pairs[1].refer == "the rightmost cat");
    const auto c = stub_decompose("turn the vase blue");
    CHECK(c.pairs == std::vector<DecompositionPair>{{"the vase", "turn blue"}});
}

TEST_CASE("stub grammar errors") {
    CHECK_THROWS_AS(stub_decompose(""), Error);
    CHECK_THROWS_AS(stub_decompose(" ; "), Error);
    try {
        stub_decompose("remove the leftmost cat; make it pop");
        FAIL("expected a grammar error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::grammar);
        CHECK(std::string(e.what()).find("clause 1") != std::string::npos);
    }
}

TEST_CASE("decomposition validator") {
    const std::string instr = "remove the leftmost cat";
    CHECK(validate_decomposition(json::parse(R"([{"refer":"the leftmost cat","edit":"remove"}])"), instr).size() == 1);
    for (const char* bad : {R"([])", R"({})", R"([{"refer":"the left cat","edit":"remove"}])",
                            R"([{"refer":"the leftmost cat"}])", R"([{"refer":"the leftmost cat","edit":""}])",
                            R"([{"refer":3,"edit":"remove"}])"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(validate_decomposition(json::parse(bad), instr), SchemaViolation);
    }
}

TEST_CASE("prose then a valid reply records one retry") {
    ScriptedChatClient client({"Here is the breakdown you asked for.", R"([{"refer":"the vase","edit":"turn blue"}])"});
    const auto d = decompose("turn the vase blue", client, quiet());
    CHECK(d.retries == 1);
    CHECK(d.pairs.size() == 1);
    CHECK(d.raw_outputs.size() == 2);
}

TEST_CASE("decomposition exhaustion carries the last reply") {
    ScriptedChatClient client({R"([{"refer":"a dog","edit":"x"}])"}, true);
    try {
        decompose("remove the leftmost cat", client, quiet(2));
        FAIL("expected a client error");
    } catch (const ClientError& e) {
        CHECK(e.attempts() == 3);
        CHECK(e.last_output() == R"([{"refer":"a dog","edit":"x"}])");
    }
    CHECK(client.calls() == 3);
}

TEST_CASE("grounding through the offline localizer") {
    const auto scene = make_square_scene();
    const auto squares = scene.ordered("square");
    EchoChatClient echo;
    const auto g = ground(scene.image, "the leftmost square", echo, quiet());
    CHECK(g.box == squares.front().box);
    CHECK(g.retries == 0);
    CHECK(g.warnings.empty());
    CHECK(ground(scene.image, "the middle square", echo, quiet()).box == squares[1].box);
    CHECK(ground(scene.image, "the second square from the right", echo, quiet()).box == squares[1].box);
}

TEST_CASE("localizer resolves every descriptor against the generator's truth") {
    for (int n : {3, 4, 5}) {
        SceneSpec spec;
        spec.width = spec.height = 128;
        spec.instance_count = n;
        spec.extra_count = 2;
        const auto scene = make_square_scene(spec);
        const auto squares = scene.ordered("square");
        const auto balls = scene.ordered("ball");
        REQUIRE(squares.size() == static_cast<std::size_t>(n));
        REQUIRE(balls.size() == 2);
        CHECK(stub_localize(scene.image, "the leftmost square") == squares.front().box);
        CHECK(stub_localize(scene.image, "the rightmost square") == squares.back().box);
        CHECK(stub_localize(scene.image, "the second square from the left") == squares[1].box);
        CHECK(stub_localize(scene.image, "the second square from the right") == squares[n - 2].box);
        CHECK(stub_localize(scene.image, "the last square") == squares.back().box);
        CHECK(stub_localize(scene.image, "the leftmost ball") == balls.front().box);
        CHECK(stub_localize(scene.image, "the rightmost ball") == balls.back().box);
        if (n % 2 == 1) {
            CHECK(stub_localize(scene.image, "the middle square") == squares[n / 2].box);
        } else {
            CHECK_FALSE(stub_localize(scene.image, "the middle square").has_value());
        }
    }
    const auto single = make_square_scene({64, 64, 1});
    CHECK(stub_localize(single.image, "the square") == single.objects.front().box);
    CHECK_FALSE(stub_localize(make_square_scene().image, "the square").has_value());
}

TEST_CASE("grounding validator") {
    std::vector<std::string> w;
    CHECK(validate_grounding(json::parse(R"([{"refer":"x","box":[1,2,10,12]}])"), 64, 64, w) == BoundingBox{1, 2, 10, 12});
    CHECK(w.empty());
    CHECK(validate_grounding(json::parse(R"({"box":[-2,0,66,64]})"), 64, 64, w) == BoundingBox{0, 0, 64, 64});
    CHECK(w.size() == 1);
    w.clear();
    CHECK(validate_grounding(json::parse(R"({"box":[0.25,0.5,0.5,0.75]})"), 64, 32, w) == BoundingBox{16, 16, 32, 24});
    CHECK(w.size() == 1);
    for (const char* bad : {R"({"box":[-3,0,10,10]})", R"({"box":[0,0,67,10]})", R"({"box":[5,5,5,9]})",
                            R"({"box":[9,5,4,9]})", R"({"box":[1,2,3]})", R"({"box":"0,0,1,1"})", R"([])"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(validate_grounding(json::parse(bad), 64, 64, w), SchemaViolation);
    }
}

TEST_CASE("degenerate boxes are retried then rejected") {
    const auto scene = make_square_scene();
    ScriptedChatClient fixes({R"([{"box":[5,5,5,9]}])", R"([{"box":[5,26,17,38]}])"});
    const auto g = ground(scene.image, "the leftmost square", fixes, quiet());
    CHECK(g.retries == 1);
    CHECK(g.box == BoundingBox{5, 26, 17, 38});

    ScriptedChatClient stuck({R"([{"box":[5,5,5,9]}])"}, true);
    CHECK_THROWS_AS(ground(scene.image, "the leftmost square", stuck, quiet(2)), ClientError);
    CHECK(stuck.calls() == 3);
}

TEST_CASE("grounding requests carry the image") {
    const auto scene = make_square_scene();
    ScriptedChatClient client({R"([{"box":[0,0,4,4]}])"});
    ground(scene.image, "the leftmost square", client, quiet());
    const auto req = client.requests().front();
    REQUIRE(req.messages.size() == 1);
    CHECK(req.messages[0].images_png_base64.size() == 1);
    CHECK(req.messages[0].text.find("the leftmost square") != std::string::npos);
}
