#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "cfedit/metrics.hpp"
#include "cfedit/pipeline.hpp"
#include "fixtures.hpp"

using namespace cfedit;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> edit_args(const TempDir& dir, const std::string& out_dir) {
    return {"edit",    "--image",  (dir / "input.png").string(), "--instruction", "add mild edema",
            "--world", (dir / "world.json").string(), "--canvas", "64", "--steps", "8", "--seed", "5",
            "--out-dir", (dir / out_dir).string()};
}

} // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(cli({}).code == 1);
    CHECK(cli({"frobnicate"}).code == 1);
    CHECK(cli({"edit", "--image", "x.png"}).code == 1);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("edit writes artifacts and a JSON summary") {
    TempDir dir("cli");
    testing::write_edit_fixture(dir.path());
    const Run r = cli(edit_args(dir, "out"));
    INFO(r.err);
    REQUIRE(r.code == 0);
    for (const char* name : {"edited.png", "guidance.png", "guidance.bin", "guidance.json", "mask.png"}) {
        CHECK(fs::exists(dir / "out" / name));
    }
    const auto summary = nlohmann::json::parse(r.out);
    CHECK(summary.at("status") == "ok");
    CHECK(summary.at("text") == "add mild edema");
    CHECK(summary.at("s_text") == 7.5);

    // Nothing outside mask.png changes.
    const GrayImage input = read_png(dir / "input.png");
    const GrayImage edited = read_png(dir / "out" / "edited.png");
    const auto mask = read_png_levels(dir / "out" / "mask.png");
    std::size_t inside = 0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (mask[i] == 0) CHECK(edited[i] == input[i]);
        inside += mask[i] != 0;
    }
    CHECK(inside > 0);
    CHECK(summary.at("edit_mask_pixels") == inside);
}

TEST_CASE("edit is byte-identical across invocations") {
    TempDir dir("cli");
    testing::write_edit_fixture(dir.path());
    REQUIRE(cli(edit_args(dir, "one")).code == 0);
    REQUIRE(cli(edit_args(dir, "two")).code == 0);
    for (const char* name : {"edited.png", "guidance.png", "guidance.bin", "guidance.json", "mask.png"}) {
        CHECK(testing::read_text(dir / "one" / name) == testing::read_text(dir / "two" / name));
    }
}

TEST_CASE("edit with registry restricts the editable region") {
    TempDir dir("cli");
    testing::write_edit_fixture(dir.path());
    auto args = edit_args(dir, "reg");
    args.insert(args.end(), {"--mask", (dir / "registry.json").string()});
    REQUIRE(cli(args).code == 0);
    const auto mask = read_png_levels(dir / "reg" / "mask.png");
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            if (x < 8 || x >= 34 || y < 8 || y >= 40) CHECK(mask.at(x, y) == 0);
        }
    }
}

TEST_CASE("edit error codes") {
    TempDir dir("cli");
    testing::write_edit_fixture(dir.path());

    auto bad_text = edit_args(dir, "e1");
    bad_text[4] = "make it prettier";
    const Run parse = cli(bad_text);
    CHECK(parse.code == 2);
    CHECK(parse.err.find("make it prettier") != std::string::npos);

    auto missing = edit_args(dir, "e2");
    missing[2] = (dir / "nope.png").string();
    CHECK(cli(missing).code == 3);

    write_mask_png(dir / "small.png", Mask(32, 32, 1));
    auto wrong_mask = edit_args(dir, "e3");
    wrong_mask.insert(wrong_mask.end(), {"--mask", (dir / "small.png").string()});
    CHECK(cli(wrong_mask).code == 4);

    testing::write_text(dir / "broken.json", "{\"findings\": 3");
    auto broken_world = edit_args(dir, "e4");
    broken_world[6] = (dir / "broken.json").string();
    CHECK(cli(broken_world).code == 4);

    auto bad_tau = edit_args(dir, "e5");
    bad_tau.insert(bad_tau.end(), {"--tau", "0"});
    CHECK(cli(bad_tau).code == 4);
}

TEST_CASE("edit with a valid user mask png") {
    TempDir dir("cli");
    testing::write_edit_fixture(dir.path());
    Mask user(64, 64, 0);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 20; ++x) user.at(x, y) = 1;
    write_mask_png(dir / "user.png", user);
    auto args = edit_args(dir, "user");
    args.insert(args.end(), {"--mask", (dir / "user.png").string()});
    REQUIRE(cli(args).code == 0);
    const auto mask = read_png_levels(dir / "user" / "mask.png");
    for (int y = 0; y < 64; ++y)
        for (int x = 20; x < 64; ++x) CHECK(mask.at(x, y) == 0);
}

TEST_CASE("instruct from text and from finding files") {
    TempDir dir("cli");
    const Run t = cli({"instruct", "--text", "ADD  small left pleural effusion ; remove edema"});
    REQUIRE(t.code == 0);
    CHECK(nlohmann::json::parse(t.out).at("text") == "add small left pleural effusion and then remove edema");

    testing::write_text(dir / "past.json", R"([{"finding": "edema", "severity": "mild"}])");
    testing::write_text(dir / "cur.json", R"([{"finding": "edema", "severity": "severe"}, {"finding": "pneumonia"}])");
    const Run g = cli({"instruct", "--past", (dir / "past.json").string(), "--current", (dir / "cur.json").string()});
    REQUIRE(g.code == 0);
    CHECK(nlohmann::json::parse(g.out).at("text") == "add pneumonia and then change the level of edema to severe");

    CHECK(cli({"instruct", "--text", "hello"}).code == 2);
    CHECK(cli({"instruct"}).code == 4);
    CHECK(cli({"instruct", "--past", (dir / "none.json").string(), "--current", (dir / "cur.json").string()}).code == 3);
}

TEST_CASE("register subcommand") {
    TempDir dir("cli");
    std::mt19937_64 rng(3);
    const GrayImage img = testing::smooth_image(rng, 64, 64);
    write_png(dir / "f.png", img);
    write_png(dir / "m.png", apply_rigid(img, {0.0, 1.0, 3.0, 2.0}));
    const Run r = cli({"register", "--fixed", (dir / "f.png").string(), "--moving", (dir / "m.png").string(),
                       "--canvas", "64", "--out-dir", (dir / "reg").string()});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("accepted") == true);
    CHECK(j.at("transform").size() == 4);
    CHECK(std::abs(j.at("transform")[2].get<double>() + 3.0) <= 1.0);
    CHECK(fs::exists(dir / "reg" / "registered.png"));
}

TEST_CASE("ingest and stats subcommands") {
    TempDir dir("cli");
    const auto records = testing::write_pipeline_fixture(dir.path());
    const std::vector<std::string> args{"ingest", "--records", records.string(), "--canvas", "64", "--out-dir",
                                        (dir / "m1").string()};
    const Run r = cli(args);
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto stats = nlohmann::json::parse(testing::read_text(dir / "m1" / "stats.json"));
    CHECK(stats.at("samples") == 2);
    CHECK(stats.at("rejected") == 2);
    CHECK(stats.at("dropped_view") == 2);
    CHECK(stats.at("total_operations") == 3);

    auto again = args;
    again.back() = (dir / "m2").string();
    REQUIRE(cli(again).code == 0);
    CHECK(testing::read_text(dir / "m1" / "manifest.jsonl") == testing::read_text(dir / "m2" / "manifest.jsonl"));

    const Run s = cli({"stats", "--manifest", (dir / "m1" / "manifest.jsonl").string()});
    REQUIRE(s.code == 0);
    const auto replay = nlohmann::json::parse(s.out);
    CHECK(replay.at("samples") == 2);
    CHECK(replay.at("operations").at("add").at("count") == 1);

    // Strict gate rejects everything; still a success with a warning.
    auto strict = args;
    strict.back() = (dir / "m3").string();
    strict.insert(strict.end(), {"--mi-threshold", "-100"});
    const Run empty = cli(strict);
    CHECK(empty.code == 0);
    CHECK(empty.err.find("warning") != std::string::npos);
    CHECK(testing::read_text(dir / "m3" / "manifest.jsonl").empty());

    CHECK(cli({"ingest", "--records", (dir / "missing.jsonl").string()}).code == 3);
    CHECK(cli({"stats", "--manifest", (dir / "missing.jsonl").string()}).code == 3);
}

TEST_CASE("eval subcommand") {
    TempDir dir("cli");
    fs::create_directories(dir / "ref");
    fs::create_directories(dir / "gen");
    fs::create_directories(dir / "empty");
    std::mt19937_64 rng(4);
    for (int i = 0; i < 6; ++i) {
        const GrayImage img = testing::smooth_image(rng, 32, 32);
        write_png(dir / "ref" / ("img" + std::to_string(i) + ".png"), img);
        write_png(dir / "gen" / ("img" + std::to_string(i) + ".png"), img);
    }
    testing::write_text(dir / "scores.json", R"({
        "accuracy": {"edema": {"labels": [1, 1, 0, 0], "scores": [0.8, 0.3, 0.5, 0.1]}},
        "retention": {"age": {"target": [1, 2, 3], "predicted": [1, 3, 2]},
                      "sex": {"labels": [1, 0], "scores": [0.9, 0.2]}},
        "distributions": {"classes": ["a", "b"], "reference": [0.5, 0.5], "generated": [[0.25, 0.75], [0.25, 0.75]]}
    })");

    SUBCASE("identical directories and hand-built scores") {
        const Run r = cli({"eval", "--reference", (dir / "ref").string(), "--generated", (dir / "gen").string(),
                           "--scores", (dir / "scores.json").string(), "--out-dir", (dir / "ev").string()});
        INFO(r.err);
        REQUIRE(r.code == 0);
        const auto report = nlohmann::json::parse(testing::read_text(dir / "ev" / "metrics.json"));
        CHECK(report.at("fid").get<double>() <= 1e-9);
        CHECK(report.at("accuracy").at("edema").get<double>() == 0.75);
        CHECK(report.at("retention").at("age").get<double>() == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(report.at("retention").at("sex").get<double>() == 1.0);
        CHECK(report.at("kl").get<double>() == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-12));
        CHECK(report.at("cmig").get<double>() == doctest::Approx(cmig({0.75}, {0.5, 1.0})).epsilon(1e-12));
        CHECK(report.at("n") == 6);
    }
    SUBCASE("probe-based KL on identical directories is zero") {
        testing::write_text(dir / "world.json", testing::fixture_world().to_json_text());
        const Run r = cli({"eval", "--reference", (dir / "ref").string(), "--generated", (dir / "gen").string(),
                           "--world", (dir / "world.json").string(), "--out-dir", (dir / "ev2").string()});
        REQUIRE(r.code == 0);
        const auto report = nlohmann::json::parse(r.out);
        CHECK(report.at("kl").get<double>() == 0.0);
        CHECK(report.at("cmig").is_null());
    }
    SUBCASE("errors") {
        CHECK(cli({"eval", "--reference", (dir / "nope").string(), "--generated", (dir / "gen").string()}).code == 3);
        CHECK(cli({"eval", "--reference", (dir / "empty").string(), "--generated", (dir / "gen").string()}).code == 3);
        testing::write_text(dir / "mismatch.json",
                            R"({"distributions": {"classes": ["a", "b"], "reference": [0.5, 0.5], "generated": [0.5]}})");
        CHECK(cli({"eval", "--reference", (dir / "ref").string(), "--generated", (dir / "gen").string(), "--scores",
                   (dir / "mismatch.json").string(), "--out-dir", (dir / "ev3").string()})
                  .code == 4);
    }
}
