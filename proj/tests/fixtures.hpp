#pragma once

#include <fstream>
#include <random>
#include <string>

#include "cfedit/diffusion.hpp"
#include "cfedit/maskreg.hpp"
#include "cfedit/registration.hpp"
#include "support.hpp"

namespace testing {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline cfedit::BlobWorld fixture_world() {
    return cfedit::BlobWorld({{"edema", {20.0, 22.0, 8.0, 0.3}},
                              {"pleural_effusion", {44.0, 44.0, 10.0, 0.25}},
                              {"pneumonia", {40.0, 16.0, 7.0, 0.35}}},
                             cfedit::BlobWorld::default_severity_scale());
}

/// Four longitudinal records on a 64x64 canvas: r1 and r3 are slightly
/// shifted copies (accepted), r2 and r4 pair an image with unrelated noise
/// (rejected). r5 lacks a view label and r6 is an AP view.
inline std::filesystem::path write_pipeline_fixture(const std::filesystem::path& dir) {
    std::mt19937_64 rng(2718);
    auto save = [&](const std::string& name, const cfedit::GrayImage& img) { cfedit::write_png(dir / name, img); };
    const cfedit::GrayImage a = smooth_image(rng, 64, 64);
    const cfedit::GrayImage b = smooth_image(rng, 64, 64);
    save("a_past.png", a);
    save("a_cur.png", cfedit::apply_rigid(a, {0.0, 1.0, 2.0, -1.0}));
    save("b_past.png", b);
    save("b_cur.png", b);
    save("noise1.png", random_image(rng, 64, 64));
    save("noise2.png", random_image(rng, 64, 64));
    const std::string lines =
        R"({"id": "r1", "patient": "p100", "past": "a_past.png", "current": "a_cur.png", "view": "PA", "past_findings": [{"finding": "edema"}], "current_findings": []})"
        "\n"
        R"({"id": "r2", "patient": "p101", "past": "a_past.png", "current": "noise1.png", "view": "PA", "past_findings": [], "current_findings": [{"finding": "pneumonia"}]})"
        "\n"
        R"({"id": "r3", "patient": "p102", "past": "b_past.png", "current": "b_cur.png", "view": "PA", "past_findings": [{"finding": "edema", "severity": "mild"}], "current_findings": [{"finding": "edema", "severity": "severe"}, {"finding": "atelectasis", "location": "left_lower_lobe"}], "split": "test"})"
        "\n"
        R"({"id": "r4", "patient": "p103", "past": "noise2.png", "current": "b_cur.png", "view": "PA", "past_findings": [], "current_findings": [{"finding": "edema"}]})"
        "\n"
        R"({"id": "r5", "past": "a_past.png", "current": "a_cur.png", "past_findings": [], "current_findings": [{"finding": "edema"}]})"
        "\n"
        R"({"id": "r6", "past": "a_past.png", "current": "a_cur.png", "view": "AP", "past_findings": [], "current_findings": [{"finding": "edema"}]})"
        "\n";
    write_text(dir / "records.jsonl", lines);
    return dir / "records.jsonl";
}

// Input image, blob world and registry for edit runs on a 64x64 canvas.
inline void write_edit_fixture(const std::filesystem::path& dir) {
    std::mt19937_64 rng(31415);
    cfedit::write_png(dir / "input.png",
                      cfedit::GrayImage::generate(64, 64, [&](int, int) { return uniform(rng, 0.2, 0.6); }));
    write_text(dir / "world.json", fixture_world().to_json_text());
    const cfedit::MaskRegistry reg(64, 64, {{"edema", {{8, 8, 34, 40}}}, {"pneumonia", {{30, 4, 56, 30}}}});
    write_text(dir / "registry.json", reg.to_json_text());
}

} // namespace testing
