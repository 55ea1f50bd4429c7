#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cfedit/registration.hpp"
#include "support.hpp"

using namespace cfedit;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Forward map of a point under t, written out independently.
std::pair<double, double> map_point(const RigidTransform& t, double x, double y, int w, int h) {
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double dx = x - cx, dy = y - cy;
    return {t.scale * (std::cos(t.angle) * dx - std::sin(t.angle) * dy) + cx + t.tx,
            t.scale * (std::sin(t.angle) * dx + std::cos(t.angle) * dy) + cy + t.ty};
}

// Plain histogram MI in nats with the textbook p log(p / (pa pb)) sum.
double mi_oracle(const GrayImage& a, const GrayImage& b, int bins) {
    std::vector<double> joint(static_cast<std::size_t>(bins * bins), 0.0), pa(bins, 0.0), pb(bins, 0.0);
    auto bin = [bins](double v) { return std::min(bins - 1, static_cast<int>(v * bins)); };
    const double n = static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const int ia = bin(a[i]), ib = bin(b[i]);
        joint[static_cast<std::size_t>(ia * bins + ib)] += 1.0 / n;
        pa[ia] += 1.0 / n;
        pb[ib] += 1.0 / n;
    }
    double mi = 0.0;
    for (int i = 0; i < bins; ++i) {
        for (int j = 0; j < bins; ++j) {
            const double p = joint[static_cast<std::size_t>(i * bins + j)];
            if (p > 0) mi += p * std::log(p / (pa[i] * pb[j]));
        }
    }
    return mi;
}

} // namespace

TEST_CASE("transform validation and angle wrapping") {
    CHECK_THROWS_AS((RigidTransform{0.0, 0.0, 0.0, 0.0}).validate(), ParameterError);
    CHECK_THROWS_AS((RigidTransform{std::nan(""), 1.0, 0.0, 0.0}).validate(), ParameterError);
    CHECK_NOTHROW(RigidTransform::identity().validate());
    CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
    CHECK(wrap_angle(0.25) == 0.25);
}

TEST_CASE("composition matches sequential point mapping") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const RigidTransform a{testing::uniform(rng, -1, 1), testing::uniform(rng, 0.8, 1.2), testing::uniform(rng, -9, 9),
                               testing::uniform(rng, -9, 9)};
        const RigidTransform b{testing::uniform(rng, -1, 1), testing::uniform(rng, 0.8, 1.2), testing::uniform(rng, -9, 9),
                               testing::uniform(rng, -9, 9)};
        const double x = testing::uniform(rng, 0, 40), y = testing::uniform(rng, 0, 30);
        const auto [x1, y1] = map_point(a, x, y, 41, 31);
        const auto [x2, y2] = map_point(b, x1, y1, 41, 31);
        const auto [x3, y3] = map_point(b.after(a), x, y, 41, 31);
        CHECK(x3 == doctest::Approx(x2).epsilon(1e-12));
        CHECK(y3 == doctest::Approx(y2).epsilon(1e-12));
    }
}

TEST_CASE("apply_rigid: identity is bit exact") {
    std::mt19937_64 rng(1);
    const GrayImage img = testing::random_image(rng, 23, 19);
    CHECK(apply_rigid(img, RigidTransform::identity()) == img);
    const WarpResult w = warp_rigid(img, RigidTransform::identity());
    CHECK(count_ones(w.valid) == img.size());
}

TEST_CASE("apply_rigid: pure translation shifts content") {
    std::mt19937_64 rng(2);
    const GrayImage img = testing::random_image(rng, 30, 20);
    const GrayImage out = apply_rigid(img, {0.0, 1.0, 5.0, 3.0});
    for (int y = 3; y < 20; ++y) {
        for (int x = 5; x < 30; ++x) CHECK(out.at(x, y) == doctest::Approx(img.at(x - 5, y - 3)).epsilon(1e-12));
    }
    CHECK(out.at(2, 10) == 0.0);
    const WarpResult w = warp_rigid(img, {0.0, 1.0, 5.0, 3.0});
    CHECK(w.valid.at(2, 10) == 0);
    CHECK(w.valid.at(10, 10) == 1);
}

TEST_CASE("apply_rigid: quarter turn matches coordinate mapping") {
    const GrayImage img = GrayImage::generate(5, 5, [](int x, int y) { return (x * 5 + y * y + 1) / 40.0; });
    const RigidTransform t{std::numbers::pi / 2, 1.0, 0.0, 0.0};
    const GrayImage out = apply_rigid(img, t);
    for (int y = 1; y < 4; ++y) {
        for (int x = 1; x < 4; ++x) {
            // Inverse of (dx, dy) -> (-dy, dx) about the centre (2, 2).
            const int sx = 2 + (y - 2);
            const int sy = 2 - (x - 2);
            CHECK(std::abs(out.at(x, y) - img.at(sx, sy)) <= 1e-9);
        }
    }
}

TEST_CASE("mutual information oracles") {
    SUBCASE("self MI over 64 evenly filled bins is ln 64") {
        const GrayImage img = GrayImage::generate(64, 32, [](int x, int) { return (x + 0.5) / 64.0; });
        CHECK(mutual_information(img, img, 64).value == doctest::Approx(-std::log(64.0)).epsilon(1e-12));
    }
    SUBCASE("constant image carries no information") {
        std::mt19937_64 rng(3);
        const GrayImage noise = testing::random_image(rng, 40, 40);
        CHECK(mutual_information(GrayImage(40, 40, 0.3), noise, 64).value == 0.0);
        CHECK(mutual_information(noise, GrayImage(40, 40, 0.3), 64).value == 0.0);
    }
    SUBCASE("independent noise scores close to zero") {
        std::mt19937_64 rng(4);
        const GrayImage a = testing::random_image(rng, 256, 256);
        const GrayImage b = testing::random_image(rng, 256, 256);
        const double s = mutual_information(a, b, 64).value;
        CHECK(s > -0.05);
        CHECK(s <= 0.0);
    }
    SUBCASE("matches textbook histogram oracle") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            const GrayImage a = testing::smooth_image(rng, 48, 40);
            const GrayImage b = GrayImage::generate(48, 40, [&](int x, int y) {
                return std::clamp(0.7 * a.at(x, y) + testing::uniform(rng, 0.0, 0.3), 0.0, 1.0);
            });
            const int bins = testing::uniform_int(rng, 2, 64);
            CHECK(-mutual_information(a, b, bins).value == doctest::Approx(mi_oracle(a, b, bins)).epsilon(1e-10));
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(mutual_information(GrayImage(4, 4), GrayImage(4, 5), 64), ParameterError);
        CHECK_THROWS_AS(mutual_information(GrayImage(4, 4), GrayImage(4, 4), 1), ParameterError);
    }
}

TEST_CASE("mutual information is exactly symmetric and self-maximal") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const GrayImage a = testing::random_image(rng, 24, 24);
        const GrayImage b = trial % 2 == 0 ? testing::random_image(rng, 24, 24) : testing::smooth_image(rng, 24, 24);
        const int bins = testing::uniform_int(rng, 2, 64);
        CHECK(mutual_information(a, b, bins).value == mutual_information(b, a, bins).value);
        CHECK(mutual_information(a, a, bins).value <= mutual_information(a, b, bins).value);
    }
}

TEST_CASE("register_rigid recovers a known translation") {
    std::mt19937_64 rng(7);
    const GrayImage fixed = testing::smooth_image(rng, 128, 128);
    const RigidTransform truth{0.0, 1.0, 7.0, -4.0};
    const GrayImage moving = apply_rigid(fixed, truth);
    const RegistrationResult r = register_rigid(fixed, moving);
    // apply_rigid(moving, r) should undo truth.
    const RigidTransform net = r.transform.after(truth);
    CHECK(std::abs(net.tx) <= 0.5);
    CHECK(std::abs(net.ty) <= 0.5);
    CHECK(std::abs(net.angle) <= 0.5 * kDeg);
    CHECK(std::abs(net.scale - 1.0) <= 0.01);
    CHECK(r.score.value <= alignment_score(fixed, moving, RigidTransform::identity(), 64).value);
    CHECK(r.accepted);
}

TEST_CASE("register_rigid on identical images stays at identity") {
    std::mt19937_64 rng(8);
    const GrayImage img = testing::smooth_image(rng, 96, 96);
    const RegistrationResult r = register_rigid(img, img);
    CHECK(std::abs(r.transform.angle) <= 0.5 * kDeg);
    CHECK(std::abs(r.transform.scale - 1.0) <= 0.01);
    CHECK(std::abs(r.transform.tx) <= 0.5);
    CHECK(std::abs(r.transform.ty) <= 0.5);
    CHECK(r.accepted);
}

TEST_CASE("register_rigid rejects independent noise and never beats identity backwards") {
    std::mt19937_64 rng(9);
    const GrayImage a = testing::random_image(rng, 96, 96);
    const GrayImage b = testing::random_image(rng, 96, 96);
    const RegistrationResult r = register_rigid(a, b);
    CHECK_FALSE(r.accepted);
    CHECK(r.accepted == (r.score.value <= -0.88));
    CHECK(r.score.value <= alignment_score(a, b, RigidTransform::identity(), 64).value);
}

TEST_CASE("register_rigid validates inputs") {
    CHECK_THROWS_AS(register_rigid(GrayImage(8, 8), GrayImage(8, 9)), ParameterError);
    RegistrationConfig bad;
    bad.min_scale = 1.2;
    CHECK_THROWS_AS(register_rigid(GrayImage(8, 8), GrayImage(8, 8), bad), ParameterError);
}

TEST_CASE("register_rigid is deterministic") {
    std::mt19937_64 rng(10);
    const GrayImage fixed = testing::smooth_image(rng, 64, 64);
    const GrayImage moving = apply_rigid(fixed, {3 * kDeg, 1.03, -2.0, 1.5});
    const auto r1 = register_rigid(fixed, moving);
    const auto r2 = register_rigid(fixed, moving);
    CHECK(r1.transform == r2.transform);
    CHECK(r1.score.value == r2.score.value);
}
