#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "cfedit/imaging.hpp"

namespace testing {

// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("cfedit_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline cfedit::GrayImage random_image(std::mt19937_64& rng, int w, int h) {
    return cfedit::GrayImage::generate(w, h, [&](int, int) { return uniform(rng, 0.0, 1.0); });
}

// Sum of a few broad Gaussian bumps over a gentle ramp; values stay in [0, 1].
inline cfedit::GrayImage smooth_image(std::mt19937_64& rng, int w, int h, int bumps = 6) {
    struct Bump {
        double cx, cy, s, a;
    };
    std::vector<Bump> list;
    for (int k = 0; k < bumps; ++k) {
        list.push_back({uniform(rng, 0.2 * w, 0.8 * w), uniform(rng, 0.2 * h, 0.8 * h),
                        uniform(rng, 0.06, 0.16) * w, uniform(rng, 0.25, 0.6)});
    }
    const double gx = uniform(rng, -0.15, 0.15);
    const double gy = uniform(rng, -0.15, 0.15);
    return cfedit::GrayImage::generate(w, h, [&](int x, int y) {
        double v = 0.2 + gx * x / w + gy * y / h;
        for (const auto& b : list) {
            const double dx = x - b.cx, dy = y - b.cy;
            v += b.a * std::exp(-(dx * dx + dy * dy) / (2.0 * b.s * b.s));
        }
        return std::clamp(v, 0.0, 1.0);
    });
}

inline double max_abs_diff(const cfedit::Latent& a, const cfedit::Latent& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace testing
