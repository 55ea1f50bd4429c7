#include "cfedit/imaging.hpp"

#include <algorithm>
#include <cmath>

namespace cfedit {

namespace {

void check_finite(const Latent& grid) {
    for (double v : grid.values()) {
        if (!std::isfinite(v)) {
            throw ParameterError("image contains a non-finite value");
        }
    }
}

double lerp(double a, double b, double f) {
    // a + f*(b - a) returns a exactly when a == b
    return a + f * (b - a);
}

} // namespace

GrayImage::GrayImage(int width, int height, double fill) : grid_(width, height, fill) {
    if (!(fill >= 0.0 && fill <= 1.0)) {
        throw ParameterError("image intensity outside [0, 1]");
    }
}

GrayImage GrayImage::from_latent(Latent grid) {
    for (double v : grid.values()) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw ParameterError("image intensity outside [0, 1]");
        }
    }
    return GrayImage(std::move(grid));
}

GrayImage GrayImage::clamped(Latent grid) {
    check_finite(grid);
    for (double& v : grid.values()) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return GrayImage(std::move(grid));
}

GrayImage GrayImage::generate(int width, int height, const std::function<double(int, int)>& fn) {
    Latent grid(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            grid.at(x, y) = fn(x, y);
        }
    }
    return from_latent(std::move(grid));
}

GrayImage bilateral_filter(const GrayImage& img, double sigma_domain, double sigma_range) {
    if (!(sigma_domain > 0.0) || !(sigma_range > 0.0)) {
        throw ParameterError("bilateral_filter: sigmas must be positive");
    }
    const int radius = static_cast<int>(std::ceil(3.0 * sigma_domain));
    const int w = img.width();
    const int h = img.height();

    const int side = 2 * radius + 1;
    std::vector<double> spatial(static_cast<std::size_t>(side * side));
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            spatial[static_cast<std::size_t>((dy + radius) * side + dx + radius)] =
                std::exp(-(dx * dx + dy * dy) / (2.0 * sigma_domain * sigma_domain));
        }
    }
    const double range_coeff = -1.0 / (2.0 * sigma_range * sigma_range);
    const auto [lo_it, hi_it] = std::minmax_element(img.values().begin(), img.values().end());
    const double lo = *lo_it;
    const double hi = *hi_it;

    Latent out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double center = img.at(x, y);
            double acc = 0.0;
            double norm = 0.0;
            for (int dy = -radius; dy <= radius; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= h) continue;
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= w) continue;
                    const double v = img.at(xx, yy);
                    const double diff = 255.0 * (v - center);
                    const double wgt = spatial[static_cast<std::size_t>((dy + radius) * side + dx + radius)] *
                                       std::exp(diff * diff * range_coeff);
                    acc += wgt * (v - center);
                    norm += wgt;
                }
            }
            // offset form keeps flat regions exactly unchanged
            out.at(x, y) = std::clamp(center + acc / norm, lo, hi);
        }
    }
    return GrayImage::from_latent(std::move(out));
}

Latent normalize_map(const Latent& map) {
    double peak = 0.0;
    for (double v : map.values()) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ParameterError("normalize_map: input must be finite and non-negative");
        }
        peak = std::max(peak, v);
    }
    Latent out = map;
    if (peak == 0.0) {
        return out;
    }
    for (double& v : out.values()) {
        v /= peak;
    }
    return out;
}

GrayImage resize(const GrayImage& img, int width, int height) {
    if (width <= 0 || height <= 0) {
        throw ParameterError("resize: target dimensions must be positive");
    }
    if (width == img.width() && height == img.height()) {
        return img;
    }
    const double sx = static_cast<double>(img.width()) / width;
    const double sy = static_cast<double>(img.height()) / height;
    const int max_x = img.width() - 1;
    const int max_y = img.height() - 1;

    Latent out(width, height);
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_y));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, max_y);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_x));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, max_x);
            const double tx = fx - x0;
            const double top = lerp(img.at(x0, y0), img.at(x1, y0), tx);
            const double bottom = lerp(img.at(x0, y1), img.at(x1, y1), tx);
            out.at(x, y) = lerp(top, bottom, ty);
        }
    }
    return GrayImage::clamped(std::move(out));
}

Mask resize_nearest(const Mask& mask, int width, int height) {
    if (width <= 0 || height <= 0) {
        throw ParameterError("resize_nearest: target dimensions must be positive");
    }
    if (width == mask.width() && height == mask.height()) {
        return mask;
    }
    Mask out(width, height);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * mask.height() / height), mask.height() - 1);
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * mask.width() / width), mask.width() - 1);
            out.at(x, y) = mask.at(sx, sy);
        }
    }
    return out;
}

Mask ones_mask(int width, int height) {
    return Mask(width, height, std::uint8_t{1});
}

std::size_t count_ones(const Mask& mask) {
    return static_cast<std::size_t>(std::count(mask.values().begin(), mask.values().end(), std::uint8_t{1}));
}

} // namespace cfedit
