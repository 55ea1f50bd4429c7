#include "cfedit/registration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace cfedit {

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;

// Sum of c*ln(c) over non-zero counts, accumulated in sorted order so the
// result does not depend on histogram layout.
double count_entropy_sum(std::vector<long long> counts) {
    std::sort(counts.begin(), counts.end());
    double sum = 0.0;
    for (long long c : counts) {
        if (c > 0) {
            const double v = static_cast<double>(c);
            sum += v * std::log(v);
        }
    }
    return sum;
}

int bin_of(double v, int bins) {
    return std::min(static_cast<int>(v * bins), bins - 1);
}

// Search-space coordinates: degrees, percent scale, pixels, pixels.
using Point = std::array<double, 4>;

RigidTransform to_transform(const Point& p) {
    return {p[0] * kDegree, 1.0 + p[1] / 100.0, p[2], p[3]};
}

struct Bounds {
    Point lo;
    Point hi;

    Point clamp(Point p) const {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lo[i], hi[i]);
        return p;
    }
};

struct SimplexResult {
    Point best;
    double value;
};

template <typename Objective>
SimplexResult nelder_mead(const Objective& f, const Bounds& bounds, const Point& start, const Point& step,
                          int max_evals, double x_tol) {
    constexpr std::size_t n = 4;
    std::array<Point, n + 1> simplex;
    std::array<double, n + 1> values;
    simplex[0] = bounds.clamp(start);
    for (std::size_t i = 0; i < n; ++i) {
        Point p = simplex[0];
        p[i] += step[i];
        if (p[i] > bounds.hi[i]) p[i] = simplex[0][i] - step[i];
        simplex[i + 1] = bounds.clamp(p);
    }
    int evals = 0;
    auto eval = [&](const Point& p) {
        ++evals;
        return f(p);
    };
    for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

    std::array<std::size_t, n + 1> order;
    while (evals < max_evals) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order[0];
        const std::size_t worst = order[n];
        const std::size_t second_worst = order[n - 1];

        double spread = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                spread = std::max(spread, std::abs(simplex[i][k] - simplex[best][k]));
            }
        }
        if (spread < x_tol) break;

        Point centroid{};
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / n;
        }
        auto along = [&](double coeff) {
            Point p;
            for (std::size_t k = 0; k < n; ++k) p[k] = centroid[k] + coeff * (simplex[worst][k] - centroid[k]);
            return bounds.clamp(p);
        };

        const Point reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < values[best]) {
            const Point expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second_worst]) {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        const Point contracted = along(outside ? -0.5 : 0.5);
        const double fc = eval(contracted);
        if (fc < (outside ? fr : values[worst])) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < n; ++k) {
                simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
            }
            values[i] = eval(simplex[i]);
        }
    }
    const auto it = std::min_element(values.begin(), values.end());
    const auto idx = static_cast<std::size_t>(it - values.begin());
    return {simplex[idx], *it};
}

} // namespace

void RigidTransform::validate() const {
    if (!std::isfinite(angle) || !std::isfinite(scale) || !std::isfinite(tx) || !std::isfinite(ty)) {
        throw ParameterError("rigid transform has a non-finite parameter");
    }
    if (!(scale > 0.0)) {
        throw ParameterError("rigid transform scale must be positive");
    }
}

double wrap_angle(double radians) {
    double a = std::remainder(radians, 2.0 * std::numbers::pi);
    if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
    return a;
}

RigidTransform RigidTransform::after(const RigidTransform& first) const {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {
        wrap_angle(angle + first.angle),
        scale * first.scale,
        scale * (c * first.tx - s * first.ty) + tx,
        scale * (s * first.tx + c * first.ty) + ty,
    };
}

WarpResult warp_rigid(const GrayImage& img, const RigidTransform& t) {
    t.validate();
    const int w = img.width();
    const int h = img.height();
    if (t.is_identity()) {
        return {img, ones_mask(w, h)};
    }
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    const double c = std::cos(t.angle);
    const double s = std::sin(t.angle);
    const double inv_scale = 1.0 / t.scale;

    Latent out(w, h);
    Mask valid(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // p = R^T (p' - c - t) / scale + c
            const double dx = x - cx - t.tx;
            const double dy = y - cy - t.ty;
            const double sx = (c * dx + s * dy) * inv_scale + cx;
            const double sy = (-s * dx + c * dy) * inv_scale + cy;
            if (!(sx >= 0.0 && sy >= 0.0 && sx <= w - 1 && sy <= h - 1)) {
                continue;
            }
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const int x1 = std::min(x0 + 1, w - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double fx = sx - x0;
            const double fy = sy - y0;
            const double top = img.at(x0, y0) + fx * (img.at(x1, y0) - img.at(x0, y0));
            const double bottom = img.at(x0, y1) + fx * (img.at(x1, y1) - img.at(x0, y1));
            out.at(x, y) = top + fy * (bottom - top);
            valid.at(x, y) = 1;
        }
    }
    return {GrayImage::clamped(std::move(out)), std::move(valid)};
}

GrayImage apply_rigid(const GrayImage& img, const RigidTransform& t) {
    return warp_rigid(img, t).image;
}

MIScore mutual_information(const GrayImage& a, const GrayImage& b, int bins, const Mask* valid) {
    if (!a.same_shape(b) || (valid != nullptr && !a.same_shape(*valid))) {
        throw ParameterError("mutual_information: dimension mismatch");
    }
    if (bins < 2) {
        throw ParameterError("mutual_information: need at least 2 bins");
    }
    const auto nb = static_cast<std::size_t>(bins);
    std::vector<long long> joint(nb * nb, 0);
    std::vector<long long> marginal_a(nb, 0);
    std::vector<long long> marginal_b(nb, 0);
    long long n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (valid != nullptr && (*valid)[i] == 0) continue;
        const auto ia = static_cast<std::size_t>(bin_of(a[i], bins));
        const auto ib = static_cast<std::size_t>(bin_of(b[i], bins));
        ++joint[ia * nb + ib];
        ++marginal_a[ia];
        ++marginal_b[ib];
        ++n;
    }
    const auto occupied = [](const std::vector<long long>& m) {
        return std::count_if(m.begin(), m.end(), [](long long c) { return c > 0; });
    };
    if (n == 0 || occupied(marginal_a) <= 1 || occupied(marginal_b) <= 1) {
        return {0.0};
    }
    // I = H(A) + H(B) - H(A,B), with H = ln N - (1/N) sum c ln c
    const double sa = count_entropy_sum(std::move(marginal_a));
    const double sb = count_entropy_sum(std::move(marginal_b));
    const double sab = count_entropy_sum(std::move(joint));
    const double nd = static_cast<double>(n);
    const double info = std::log(nd) + (sab - (sa + sb)) / nd;
    return {-std::max(info, 0.0)};
}

MIScore alignment_score(const GrayImage& fixed, const GrayImage& moving, const RigidTransform& t, int bins) {
    const WarpResult warped = warp_rigid(moving, t);
    // Too little overlap carries no alignment evidence.
    if (count_ones(warped.valid) * 4 < warped.valid.size()) {
        return {0.0};
    }
    return mutual_information(fixed, warped.image, bins, &warped.valid);
}

RegistrationResult register_rigid(const GrayImage& fixed, const GrayImage& moving, const RegistrationConfig& cfg) {
    if (!fixed.same_shape(moving)) {
        throw ParameterError("register_rigid: dimension mismatch");
    }
    if (!(cfg.max_angle_deg >= 0.0) || !(cfg.min_scale > 0.0) || !(cfg.min_scale <= cfg.max_scale) ||
        !(cfg.max_translation >= 0.0) || cfg.restarts < 1 || cfg.bins < 2 || !(cfg.min_scale <= 1.0) ||
        !(cfg.max_scale >= 1.0)) {
        throw ParameterError("register_rigid: empty or invalid search bounds");
    }

    const Bounds bounds{
        {-cfg.max_angle_deg, (cfg.min_scale - 1.0) * 100.0, -cfg.max_translation, -cfg.max_translation},
        {cfg.max_angle_deg, (cfg.max_scale - 1.0) * 100.0, cfg.max_translation, cfg.max_translation},
    };
    auto objective = [&](const Point& p) { return alignment_score(fixed, moving, to_transform(p), cfg.bins).value; };

    // Coarse seed grid, identity first.
    const double a = cfg.max_angle_deg / 2.0;
    const double tr = cfg.max_translation / 2.0;
    const std::vector<Point> grid{
        {0, 0, 0, 0},   {0, 0, tr, tr}, {0, 0, -tr, tr}, {0, 0, tr, -tr},
        {0, 0, -tr, -tr}, {a, 0, 0, 0},  {-a, 0, 0, 0},  {0, 0, tr, 0},
        {0, 0, -tr, 0}, {0, 0, 0, tr},  {0, 0, 0, -tr},  {a, 0, tr, tr},
    };
    const Point coarse_step{std::max(cfg.max_angle_deg / 5.0, 0.5), 2.0, std::max(cfg.max_translation / 5.0, 1.0),
                            std::max(cfg.max_translation / 5.0, 1.0)};
    const Point fine_step{0.5, 0.5, 0.5, 0.5};
    constexpr int kMaxEvals = 300;
    constexpr double kCoarseTol = 0.05;
    constexpr double kFineTol = 0.005;

    Point best_point{0, 0, 0, 0};
    double best_value = objective(best_point);
    const auto seeds = static_cast<std::size_t>(std::min<int>(cfg.restarts, static_cast<int>(grid.size())));
    for (std::size_t i = 0; i < seeds; ++i) {
        const SimplexResult run = nelder_mead(objective, bounds, grid[i], coarse_step, kMaxEvals, kCoarseTol);
        if (run.value < best_value) {
            best_value = run.value;
            best_point = run.best;
        }
    }
    const SimplexResult polish = nelder_mead(objective, bounds, best_point, fine_step, kMaxEvals, kFineTol);
    if (polish.value < best_value) {
        best_value = polish.value;
        best_point = polish.best;
    }

    const RigidTransform transform = to_transform(best_point);
    return {transform, {best_value}, best_value <= cfg.threshold};
}

} // namespace cfedit
