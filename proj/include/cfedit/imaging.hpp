#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cfedit/errors.hpp"

namespace cfedit {

// Row-major 2-D grid. Width and height are always positive.
template <typename T>
class Grid {
public:
    Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
        check_dims(width, height);
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Grid(int width, int height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        check_dims(width, height);
        if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw ParameterError("grid data length does not match width*height");
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }

    T& at(int x, int y) { return data_[index(x, y)]; }
    const T& at(int x, int y) const { return data_[index(x, y)]; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    template <typename U>
    bool same_shape(const Grid<U>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    static void check_dims(int width, int height) {
        if (width <= 0 || height <= 0) {
            throw ParameterError("grid dimensions must be positive");
        }
    }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_;
    int height_;
    std::vector<T> data_;
};

// Diffusion state, noise predictions and derived maps. Finite, unbounded.
using Latent = Grid<double>;

// Binary mask, every value 0 or 1.
using Mask = Grid<std::uint8_t>;

// Single-channel image with intensities in [0, 1].
class GrayImage {
public:
    GrayImage(int width, int height, double fill = 0.0);

    // Throws ParameterError if any value is non-finite or outside [0, 1].
    static GrayImage from_latent(Latent grid);
    // Clamps into [0, 1]; non-finite values still throw.
    static GrayImage clamped(Latent grid);
    static GrayImage generate(int width, int height, const std::function<double(int, int)>& fn);

    int width() const noexcept { return grid_.width(); }
    int height() const noexcept { return grid_.height(); }
    std::size_t size() const noexcept { return grid_.size(); }
    double at(int x, int y) const { return grid_.at(x, y); }
    double operator[](std::size_t i) const { return grid_[i]; }
    std::span<const double> values() const noexcept { return grid_.values(); }

    // Identity encoding into the latent grid.
    const Latent& latent() const noexcept { return grid_; }

    template <typename U>
    bool same_shape(const Grid<U>& other) const noexcept { return grid_.same_shape(other); }
    bool same_shape(const GrayImage& other) const noexcept { return grid_.same_shape(other.grid_); }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    explicit GrayImage(Latent grid) : grid_(std::move(grid)) {}

    Latent grid_;
};

/// Edge-preserving smoothing. The spatial kernel is a Gaussian with sigma
/// `sigma_domain` truncated at radius ceil(3 * sigma_domain); the range kernel
/// is a Gaussian on intensity differences expressed on the 0-255 scale.
/// Neighbours outside the image are dropped and the weights renormalized.
GrayImage bilateral_filter(const GrayImage& img, double sigma_domain, double sigma_range);

// Divides by the maximum so the peak is exactly 1. All-zero stays all-zero.
Latent normalize_map(const Latent& map);

// Bilinear resampling with half-pixel-centre alignment.
GrayImage resize(const GrayImage& img, int width, int height);

Mask resize_nearest(const Mask& mask, int width, int height);

Mask ones_mask(int width, int height);
std::size_t count_ones(const Mask& mask);

// 8-bit grayscale PNG. Colour or 16-bit inputs are reduced to 8-bit gray.
GrayImage read_png(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const GrayImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

// Reads a PNG as raw 8-bit gray levels, without normalization.
Grid<std::uint8_t> read_png_levels(const std::filesystem::path& path);

// Grayscale base image with a red tint proportional to `overlay` (values in [0, 1]).
void write_overlay_png(const std::filesystem::path& path, const GrayImage& base, const Latent& overlay);

// Raw little-endian float32 grid plus a JSON sidecar holding width, height, kind.
struct RawGrid {
    Latent grid;
    std::string kind;
};

void write_raw_grid(const std::filesystem::path& bin_path, const Latent& grid, const std::string& kind);
RawGrid read_raw_grid(const std::filesystem::path& bin_path);

// Sidecar path for a raw grid: same stem, ".json" extension.
std::filesystem::path raw_sidecar_path(const std::filesystem::path& bin_path);

// Writes to a temporary sibling then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

} // namespace cfedit
