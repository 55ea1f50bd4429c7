#include "cfedit/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace cfedit {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint8_t to_level(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Encodes `channels` interleaved 8-bit samples per pixel (1 = gray, 3 = RGB).
std::vector<std::uint8_t> encode_rows(int width, int height, int channels, const std::vector<std::uint8_t>& pixels) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw IoError(std::string("PNG encode failed: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw IoError(std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

} // namespace

Grid<std::uint8_t> read_png_levels(const fs::path& path) {
    const std::vector<std::uint8_t> bytes = read_bytes(path);
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_GRAY;
    if (image.width == 0 || image.height == 0) {
        png_image_free(&image);
        throw IoError("empty PNG " + path.string());
    }
    Grid<std::uint8_t> levels(static_cast<int>(image.width), static_cast<int>(image.height));
    if (!png_image_finish_read(&image, nullptr, levels.values().data(), 0, nullptr)) {
        throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
    }
    return levels;
}

GrayImage read_png(const fs::path& path) {
    const Grid<std::uint8_t> levels = read_png_levels(path);
    Latent grid(levels.width(), levels.height());
    for (std::size_t i = 0; i < levels.size(); ++i) {
        grid[i] = levels[i] / 255.0;
    }
    return GrayImage::from_latent(std::move(grid));
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    std::vector<std::uint8_t> pixels(img.size());
    std::transform(img.values().begin(), img.values().end(), pixels.begin(), to_level);
    return encode_rows(img.width(), img.height(), 1, pixels);
}

void write_png(const fs::path& path, const GrayImage& img) {
    write_file_atomic(path, encode_png(img));
}

void write_mask_png(const fs::path& path, const Mask& mask) {
    std::vector<std::uint8_t> pixels(mask.size());
    std::transform(mask.values().begin(), mask.values().end(), pixels.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v != 0 ? 255 : 0); });
    write_file_atomic(path, encode_rows(mask.width(), mask.height(), 1, pixels));
}

void write_overlay_png(const fs::path& path, const GrayImage& base, const Latent& overlay) {
    if (!base.same_shape(overlay)) {
        throw ParameterError("write_overlay_png: overlay shape differs from base image");
    }
    constexpr double kOverlayAlpha = 0.6;
    std::vector<std::uint8_t> pixels(base.size() * 3);
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double g = base[i];
        const double a = kOverlayAlpha * std::clamp(overlay[i], 0.0, 1.0);
        pixels[3 * i + 0] = to_level(g * (1.0 - a) + a);
        pixels[3 * i + 1] = to_level(g * (1.0 - a));
        pixels[3 * i + 2] = to_level(g * (1.0 - a));
    }
    write_file_atomic(path, encode_rows(base.width(), base.height(), 3, pixels));
}

fs::path raw_sidecar_path(const fs::path& bin_path) {
    fs::path sidecar = bin_path;
    sidecar.replace_extension(".json");
    return sidecar;
}

void write_raw_grid(const fs::path& bin_path, const Latent& grid, const std::string& kind) {
    static const std::vector<std::string> kinds{"latent", "relevance", "guidance", "mask"};
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
        throw ParameterError("write_raw_grid: unknown kind '" + kind + "'");
    }
    std::vector<std::uint8_t> bytes(grid.size() * 4);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(grid[i]));
        for (int b = 0; b < 4; ++b) {
            bytes[4 * i + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(bits >> (8 * b));
        }
    }
    nlohmann::ordered_json meta;
    meta["width"] = grid.width();
    meta["height"] = grid.height();
    meta["kind"] = kind;
    write_file_atomic(bin_path, bytes);
    write_file_atomic(raw_sidecar_path(bin_path), meta.dump() + "\n");
}

RawGrid read_raw_grid(const fs::path& bin_path) {
    const std::vector<std::uint8_t> meta_bytes = read_bytes(raw_sidecar_path(bin_path));
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
        const int width = meta.at("width").get<int>();
        const int height = meta.at("height").get<int>();
        std::string kind = meta.at("kind").get<std::string>();

        const std::vector<std::uint8_t> bytes = read_bytes(bin_path);
        if (width <= 0 || height <= 0 ||
            bytes.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 4) {
            throw IoError("raw grid size does not match sidecar: " + bin_path.string());
        }
        Latent grid(width, height);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) {
                bits |= static_cast<std::uint32_t>(bytes[4 * i + static_cast<std::size_t>(b)]) << (8 * b);
            }
            grid[i] = static_cast<double>(std::bit_cast<float>(bits));
        }
        return {std::move(grid), std::move(kind)};
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed raw grid sidecar " + raw_sidecar_path(bin_path).string() + ": " + e.what());
    }
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("short write to " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename onto " + path.string());
    }
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace cfedit
