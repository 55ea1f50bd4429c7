#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cfedit/imaging.hpp"
#include "cfedit/instruction.hpp"

namespace cfedit {

// Half-open pixel box [x0, x1) x [y0, y1).
struct BoundingBox {
    int x0;
    int y0;
    int x1;
    int y1;

    long long area() const noexcept { return static_cast<long long>(x1 - x0) * (y1 - y0); }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Per-finding bounding-box annotations on a fixed canvas. Immutable once
/// built; every box is checked against the canvas on insertion.
class MaskRegistry {
public:
    MaskRegistry(int width, int height);
    MaskRegistry(int width, int height, std::map<std::string, std::vector<BoundingBox>> entries);

    // JSON: {"width": w, "height": h, "findings": {"<finding>": [[x0,y0,x1,y1], ...]}}
    static MaskRegistry load(const std::filesystem::path& path);
    static MaskRegistry from_json_text(const std::string& text);
    std::string to_json_text() const;

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const std::map<std::string, std::vector<BoundingBox>>& entries() const noexcept { return entries_; }
    bool contains(const std::string& finding) const { return entries_.contains(finding); }

private:
    void add(const std::string& finding, const BoundingBox& box);

    int width_;
    int height_;
    std::map<std::string, std::vector<BoundingBox>> entries_;
};

// Pixel union of the finding's boxes; all-ones over the canvas when the finding is unannotated.
Mask build_pathology_mask(const MaskRegistry& registry, const std::string& finding);

// Union of the pathology masks of every finding named in `instructions`.
Mask resolve_pseudo_mask(const MaskRegistry& registry, const InstructionSet& instructions);

// Validates a caller-supplied mask (values exactly 0 or 1, canvas-sized) and returns it as a Mask.
Mask user_mask_override(const Latent& candidate, int canvas_width, int canvas_height);

// 8-bit PNG, level / 255. Levels other than 0 and 255 fail user_mask_override.
Latent read_user_mask_png(const std::filesystem::path& path);

} // namespace cfedit
