#include "cfedit/maskreg.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

namespace cfedit {

MaskRegistry::MaskRegistry(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
        throw ParameterError("registry canvas must be positive");
    }
}

MaskRegistry::MaskRegistry(int width, int height, std::map<std::string, std::vector<BoundingBox>> entries)
    : MaskRegistry(width, height) {
    for (const auto& [finding, boxes] : entries) {
        entries_[finding];
        for (const auto& box : boxes) add(finding, box);
    }
}

void MaskRegistry::add(const std::string& finding, const BoundingBox& box) {
    if (!is_finding_identifier(finding)) {
        throw ParameterError("registry: invalid finding identifier '" + finding + "'");
    }
    if (box.x0 < 0 || box.y0 < 0 || box.x0 >= box.x1 || box.y0 >= box.y1 || box.x1 > width_ || box.y1 > height_) {
        throw ParameterError("registry: box for '" + finding + "' does not fit the canvas");
    }
    entries_[finding].push_back(box);
}

MaskRegistry MaskRegistry::from_json_text(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        std::map<std::string, std::vector<BoundingBox>> entries;
        for (const auto& [finding, boxes] : doc.at("findings").items()) {
            auto& list = entries[finding];
            for (const auto& b : boxes) {
                if (!b.is_array() || b.size() != 4) {
                    throw ConfigError("registry: each box must be [x0, y0, x1, y1]");
                }
                list.push_back({b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()});
            }
        }
        return MaskRegistry(doc.at("width").get<int>(), doc.at("height").get<int>(), std::move(entries));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed registry JSON: ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
}

MaskRegistry MaskRegistry::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open registry " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

std::string MaskRegistry::to_json_text() const {
    nlohmann::ordered_json doc;
    doc["width"] = width_;
    doc["height"] = height_;
    doc["findings"] = nlohmann::ordered_json::object();
    for (const auto& [finding, boxes] : entries_) {
        auto list = nlohmann::ordered_json::array();
        for (const auto& b : boxes) list.push_back({b.x0, b.y0, b.x1, b.y1});
        doc["findings"][finding] = std::move(list);
    }
    return doc.dump();
}

Mask build_pathology_mask(const MaskRegistry& registry, const std::string& finding) {
    auto it = registry.entries().find(finding);
    if (it == registry.entries().end()) {
        return ones_mask(registry.width(), registry.height());
    }
    Mask mask(registry.width(), registry.height());
    for (const auto& box : it->second) {
        for (int y = box.y0; y < box.y1; ++y) {
            for (int x = box.x0; x < box.x1; ++x) {
                mask.at(x, y) = 1;
            }
        }
    }
    return mask;
}

Mask resolve_pseudo_mask(const MaskRegistry& registry, const InstructionSet& instructions) {
    if (instructions.empty()) {
        throw ParameterError("resolve_pseudo_mask: empty instruction set");
    }
    Mask merged(registry.width(), registry.height());
    for (const auto& instr : instructions) {
        const Mask m = build_pathology_mask(registry, instr.finding);
        for (std::size_t i = 0; i < merged.size(); ++i) {
            merged[i] |= m[i];
        }
    }
    return merged;
}

Mask user_mask_override(const Latent& candidate, int canvas_width, int canvas_height) {
    if (candidate.width() != canvas_width || candidate.height() != canvas_height) {
        throw ParameterError("user mask is " + std::to_string(candidate.width()) + "x" +
                             std::to_string(candidate.height()) + ", canvas is " + std::to_string(canvas_width) +
                             "x" + std::to_string(canvas_height));
    }
    Mask mask(canvas_width, canvas_height);
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        if (candidate[i] == 1.0) {
            mask[i] = 1;
        } else if (candidate[i] != 0.0) {
            throw ParameterError("user mask has a non-binary value");
        }
    }
    return mask;
}

Latent read_user_mask_png(const std::filesystem::path& path) {
    const Grid<std::uint8_t> levels = read_png_levels(path);
    Latent out(levels.width(), levels.height());
    for (std::size_t i = 0; i < levels.size(); ++i) {
        out[i] = levels[i] / 255.0;
    }
    return out;
}

} // namespace cfedit
