#include "cfedit/probes.hpp"

#include <cmath>

namespace cfedit {

BlobPresenceProbe::BlobPresenceProbe(BlobWorld world, double gain) : world_(std::move(world)), gain_(gain) {}

std::vector<std::string> BlobPresenceProbe::classes() const {
    std::vector<std::string> out;
    for (const auto& [finding, blob] : world_.blobs()) out.push_back(finding);
    return out;
}

std::vector<double> BlobPresenceProbe::predict(const GrayImage& img) const {
    std::vector<double> out;
    for (const auto& [finding, blob] : world_.blobs()) {
        const Latent field = world_.blob_field(finding, img.width(), img.height());
        double inside = 0.0, weight = 0.0, outside = 0.0;
        std::size_t outside_count = 0;
        for (std::size_t i = 0; i < img.size(); ++i) {
            if (field[i] > 0.0) {
                inside += field[i] * img[i];
                weight += field[i];
            } else {
                outside += img[i];
                ++outside_count;
            }
        }
        double contrast = 0.0;
        if (weight > 0.0 && outside_count > 0) {
            contrast = inside / weight - outside / static_cast<double>(outside_count);
        }
        out.push_back(1.0 / (1.0 + std::exp(-gain_ * contrast)));
    }
    return out;
}

PathologyDistribution average_distribution(const std::vector<GrayImage>& images, const PathologyProbe& probe) {
    if (images.empty()) {
        throw ParameterError("average_distribution: no images");
    }
    PathologyDistribution dist{probe.classes(), {}};
    dist.probabilities.assign(dist.classes.size(), 0.0);
    for (const auto& img : images) {
        const auto p = probe.predict(img);
        for (std::size_t k = 0; k < p.size(); ++k) dist.probabilities[k] += p[k];
    }
    for (double& v : dist.probabilities) v /= static_cast<double>(images.size());
    return dist;
}

} // namespace cfedit
