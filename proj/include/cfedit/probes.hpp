#pragma once

#include <string>
#include <vector>

#include "cfedit/diffusion.hpp"
#include "cfedit/metrics.hpp"

namespace cfedit {

// Per-class probability predictor over images.
class PathologyProbe {
public:
    virtual ~PathologyProbe() = default;
    virtual std::vector<std::string> classes() const = 0;
    virtual std::vector<double> predict(const GrayImage& img) const = 0;
};

/// One class per blob in the world. The score is a logistic of the contrast
/// between the blob-weighted mean intensity and the mean intensity outside
/// the blob's support.
class BlobPresenceProbe final : public PathologyProbe {
public:
    explicit BlobPresenceProbe(BlobWorld world, double gain = 10.0);

    std::vector<std::string> classes() const override;
    std::vector<double> predict(const GrayImage& img) const override;

private:
    BlobWorld world_;
    double gain_;
};

// Class-wise average of probe outputs over `images`.
PathologyDistribution average_distribution(const std::vector<GrayImage>& images, const PathologyProbe& probe);

} // namespace cfedit
