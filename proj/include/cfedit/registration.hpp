#pragma once

#include <array>
#include <optional>

#include "cfedit/imaging.hpp"

namespace cfedit {

/// Similarity transform about the image centre c:
///   p' = scale * R(angle) * (p - c) + c + (tx, ty)
/// with x to the right and y down.
struct RigidTransform {
    double angle = 0.0; // radians, (-pi, pi]
    double scale = 1.0;
    double tx = 0.0;
    double ty = 0.0;

    static RigidTransform identity() { return {}; }
    bool is_identity() const noexcept { return angle == 0.0 && scale == 1.0 && tx == 0.0 && ty == 0.0; }

    // Throws ParameterError for non-finite parameters or scale <= 0.
    void validate() const;

    // Transform equal to applying `first` and then `*this`.
    RigidTransform after(const RigidTransform& first) const;

    friend bool operator==(const RigidTransform&, const RigidTransform&) = default;
};

// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

// Negated mutual information in nats. Lower means better aligned.
struct MIScore {
    double value;
};

struct WarpResult {
    GrayImage image;
    Mask valid; // 1 where the source sample lay inside the input
};

/// Inverse-warps with bilinear sampling; pixels mapping outside the input are
/// zero-filled and flagged invalid. The identity transform returns the input
/// unchanged.
WarpResult warp_rigid(const GrayImage& img, const RigidTransform& t);
GrayImage apply_rigid(const GrayImage& img, const RigidTransform& t);

/// Joint histogram over bins x bins equal-width bins on [0, 1]. When `valid`
/// is given only pixels flagged 1 contribute.
MIScore mutual_information(const GrayImage& a, const GrayImage& b, int bins, const Mask* valid = nullptr);

struct RegistrationConfig {
    double max_angle_deg = 10.0;
    double min_scale = 0.9;
    double max_scale = 1.1;
    double max_translation = 20.0;
    int bins = 64;
    int restarts = 8;
    double threshold = -0.88;
};

struct RegistrationResult {
    RigidTransform transform;
    MIScore score;
    bool accepted;
};

/// Searches for the transform t minimizing
/// mutual_information(fixed, apply_rigid(moving, t)) within the configured
/// bounds, using Nelder-Mead simplex runs from a deterministic seed set that
/// always includes the identity.
RegistrationResult register_rigid(const GrayImage& fixed, const GrayImage& moving, const RegistrationConfig& cfg = {});

// Score of `t` as seen by register_rigid (invalid pixels excluded).
MIScore alignment_score(const GrayImage& fixed, const GrayImage& moving, const RigidTransform& t, int bins);

} // namespace cfedit
