#pragma once

#include <cstdint>
#include <optional>

#include "cfedit/diffusion.hpp"
#include "cfedit/imaging.hpp"
#include "cfedit/instruction.hpp"
#include "cfedit/maskreg.hpp"

namespace cfedit {

// Seed offsets derived from the single run seed.
inline constexpr std::uint64_t kRelevanceSeedOffset = 1;
inline constexpr std::uint64_t kSamplingSeedOffset = 2;

/// Normalized |eps(z, I, T) - eps(z, I, "")| at step t_rel. Values lie in
/// [0, 1] with peak exactly 1 unless all-zero, and are representable as
/// float32 so raw-grid export round-trips bit-exactly.
struct RelevanceMap {
    Latent values;
    int t_rel;
};

// Relevance restricted to the pseudo mask: G = M * R.
struct GuidanceMap {
    Latent values;
};

// 1 exactly where guidance >= tau.
struct BinaryEditMask {
    Mask mask;
    double tau;
};

struct EditConfig {
    double tau = 0.1;
    GuidanceScales scales{};
    int t_rel = 500;
    int steps = 50;
    std::uint64_t seed = 0;

    void validate(const NoiseSchedule& schedule) const;
};

RelevanceMap relevance_map(const GrayImage& image, const InstructionSet& text, int t_rel, std::uint64_t seed,
                           const Denoiser& denoiser, const NoiseSchedule& schedule);

GuidanceMap guidance_map(const RelevanceMap& relevance, const Mask& pseudo_mask);

BinaryEditMask binarize(const GuidanceMap& guidance, double tau);

struct EditResult {
    GrayImage image;
    RelevanceMap relevance;
    GuidanceMap guidance;
    BinaryEditMask mask;
    Mask pseudo_mask;
};

/// Region-restricted edit. The pseudo mask comes from `user_mask` when given,
/// otherwise from the registry (resized nearest-neighbour to the image), or
/// all-ones when neither is available. Sampling starts from the input noised
/// to step T with one fixed noise draw; after every update the state outside
/// the binary edit mask is reset to the input noised with that same draw, so
/// at step 0 those pixels equal the input exactly.
EditResult edit(const GrayImage& image, const InstructionSet& text, const std::optional<Mask>& user_mask,
                const EditConfig& cfg, const MaskRegistry* registry, const Denoiser& denoiser,
                const NoiseSchedule& schedule);

} // namespace cfedit
