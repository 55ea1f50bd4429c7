#include "cfedit/rse.hpp"

#include <cmath>

namespace cfedit {

void EditConfig::validate(const NoiseSchedule& schedule) const {
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw ParameterError("tau must lie in (0, 1]");
    }
    if (t_rel < 1 || t_rel > schedule.steps()) {
        throw ParameterError("t_rel must lie in [1, T]");
    }
    if (steps < 1 || steps > schedule.steps()) {
        throw ParameterError("steps must lie in [1, T]");
    }
    if (!std::isfinite(scales.image) || !std::isfinite(scales.text)) {
        throw ParameterError("guidance scales must be finite");
    }
}

RelevanceMap relevance_map(const GrayImage& image, const InstructionSet& text, int t_rel, std::uint64_t seed,
                           const Denoiser& denoiser, const NoiseSchedule& schedule) {
    if (t_rel < 1 || t_rel > schedule.steps()) {
        throw ParameterError("relevance_map: t_rel outside schedule");
    }
    const Latent eps = gaussian_noise(image.width(), image.height(), seed);
    const Latent z = add_noise(image.latent(), eps, t_rel, schedule);
    const Latent with_text = denoiser.predict_noise(z, t_rel, image, text);
    const Latent without_text = denoiser.predict_noise(z, t_rel, image, InstructionSet{});

    Latent diff(image.width(), image.height());
    for (std::size_t i = 0; i < diff.size(); ++i) {
        diff[i] = std::abs(with_text[i] - without_text[i]);
    }
    Latent normalized = normalize_map(diff);
    for (double& v : normalized.values()) {
        v = static_cast<double>(static_cast<float>(v));
    }
    return {std::move(normalized), t_rel};
}

GuidanceMap guidance_map(const RelevanceMap& relevance, const Mask& pseudo_mask) {
    if (!relevance.values.same_shape(pseudo_mask)) {
        throw ParameterError("guidance_map: relevance and mask dimensions differ");
    }
    Latent g(pseudo_mask.width(), pseudo_mask.height());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = pseudo_mask[i] != 0 ? relevance.values[i] : 0.0;
    }
    return {std::move(g)};
}

BinaryEditMask binarize(const GuidanceMap& guidance, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw ParameterError("binarize: tau must lie in (0, 1]");
    }
    Mask mask(guidance.values.width(), guidance.values.height());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = guidance.values[i] >= tau ? 1 : 0;
    }
    return {std::move(mask), tau};
}

EditResult edit(const GrayImage& image, const InstructionSet& text, const std::optional<Mask>& user_mask,
                const EditConfig& cfg, const MaskRegistry* registry, const Denoiser& denoiser,
                const NoiseSchedule& schedule) {
    cfg.validate(schedule);
    const int w = image.width();
    const int h = image.height();

    Mask pseudo = ones_mask(w, h);
    if (user_mask) {
        if (!image.same_shape(*user_mask)) {
            throw ParameterError("edit: user mask dimensions differ from the image");
        }
        pseudo = *user_mask;
    } else if (registry != nullptr && !text.empty()) {
        pseudo = resize_nearest(resolve_pseudo_mask(*registry, text), w, h);
    }

    RelevanceMap relevance = relevance_map(image, text, cfg.t_rel, cfg.seed + kRelevanceSeedOffset, denoiser, schedule);
    GuidanceMap guidance = guidance_map(relevance, pseudo);
    BinaryEditMask edit_mask = binarize(guidance, cfg.tau);

    const Latent& input = image.latent();
    const Latent eps_fixed = gaussian_noise(w, h, cfg.seed + kSamplingSeedOffset);
    const Mask& keep_out = edit_mask.mask;

    auto reset_outside = [&](Latent& z, int t) {
        const Latent reference = add_noise(input, eps_fixed, t, schedule);
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (keep_out[i] == 0) z[i] = reference[i];
        }
    };

    Latent z = add_noise(input, eps_fixed, schedule.steps(), schedule);
    Latent result = sample(z, image, text, cfg.scales, denoiser, schedule, cfg.steps, reset_outside);
    // Identity decoder; the outside region is already exactly the input.
    GrayImage edited = GrayImage::clamped(std::move(result));

    return {std::move(edited), std::move(relevance), std::move(guidance), std::move(edit_mask), std::move(pseudo)};
}

} // namespace cfedit
