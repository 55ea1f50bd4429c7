#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfedit/imaging.hpp"
#include "cfedit/instruction.hpp"

namespace cfedit {

/// Variance schedule indexed by training step t = 0..T, with alpha_bar(0) = 1.
class NoiseSchedule {
public:
    // betas[k] is the variance of step k + 1; must be positive and increasing.
    explicit NoiseSchedule(std::vector<double> betas);

    // Linear betas from beta_start to beta_end over `steps` training steps.
    static NoiseSchedule linear(int steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

    int steps() const noexcept { return static_cast<int>(betas_.size()); }
    double beta(int t) const;
    double alpha_bar(int t) const;

private:
    std::vector<double> betas_;
    std::vector<double> alpha_bar_;
};

// z = sqrt(alpha_bar) * x0 + sqrt(1 - alpha_bar) * eps
Latent add_noise(const Latent& x0, const Latent& eps, double alpha_bar);
Latent add_noise(const Latent& x0, const Latent& eps, int t, const NoiseSchedule& schedule);

// Standard normal draws from a 64-bit seed.
Latent gaussian_noise(int width, int height, std::uint64_t seed);

/// Noise predictor eps(z_t, t, image, text). An empty instruction set is the
/// null text condition; the all-zero image is the null image condition.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Latent predict_noise(const Latent& z, int t, const GrayImage& image, const InstructionSet& text) const = 0;
};

struct Blob {
    double cx;
    double cy;
    double radius;
    double amplitude;
};

/// Synthetic world where every finding is a compact blob:
///   shape(p) = exp(-2 |p - c|^2 / r^2) for |p - c| <= r, 0 outside.
/// The edit target for an image I and instructions T is
///   x0(I, T) = clamp(I + sum_k signed_k * amplitude_k * shape_k, 0, 1)
/// Add contributes +scale(severity), Remove contributes -scale(severity), and
/// ChangeLevel contributes scale(target) - reference_scale, the finding being
/// assumed present at the reference level. Missing severity means the
/// reference level. Findings without a blob do not change the image.
class BlobWorld {
public:
    BlobWorld(std::map<std::string, Blob> blobs, std::map<Severity, double> severity_scale,
              double reference_scale = 0.5);

    static std::map<Severity, double> default_severity_scale();

    // JSON: {"findings": {"<f>": {"center": [x,y], "radius": r, "amplitude": a}},
    //        "severity_scale": {"mild": 0.5, ...}, "reference_scale": 0.5}
    static BlobWorld load(const std::filesystem::path& path);
    static BlobWorld from_json_text(const std::string& text);
    std::string to_json_text() const;

    const std::map<std::string, Blob>& blobs() const noexcept { return blobs_; }
    double severity_multiplier(const std::optional<Severity>& severity) const;
    double reference_scale() const noexcept { return reference_scale_; }

    // Signed amplitude multiplier an instruction applies to its blob.
    double signed_multiplier(const EditInstruction& instruction) const;

    // Blob profile for `finding` on a width x height grid (zero if unknown).
    Latent blob_field(const std::string& finding, int width, int height) const;

    // Support of the finding's blob (|p - c| <= r).
    Mask blob_support(const std::string& finding, int width, int height) const;

    GrayImage target(const GrayImage& image, const InstructionSet& text) const;

private:
    std::map<std::string, Blob> blobs_;
    std::map<Severity, double> severity_scale_;
    double reference_scale_;
};

/// Noise that maps z back onto the world's clean target:
///   eps = (z - sqrt(alpha_bar_t) * x0(I, T)) / sqrt(1 - alpha_bar_t)
/// Requires 1 <= t <= T.
Latent oracle_epsilon(const Latent& z, int t, const GrayImage& image, const InstructionSet& text,
                      const BlobWorld& world, const NoiseSchedule& schedule);

/// Closed-form predictor that knows the clean target exactly:
///   eps = (z - sqrt(alpha_bar_t) * x0(I, T)) / sqrt(1 - alpha_bar_t)
/// With empty text the target is the conditioning image itself.
class OracleDenoiser final : public Denoiser {
public:
    OracleDenoiser(BlobWorld world, NoiseSchedule schedule);

    Latent predict_noise(const Latent& z, int t, const GrayImage& image, const InstructionSet& text) const override;

    const BlobWorld& world() const noexcept { return world_; }
    const NoiseSchedule& schedule() const noexcept { return schedule_; }

private:
    BlobWorld world_;
    NoiseSchedule schedule_;
};

struct GuidanceScales {
    double image = 1.5;
    double text = 7.5;
};

/// Two-scale classifier-free guidance:
///   eps = e(0,0) + s_image * (e(I,0) - e(0,0)) + s_text * (e(I,T) - e(I,0))
Latent cfg_epsilon(const Latent& z, int t, const GrayImage& image, const InstructionSet& text,
                   const GuidanceScales& scales, const Denoiser& denoiser);

// Evenly spaced descending step indices, first == T, last >= 1.
std::vector<int> sampling_timesteps(int train_steps, int steps);

/// Called after each update with the freshly computed state and the step it
/// now sits at; may overwrite parts of the state.
using StepHook = std::function<void(Latent& z, int t)>;

/// Deterministic (eta = 0) sampler from z_T down to z_0:
///   x0_hat = (z_t - sqrt(1 - a_t) eps) / sqrt(a_t)
///   z_t'   = sqrt(a_t') x0_hat + sqrt(1 - a_t') eps
Latent sample(const Latent& z_start, const GrayImage& image, const InstructionSet& text, const GuidanceScales& scales,
              const Denoiser& denoiser, const NoiseSchedule& schedule, int steps, const StepHook& hook = {});

} // namespace cfedit
