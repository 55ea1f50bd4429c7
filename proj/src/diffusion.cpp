#include "cfedit/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

namespace cfedit {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
    if (betas_.empty()) {
        throw ParameterError("noise schedule needs at least one step");
    }
    alpha_bar_.reserve(betas_.size() + 1);
    alpha_bar_.push_back(1.0);
    for (std::size_t i = 0; i < betas_.size(); ++i) {
        const double b = betas_[i];
        if (!(b > 0.0 && b < 1.0)) {
            throw ParameterError("noise schedule betas must lie in (0, 1)");
        }
        if (i > 0 && !(b > betas_[i - 1])) {
            throw ParameterError("noise schedule betas must be strictly increasing");
        }
        alpha_bar_.push_back(alpha_bar_.back() * (1.0 - b));
    }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 1) {
        throw ParameterError("noise schedule needs at least one step");
    }
    std::vector<double> betas(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        betas[static_cast<std::size_t>(i)] =
            steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (steps - 1);
    }
    return NoiseSchedule(std::move(betas));
}

double NoiseSchedule::beta(int t) const {
    if (t < 1 || t > steps()) {
        throw ParameterError("step index " + std::to_string(t) + " outside schedule");
    }
    return betas_[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > steps()) {
        throw ParameterError("step index " + std::to_string(t) + " outside schedule");
    }
    return alpha_bar_[static_cast<std::size_t>(t)];
}

Latent add_noise(const Latent& x0, const Latent& eps, double alpha_bar) {
    if (!x0.same_shape(eps)) {
        throw ParameterError("add_noise: noise shape differs from signal");
    }
    if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
        throw ParameterError("add_noise: alpha_bar outside [0, 1]");
    }
    const double signal = std::sqrt(alpha_bar);
    const double noise = std::sqrt(1.0 - alpha_bar);
    Latent z(x0.width(), x0.height());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = signal * x0[i] + noise * eps[i];
    }
    return z;
}

Latent add_noise(const Latent& x0, const Latent& eps, int t, const NoiseSchedule& schedule) {
    return add_noise(x0, eps, schedule.alpha_bar(t));
}

Latent gaussian_noise(int width, int height, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Latent out(width, height);
    for (double& v : out.values()) v = normal(rng);
    return out;
}

BlobWorld::BlobWorld(std::map<std::string, Blob> blobs, std::map<Severity, double> severity_scale,
                     double reference_scale)
    : blobs_(std::move(blobs)), severity_scale_(std::move(severity_scale)), reference_scale_(reference_scale) {
    for (const auto& [finding, blob] : blobs_) {
        if (!is_finding_identifier(finding)) {
            throw ParameterError("blob world: invalid finding '" + finding + "'");
        }
        if (!(blob.radius > 0.0) || !std::isfinite(blob.amplitude) || !std::isfinite(blob.cx) ||
            !std::isfinite(blob.cy)) {
            throw ParameterError("blob world: bad blob for '" + finding + "'");
        }
    }
    for (Severity s : all_severities()) {
        if (!severity_scale_.contains(s)) {
            throw ParameterError("blob world: severity scale missing '" + std::string(to_string(s)) + "'");
        }
    }
    // Multipliers must not decrease with severity rank.
    double previous = -std::numeric_limits<double>::infinity();
    for (Severity s : all_severities()) {
        const double v = severity_scale_.at(s);
        if (!std::isfinite(v) || v < previous) {
            throw ParameterError("blob world: severity scale must be non-decreasing in severity");
        }
        previous = v;
    }
    if (!std::isfinite(reference_scale_)) {
        throw ParameterError("blob world: reference scale must be finite");
    }
}

std::map<Severity, double> BlobWorld::default_severity_scale() {
    return {
        {Severity::Minimal, 0.3}, {Severity::Small, 0.5},  {Severity::Mild, 0.5},
        {Severity::Moderate, 0.75}, {Severity::Severe, 1.0}, {Severity::Large, 1.0},
    };
}

BlobWorld BlobWorld::from_json_text(const std::string& text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        std::map<std::string, Blob> blobs;
        for (const auto& [finding, entry] : doc.at("findings").items()) {
            const auto& center = entry.at("center");
            if (!center.is_array() || center.size() != 2) {
                throw ConfigError("blob world: center of '" + finding + "' must be [x, y]");
            }
            blobs[finding] = {center[0].get<double>(), center[1].get<double>(), entry.at("radius").get<double>(),
                              entry.at("amplitude").get<double>()};
        }
        auto scale = default_severity_scale();
        if (doc.contains("severity_scale")) {
            for (const auto& [name, value] : doc.at("severity_scale").items()) {
                const auto severity = parse_severity(name);
                if (!severity) {
                    throw ConfigError("blob world: unknown severity '" + name + "'");
                }
                scale[*severity] = value.get<double>();
            }
        }
        const double reference = doc.value("reference_scale", 0.5);
        return BlobWorld(std::move(blobs), std::move(scale), reference);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed blob world JSON: ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
}

BlobWorld BlobWorld::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open blob world " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

std::string BlobWorld::to_json_text() const {
    nlohmann::ordered_json doc;
    doc["findings"] = nlohmann::ordered_json::object();
    for (const auto& [finding, blob] : blobs_) {
        doc["findings"][finding] = {{"center", {blob.cx, blob.cy}}, {"radius", blob.radius}, {"amplitude", blob.amplitude}};
    }
    doc["severity_scale"] = nlohmann::ordered_json::object();
    for (Severity s : all_severities()) {
        doc["severity_scale"][std::string(to_string(s))] = severity_scale_.at(s);
    }
    doc["reference_scale"] = reference_scale_;
    return doc.dump();
}

double BlobWorld::severity_multiplier(const std::optional<Severity>& severity) const {
    return severity ? severity_scale_.at(*severity) : reference_scale_;
}

double BlobWorld::signed_multiplier(const EditInstruction& instruction) const {
    switch (instruction.operation) {
    case Operation::Add: return severity_multiplier(instruction.severity);
    case Operation::Remove: return -severity_multiplier(instruction.severity);
    case Operation::ChangeLevel: return severity_multiplier(instruction.severity) - reference_scale_;
    }
    return 0.0;
}

Latent BlobWorld::blob_field(const std::string& finding, int width, int height) const {
    Latent field(width, height);
    auto it = blobs_.find(finding);
    if (it == blobs_.end()) return field;
    const Blob& b = it->second;
    const double r2 = b.radius * b.radius;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
            if (d2 <= r2) field.at(x, y) = std::exp(-2.0 * d2 / r2);
        }
    }
    return field;
}

Mask BlobWorld::blob_support(const std::string& finding, int width, int height) const {
    Mask support(width, height);
    auto it = blobs_.find(finding);
    if (it == blobs_.end()) return support;
    const Blob& b = it->second;
    const double r2 = b.radius * b.radius;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
            support.at(x, y) = d2 <= r2 ? 1 : 0;
        }
    }
    return support;
}

GrayImage BlobWorld::target(const GrayImage& image, const InstructionSet& text) const {
    Latent out = image.latent();
    for (const auto& instr : text) {
        auto it = blobs_.find(instr.finding);
        if (it == blobs_.end()) continue;
        const double gain = signed_multiplier(instr) * it->second.amplitude;
        if (gain == 0.0) continue;
        const Latent field = blob_field(instr.finding, image.width(), image.height());
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (field[i] != 0.0) out[i] += gain * field[i];
        }
    }
    return GrayImage::clamped(std::move(out));
}

Latent oracle_epsilon(const Latent& z, int t, const GrayImage& image, const InstructionSet& text,
                      const BlobWorld& world, const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.steps()) {
        throw ParameterError("oracle_epsilon: step must lie in [1, T]");
    }
    if (!image.same_shape(z)) {
        throw ParameterError("oracle_epsilon: conditioning image shape differs from state");
    }
    const double a = schedule.alpha_bar(t);
    const double signal = std::sqrt(a);
    const double noise = std::sqrt(1.0 - a);
    const GrayImage clean = text.empty() ? image : world.target(image, text);
    Latent eps(z.width(), z.height());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        eps[i] = (z[i] - signal * clean[i]) / noise;
    }
    return eps;
}

OracleDenoiser::OracleDenoiser(BlobWorld world, NoiseSchedule schedule)
    : world_(std::move(world)), schedule_(std::move(schedule)) {}

Latent OracleDenoiser::predict_noise(const Latent& z, int t, const GrayImage& image, const InstructionSet& text) const {
    return oracle_epsilon(z, t, image, text, world_, schedule_);
}

Latent cfg_epsilon(const Latent& z, int t, const GrayImage& image, const InstructionSet& text,
                   const GuidanceScales& scales, const Denoiser& denoiser) {
    const GrayImage null_image(image.width(), image.height(), 0.0);
    const InstructionSet null_text;
    const Latent e_uncond = denoiser.predict_noise(z, t, null_image, null_text);
    const Latent e_image = denoiser.predict_noise(z, t, image, null_text);
    const Latent e_full = denoiser.predict_noise(z, t, image, text);
    Latent out(z.width(), z.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = e_uncond[i] + scales.image * (e_image[i] - e_uncond[i]) + scales.text * (e_full[i] - e_image[i]);
    }
    return out;
}

std::vector<int> sampling_timesteps(int train_steps, int steps) {
    if (steps < 1 || steps > train_steps) {
        throw ParameterError("sampler steps must lie in [1, T]");
    }
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int k = steps; k >= 1; --k) {
        out.push_back(static_cast<int>(static_cast<long long>(k) * train_steps / steps));
    }
    return out;
}

Latent sample(const Latent& z_start, const GrayImage& image, const InstructionSet& text, const GuidanceScales& scales,
              const Denoiser& denoiser, const NoiseSchedule& schedule, int steps, const StepHook& hook) {
    if (!image.same_shape(z_start)) {
        throw ParameterError("sample: conditioning image shape differs from state");
    }
    const std::vector<int> timesteps = sampling_timesteps(schedule.steps(), steps);
    Latent z = z_start;
    for (std::size_t k = 0; k < timesteps.size(); ++k) {
        const int t = timesteps[k];
        const int next = k + 1 < timesteps.size() ? timesteps[k + 1] : 0;
        const double a = schedule.alpha_bar(t);
        const double a_next = schedule.alpha_bar(next);
        const Latent eps = cfg_epsilon(z, t, image, text, scales, denoiser);

        const double sa = std::sqrt(a);
        const double sna = std::sqrt(1.0 - a);
        const double sa_next = std::sqrt(a_next);
        const double sna_next = std::sqrt(1.0 - a_next);
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double x0_hat = (z[i] - sna * eps[i]) / sa;
            z[i] = sa_next * x0_hat + sna_next * eps[i];
        }
        if (hook) hook(z, next);
    }
    return z;
}

} // namespace cfedit
