#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfedit/imaging.hpp"

namespace cfedit {

struct ScoreSet {
    std::vector<int> labels; // 1 positive, 0 negative
    std::vector<double> scores;
};

// Mann-Whitney estimate: P(score_pos > score_neg), ties counted as one half.
double auroc(const ScoreSet& s);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// sqrt(geomean(accuracy) * geomean(retention)), evaluated in log space.
/// All values must lie in [0, 1]; a zero anywhere gives exactly 0.
double cmig(const std::vector<double>& accuracy, const std::vector<double>& retention);

struct PathologyDistribution {
    std::vector<std::string> classes;
    std::vector<double> probabilities;
};

inline constexpr double kProbabilityClamp = 1e-9;

// sum_i P(i) ln(P(i) / Q(i)), probabilities clamped to [1e-9, 1 - 1e-9].
double kl_divergence(const PathologyDistribution& p, const PathologyDistribution& q);

struct EmbeddingStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    std::size_t count = 0;
};

// PSD square root via symmetric eigendecomposition; eigenvalues below d*eps*max|lambda| count as zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

/// |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)
double frechet_distance(const EmbeddingStats& a, const EmbeddingStats& b);

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual Eigen::VectorXd extract(const GrayImage& img) const = 0;
};

/// Area-average pool to 16x16, then a fixed seeded Gaussian projection to
/// `dims` features. Images smaller than the pool grid are bilinearly resized first.
class PooledProjectionExtractor final : public FeatureExtractor {
public:
    explicit PooledProjectionExtractor(std::uint64_t seed = 0x5eed, int dims = 32, int pool = 16);
    Eigen::VectorXd extract(const GrayImage& img) const override;

private:
    int pool_;
    Eigen::MatrixXd projection_;
};

// Mean and unbiased covariance of extracted features. Needs at least two images.
EmbeddingStats embed_and_fit(const std::vector<GrayImage>& images, const FeatureExtractor& extractor);

struct MetricReport {
    std::map<std::string, double> accuracy;
    std::map<std::string, double> retention;
    std::optional<double> cmig;
    std::optional<double> kl;
    std::optional<double> fid;
    std::size_t n = 0;

    // {"accuracy": {...}, "retention": {...}, "cmig": v, "kl": v, "fid": v, "n": count}
    std::string to_json_text() const;
};

} // namespace cfedit
