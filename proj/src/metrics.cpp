#include "cfedit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

namespace cfedit {

double auroc(const ScoreSet& s) {
    if (s.labels.size() != s.scores.size()) {
        throw ParameterError("auroc: labels and scores differ in length");
    }
    std::vector<std::size_t> order(s.scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (double v : s.scores) {
        if (!std::isfinite(v)) throw ParameterError("auroc: non-finite score");
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

    // Midranks (1-based) summed over positives; halves are exact in binary.
    double positive_rank_sum = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && s.scores[order[j + 1]] == s.scores[order[i]]) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            const int label = s.labels[order[k]];
            if (label != 0 && label != 1) throw ParameterError("auroc: labels must be 0 or 1");
            if (label == 1) {
                positive_rank_sum += midrank;
                ++n_pos;
            }
        }
        i = j + 1;
    }
    const std::size_t n_neg = order.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw ParameterError("auroc: need at least one positive and one negative");
    }
    const double np = static_cast<double>(n_pos);
    const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw ParameterError("pearson: length mismatch");
    }
    if (x.size() < 2) {
        throw ParameterError("pearson: need at least two points");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw ParameterError("pearson: zero variance");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double cmig(const std::vector<double>& accuracy, const std::vector<double>& retention) {
    if (accuracy.empty() || retention.empty()) {
        throw ParameterError("cmig: empty metric list");
    }
    bool any_zero = false;
    auto mean_log = [&](const std::vector<double>& values) {
        double sum = 0.0;
        for (double v : values) {
            if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("cmig: value outside [0, 1]");
            if (v == 0.0) {
                any_zero = true;
            } else {
                sum += std::log(v);
            }
        }
        return sum / static_cast<double>(values.size());
    };
    const double la = mean_log(accuracy);
    const double lf = mean_log(retention);
    if (any_zero) return 0.0;
    return std::exp(0.5 * (la + lf));
}

double kl_divergence(const PathologyDistribution& p, const PathologyDistribution& q) {
    if (p.classes != q.classes) {
        throw ParameterError("kl_divergence: class lists differ");
    }
    if (p.probabilities.size() != p.classes.size() || q.probabilities.size() != q.classes.size()) {
        throw ParameterError("kl_divergence: probability count differs from class count");
    }
    auto clamp = [](double v) {
        if (!std::isfinite(v)) throw ParameterError("kl_divergence: non-finite probability");
        return std::clamp(v, kProbabilityClamp, 1.0 - kProbabilityClamp);
    };
    double sum = 0.0;
    for (std::size_t i = 0; i < p.probabilities.size(); ++i) {
        const double pi = clamp(p.probabilities[i]);
        const double qi = clamp(q.probabilities[i]);
        sum += pi * std::log(pi / qi);
    }
    return sum;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) {
        throw ParameterError("psd_sqrt: eigendecomposition failed");
    }
    // Eigenvalues within rounding noise of zero are treated as zero.
    const Eigen::VectorXd& ev = solver.eigenvalues();
    const double floor = static_cast<double>(ev.size()) * std::numeric_limits<double>::epsilon() *
                         std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    const Eigen::VectorXd roots = ev.unaryExpr([floor](double v) { return v > floor ? std::sqrt(v) : 0.0; });
    return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

namespace {

void check_stats(const EmbeddingStats& s) {
    const auto d = s.mean.size();
    if (s.covariance.rows() != d || s.covariance.cols() != d) {
        throw ParameterError("embedding stats: covariance shape does not match mean");
    }
    const double scale = std::max(1.0, s.covariance.cwiseAbs().maxCoeff());
    if ((s.covariance - s.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw ParameterError("embedding stats: covariance is not symmetric");
    }
}

} // namespace

double frechet_distance(const EmbeddingStats& a, const EmbeddingStats& b) {
    check_stats(a);
    check_stats(b);
    if (a.mean.size() != b.mean.size()) {
        throw ParameterError("frechet_distance: dimension mismatch");
    }
    const double mean_term = (a.mean - b.mean).squaredNorm();
    const Eigen::MatrixXd root_a = psd_sqrt(a.covariance);
    Eigen::MatrixXd inner = root_a * b.covariance * root_a;
    inner = 0.5 * (inner + inner.transpose());
    const double cross = psd_sqrt(inner).trace();
    const double value = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    return std::max(value, 0.0);
}

PooledProjectionExtractor::PooledProjectionExtractor(std::uint64_t seed, int dims, int pool) : pool_(pool) {
    if (dims < 1 || pool < 1) {
        throw ParameterError("extractor dimensions must be positive");
    }
    const int inputs = pool * pool;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(inputs)));
    projection_.resize(dims, inputs);
    for (int r = 0; r < dims; ++r) {
        for (int c = 0; c < inputs; ++c) projection_(r, c) = normal(rng);
    }
}

Eigen::VectorXd PooledProjectionExtractor::extract(const GrayImage& img) const {
    const GrayImage src = (img.width() < pool_ || img.height() < pool_)
                              ? resize(img, std::max(img.width(), pool_), std::max(img.height(), pool_))
                              : img;
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(pool_ * pool_);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(pool_ * pool_);
    for (int y = 0; y < src.height(); ++y) {
        const int cy = static_cast<int>(static_cast<long long>(y) * pool_ / src.height());
        for (int x = 0; x < src.width(); ++x) {
            const int cx = static_cast<int>(static_cast<long long>(x) * pool_ / src.width());
            pooled(cy * pool_ + cx) += src.at(x, y);
            counts(cy * pool_ + cx) += 1.0;
        }
    }
    return projection_ * pooled.cwiseQuotient(counts);
}

EmbeddingStats embed_and_fit(const std::vector<GrayImage>& images, const FeatureExtractor& extractor) {
    if (images.size() < 2) {
        throw ParameterError("embed_and_fit: need at least two images");
    }
    std::vector<Eigen::VectorXd> features;
    features.reserve(images.size());
    for (const auto& img : images) {
        if (!img.same_shape(images.front())) {
            throw ParameterError("embed_and_fit: inconsistent image dimensions");
        }
        features.push_back(extractor.extract(img));
    }
    const auto d = features.front().size();
    const double n = static_cast<double>(features.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& f : features) mean += f;
    mean /= n;

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& f : features) {
        const Eigen::VectorXd c = f - mean;
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = i; j < d; ++j) cov(i, j) += c(i) * c(j);
        }
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i; j < d; ++j) {
            cov(i, j) /= (n - 1.0);
            cov(j, i) = cov(i, j);
        }
    }
    return {std::move(mean), std::move(cov), features.size()};
}

std::string MetricReport::to_json_text() const {
    nlohmann::ordered_json doc;
    doc["accuracy"] = nlohmann::ordered_json::object();
    for (const auto& [name, v] : accuracy) doc["accuracy"][name] = v;
    doc["retention"] = nlohmann::ordered_json::object();
    for (const auto& [name, v] : retention) doc["retention"][name] = v;
    auto optional_value = [](const std::optional<double>& v) {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    doc["cmig"] = optional_value(cmig);
    doc["kl"] = optional_value(kl);
    doc["fid"] = optional_value(fid);
    doc["n"] = n;
    return doc.dump(2);
}

} // namespace cfedit
