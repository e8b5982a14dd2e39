// Selection of single-source-dominated time-frequency points. A local PCA of
// the augmented (real/imaginary) scatter around each point gives a confidence
// measure: the top eigenvalue against the mean of the rest. Points above the
// threshold are split into their real-part and imaginary-part directions and
// mapped to the unit hypersphere, where the mixture model is trained.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dirsep/errors.hpp"
#include "dirsep/stft.hpp"

namespace dirsep {

struct NeighborhoodStats {
    std::size_t t = 0;
    std::size_t f = 0;
    std::vector<double> eigenvalues;          // sorted non-increasing, >= 0
    std::vector<double> principal_direction;  // unit vector, length K
    double confidence = 0.0;
};

struct SparsifierConfig {
    std::size_t q = 2;                    // neighborhood side length
    double confidence_threshold = 300.0;  // paper range 300-350
    std::size_t min_points = 0;           // adaptive fallback floor; 0 disables

    void validate(std::size_t channels) const {
        if (q < 1) throw config_error("SparsifierConfig: q must be >= 1");
        if (2 * q * q < channels)
            throw config_error("SparsifierConfig: 2*q^2 must be >= channel count");
        if (!(confidence_threshold > 1.0))
            throw config_error("SparsifierConfig: confidence_threshold must be > 1");
    }
};

enum class PointPart : std::uint8_t { real_part = 0, imag_part = 1 };

struct PointOrigin {
    std::uint32_t t = 0;
    std::uint32_t f = 0;
    PointPart part = PointPart::real_part;
};

// Unit directions on S^{K-1} with their time-frequency provenance.
struct SparseDirectionalSet {
    std::size_t dimension = 0;
    std::vector<double> points;  // count x dimension, row-major, unit rows
    std::vector<PointOrigin> origins;
    double effective_threshold = 0.0;  // threshold actually applied after fallback

    std::size_t count() const { return dimension == 0 ? 0 : points.size() / dimension; }

    std::span<const double> point(std::size_t n) const {
        return {points.data() + n * dimension, dimension};
    }
};

namespace detail {

// Neighborhood index range [t - ceil(q/2) + 1, t + floor(q/2)] clamped to [0, size).
inline std::pair<std::size_t, std::size_t> window_range(std::size_t center, std::size_t q, std::size_t size) {
    const std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(center) - static_cast<std::ptrdiff_t>((q + 1) / 2) + 1;
    const std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(center) + static_cast<std::ptrdiff_t>(q / 2);
    const std::size_t begin = lo < 0 ? 0 : static_cast<std::size_t>(lo);
    const std::size_t end = std::min(size, static_cast<std::size_t>(hi + 1));
    return {begin, end};
}

inline void canonical_axial_sign(std::span<double> v) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::fabs(v[i]) > std::fabs(v[arg])) arg = i;
    if (v[arg] < 0.0)
        for (double& x : v) x = -x;
}

}  // namespace detail

// Local PCA of the augmented scatter in a q x q window around (t, f): the
// covariance of [Re X; Im X] over the window, its eigenvalues in decreasing
// order, the principal direction, and the confidence
// T = lambda_1 / mean(lambda_2..lambda_K), with a relative floor on the
// denominator. All-zero neighborhoods report confidence 0.
inline NeighborhoodStats neighborhood_stats(const Spectrogram& spec, std::size_t t, std::size_t f,
                                            std::size_t q) {
    const std::size_t K = spec.channels;
    if (K < 2) throw dimension_error("neighborhood_stats: need at least 2 channels");
    if (t >= spec.frames || f >= spec.bins) throw dimension_error("neighborhood_stats: index out of range");

    const auto [t0, t1] = detail::window_range(t, q, spec.frames);
    const auto [f0, f1] = detail::window_range(f, q, spec.bins);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    Eigen::VectorXd re(static_cast<Eigen::Index>(K)), im(static_cast<Eigen::Index>(K));
    for (std::size_t tt = t0; tt < t1; ++tt) {
        for (std::size_t ff = f0; ff < f1; ++ff) {
            for (std::size_t k = 0; k < K; ++k) {
                const std::complex<double> v = spec.at(k, tt, ff);
                re(static_cast<Eigen::Index>(k)) = v.real();
                im(static_cast<Eigen::Index>(k)) = v.imag();
            }
            cov.noalias() += re * re.transpose();
            cov.noalias() += im * im.transpose();
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

    NeighborhoodStats stats;
    stats.t = t;
    stats.f = f;
    stats.eigenvalues.resize(K);
    stats.principal_direction.resize(K);
    for (std::size_t k = 0; k < K; ++k) {  // solver returns ascending order
        stats.eigenvalues[k] = std::max(0.0, eig.eigenvalues()(static_cast<Eigen::Index>(K - 1 - k)));
        stats.principal_direction[k] = eig.eigenvectors()(static_cast<Eigen::Index>(k),
                                                          static_cast<Eigen::Index>(K - 1));
    }
    detail::canonical_axial_sign(stats.principal_direction);

    const double lambda1 = stats.eigenvalues.front();
    if (lambda1 <= 0.0) {
        stats.confidence = 0.0;
        stats.principal_direction.assign(K, 0.0);
        stats.principal_direction[0] = 1.0;
    } else {
        const double rest = std::accumulate(stats.eigenvalues.begin() + 1, stats.eigenvalues.end(), 0.0)
                            / static_cast<double>(K - 1);
        stats.confidence = lambda1 / std::max(rest, 1e-12 * lambda1);
    }
    return stats;
}

namespace detail {

// Appends the normalized real and imaginary parts of X(t, f) that clear the
// 1e-9 norm floor.
inline void emit_point_pair(const Spectrogram& spec, std::size_t t, std::size_t f,
                            SparseDirectionalSet& set) {
    const std::size_t K = spec.channels;
    std::vector<double> part(K);
    for (int which = 0; which < 2; ++which) {
        double nrm2 = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const std::complex<double> v = spec.at(k, t, f);
            part[k] = which == 0 ? v.real() : v.imag();
            nrm2 += part[k] * part[k];
        }
        const double nrm = std::sqrt(nrm2);
        if (nrm < 1e-9) continue;
        for (std::size_t k = 0; k < K; ++k) set.points.push_back(part[k] / nrm);
        set.origins.push_back({static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(f),
                               which == 0 ? PointPart::real_part : PointPart::imag_part});
    }
}

}  // namespace detail

// Confidence-thresholded selection. Every (t, f) whose neighborhood
// confidence exceeds the threshold contributes its real-part and
// imaginary-part directions as two separate samples, in (t, f, part) order.
// If fewer than min_points survive, the threshold is lowered by factors of
// 0.8 down to a floor of 1.5; an empty selection at the floor is an error.
inline SparseDirectionalSet select_points(const Spectrogram& spec, const SparsifierConfig& cfg) {
    const std::size_t K = spec.channels;
    if (K < 2) throw dimension_error("select_points: need at least 2 channels");
    cfg.validate(K);

    std::vector<double> confidence(spec.frames * spec.bins);
    for (std::size_t t = 0; t < spec.frames; ++t)
        for (std::size_t f = 0; f < spec.bins; ++f)
            confidence[t * spec.bins + f] = neighborhood_stats(spec, t, f, cfg.q).confidence;

    double threshold = cfg.confidence_threshold;
    for (;;) {
        SparseDirectionalSet set;
        set.dimension = K;
        set.effective_threshold = threshold;
        for (std::size_t t = 0; t < spec.frames; ++t)
            for (std::size_t f = 0; f < spec.bins; ++f)
                if (confidence[t * spec.bins + f] > threshold)
                    detail::emit_point_pair(spec, t, f, set);

        if (set.count() >= cfg.min_points && set.count() > 0) return set;
        if (cfg.min_points == 0 || threshold <= 1.5) {
            if (set.count() > 0) return set;  // short of min_points but non-empty at the floor
            throw empty_selection_error("select_points: no points above confidence threshold "
                                        + std::to_string(threshold));
        }
        threshold = std::max(1.5, threshold * 0.8);
    }
}

// Norm-threshold baseline: keeps the real/imaginary part vectors whose norm
// reaches the threshold. Kept for comparison with the confidence selector;
// may return an empty set.
inline SparseDirectionalSet norm_threshold_points(const Spectrogram& spec, double threshold) {
    if (threshold < 0.0) throw domain_error("norm_threshold_points: threshold must be >= 0");
    const std::size_t K = spec.channels;
    if (K < 2) throw dimension_error("norm_threshold_points: need at least 2 channels");

    SparseDirectionalSet set;
    set.dimension = K;
    set.effective_threshold = threshold;
    std::vector<double> part(K);
    for (std::size_t t = 0; t < spec.frames; ++t) {
        for (std::size_t f = 0; f < spec.bins; ++f) {
            for (int which = 0; which < 2; ++which) {
                double nrm2 = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    const std::complex<double> v = spec.at(k, t, f);
                    part[k] = which == 0 ? v.real() : v.imag();
                    nrm2 += part[k] * part[k];
                }
                const double nrm = std::sqrt(nrm2);
                if (nrm < threshold || nrm < 1e-9) continue;
                for (std::size_t k = 0; k < K; ++k) set.points.push_back(part[k] / nrm);
                set.origins.push_back({static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(f),
                                       which == 0 ? PointPart::real_part : PointPart::imag_part});
            }
        }
    }
    return set;
}

// Norm threshold that selects (at least) the target number of part vectors:
// the target-th largest part norm. Used to compare the two sparsifiers at
// matched selected-point counts.
inline double norm_threshold_for_count(const Spectrogram& spec, std::size_t target_count) {
    if (target_count == 0) return 0.0;
    std::vector<double> norms;
    const std::size_t K = spec.channels;
    norms.reserve(2 * spec.frames * spec.bins);
    for (std::size_t t = 0; t < spec.frames; ++t) {
        for (std::size_t f = 0; f < spec.bins; ++f) {
            double re2 = 0.0, im2 = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const std::complex<double> v = spec.at(k, t, f);
                re2 += v.real() * v.real();
                im2 += v.imag() * v.imag();
            }
            if (std::sqrt(re2) >= 1e-9) norms.push_back(std::sqrt(re2));
            if (std::sqrt(im2) >= 1e-9) norms.push_back(std::sqrt(im2));
        }
    }
    if (norms.empty()) return 0.0;
    std::sort(norms.begin(), norms.end(), std::greater<>());
    return norms[std::min(target_count, norms.size()) - 1];
}

// Axially folded angle histogram for two-channel data: theta = atan2(x2, x1)
// folded into [-90, 90) degrees, uniform bins, (bin center, count) pairs.
inline std::vector<std::pair<double, std::size_t>> angle_histogram(const SparseDirectionalSet& set,
                                                                   std::size_t bins) {
    if (set.dimension != 2) throw dimension_error("angle_histogram: dimension must be 2");
    if (bins == 0) throw config_error("angle_histogram: bins must be >= 1");

    std::vector<std::pair<double, std::size_t>> hist(bins);
    const double width = 180.0 / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) hist[b] = {-90.0 + (static_cast<double>(b) + 0.5) * width, 0};

    for (std::size_t n = 0; n < set.count(); ++n) {
        const std::span<const double> x = set.point(n);
        double theta = std::atan2(x[1], x[0]) * 180.0 / std::numbers::pi;
        if (theta < -90.0) theta += 180.0;
        if (theta >= 90.0) theta -= 180.0;
        auto b = static_cast<std::size_t>((theta + 90.0) / width);
        if (b >= bins) b = bins - 1;
        ++hist[b].second;
    }
    return hist;
}

// Sharpness summary of a histogram: mean of the top 5% of bins over the mean
// of the bottom 50%, both Laplace-smoothed by 0.5 counts. Higher means the
// mass is packed into fewer directions.
inline double peak_to_valley_ratio(const std::vector<std::pair<double, std::size_t>>& hist) {
    if (hist.empty()) throw dimension_error("peak_to_valley_ratio: empty histogram");
    std::vector<double> counts(hist.size());
    for (std::size_t i = 0; i < hist.size(); ++i) counts[i] = static_cast<double>(hist[i].second);
    std::sort(counts.begin(), counts.end(), std::greater<>());
    const std::size_t top = std::max<std::size_t>(1, (hist.size() + 19) / 20);
    const std::size_t bottom = std::max<std::size_t>(1, hist.size() / 2);
    const double peak = std::accumulate(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(top), 0.0)
                        / static_cast<double>(top);
    const double valley = std::accumulate(counts.end() - static_cast<std::ptrdiff_t>(bottom), counts.end(), 0.0)
                          / static_cast<double>(bottom);
    return (peak + 0.5) / (valley + 0.5);
}

inline void write_histogram_csv(const std::vector<std::pair<double, std::size_t>>& hist,
                                const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw io_error("cannot open for writing: " + path);
    os << "angle_deg,count\n";
    for (const auto& [angle, count] : hist) os << angle << "," << count << "\n";
    if (!os) throw io_error("short write: " + path);
}

inline void write_scatter_csv(const SparseDirectionalSet& set, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw io_error("cannot open for writing: " + path);
    for (std::size_t k = 0; k < set.dimension; ++k) os << (k ? "," : "") << "x" << (k + 1);
    os << "\n";
    os.precision(17);
    for (std::size_t n = 0; n < set.count(); ++n) {
        const std::span<const double> x = set.point(n);
        for (std::size_t k = 0; k < set.dimension; ++k) os << (k ? "," : "") << x[k];
        os << "\n";
    }
    if (!os) throw io_error("short write: " + path);
}

}  // namespace dirsep
