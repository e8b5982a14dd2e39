// Synthetic mixing from angle-parameterized matrices and SDR/SIR/SAR scoring.
// The metric decomposition is the time-invariant, filter-free variant:
// s_target is the orthogonal projection of the estimate onto its matched
// reference, e_interf the remainder of the projection onto the span of all
// references, e_artif everything outside that span.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "dirsep/audio.hpp"
#include "dirsep/errors.hpp"

namespace dirsep {

// Angle-parameterized K x L mixing matrix with unit-norm columns.
struct MixingSpec {
    std::size_t sensors = 0;  // K
    std::size_t sources = 0;  // L
    std::vector<std::vector<double>> angles_deg;  // per source, K-1 angles
    std::vector<double> matrix;  // K x L, row-major
    std::vector<std::string> warnings;

    double at(std::size_t k, std::size_t l) const { return matrix[k * sources + l]; }
};

// Column l from its K-1 angles via the nested spherical recursion:
// x_1 = prod cos(theta_j), x_i = sin(theta_{i-1}) * prod_{j>=i} cos(theta_j).
inline MixingSpec mixing_matrix(const std::vector<std::vector<double>>& angles_deg, std::size_t K) {
    if (K < 2) throw config_error("mixing_matrix: need K >= 2 sensors");
    if (angles_deg.empty()) throw config_error("mixing_matrix: need at least one source");

    MixingSpec spec;
    spec.sensors = K;
    spec.sources = angles_deg.size();
    spec.angles_deg = angles_deg;
    spec.matrix.assign(K * spec.sources, 0.0);

    for (std::size_t l = 0; l < spec.sources; ++l) {
        const std::vector<double>& angles = angles_deg[l];
        if (angles.size() != K - 1)
            throw config_error("mixing_matrix: source " + std::to_string(l + 1) + " needs "
                               + std::to_string(K - 1) + " angles, got " + std::to_string(angles.size()));
        std::vector<double> rad(angles.size());
        for (std::size_t j = 0; j < angles.size(); ++j) rad[j] = angles[j] * std::numbers::pi / 180.0;

        std::vector<double> col(K);
        double tail = 1.0;  // running product of cosines from the back
        for (std::size_t i = K; i-- > 1;) {
            col[i] = std::sin(rad[i - 1]) * tail;
            tail *= std::cos(rad[i - 1]);
        }
        col[0] = tail;
        for (std::size_t k = 0; k < K; ++k) spec.matrix[k * spec.sources + l] = col[k];
    }

    for (std::size_t a = 0; a < spec.sources; ++a) {
        for (std::size_t b = a + 1; b < spec.sources; ++b) {
            double t = 0.0;
            for (std::size_t k = 0; k < K; ++k) t += spec.at(k, a) * spec.at(k, b);
            const double axial = std::acos(std::min(1.0, std::fabs(t))) * 180.0 / std::numbers::pi;
            if (axial <= 1e-5)  // below double-precision acos resolution near 1
                throw config_error("mixing_matrix: sources " + std::to_string(a + 1) + " and "
                                   + std::to_string(b + 1) + " have identical axial directions");
            if (axial < 3.0)
                spec.warnings.push_back("columns " + std::to_string(a + 1) + " and " + std::to_string(b + 1)
                                        + " are only " + std::to_string(axial) + " degrees apart");
        }
    }
    return spec;
}

// Instantaneous mixing x(n) = A s(n). Sources must be mono, equal length and
// rate.
inline AudioBuffer mix(const std::vector<AudioBuffer>& sources, const MixingSpec& spec) {
    if (sources.size() != spec.sources)
        throw dimension_error("mix: source count does not match mixing spec");
    for (const auto& s : sources) {
        s.validate();
        if (s.channel_count() != 1) throw dimension_error("mix: sources must be mono");
    }
    const std::size_t n = sources.front().sample_count();
    const double rate = sources.front().sample_rate;
    for (const auto& s : sources) {
        if (s.sample_count() != n) throw dimension_error("mix: source lengths differ");
        if (s.sample_rate != rate) throw config_error("mix: source sample rates differ");
    }

    AudioBuffer out;
    out.sample_rate = rate;
    out.channels.assign(spec.sensors, std::vector<double>(n, 0.0));
    for (std::size_t k = 0; k < spec.sensors; ++k)
        for (std::size_t l = 0; l < spec.sources; ++l) {
            const double a = spec.at(k, l);
            if (a == 0.0) continue;
            const std::vector<double>& s = sources[l].channels[0];
            for (std::size_t i = 0; i < n; ++i) out.channels[k][i] += a * s[i];
        }
    return out;
}

struct SourceMetrics {
    double sdr = 0.0;
    double sir = 0.0;
    double sar = 0.0;
};

struct SeparationReport {
    std::vector<SourceMetrics> per_source;
    std::vector<std::size_t> permutation;  // estimate i is scored against reference permutation[i]
    SourceMetrics averages;
};

namespace detail {

inline constexpr double kMetricCapDb = 100.0;

inline double energy_ratio_db(double num, double den) {
    if (den <= 0.0 || den * 1e10 < num) return kMetricCapDb;
    const double v = 10.0 * std::log10(num / den);
    return std::clamp(v, -kMetricCapDb, kMetricCapDb);
}

}  // namespace detail

// Scores L estimates against L references, matching them by the permutation
// with the greatest total SIR (exhaustive, L <= 8). All dB values are capped
// at +/-100.
inline SeparationReport bss_metrics(const std::vector<AudioBuffer>& estimates,
                                    const std::vector<AudioBuffer>& references) {
    const std::size_t L = references.size();
    if (L == 0) throw dimension_error("bss_metrics: no references");
    if (estimates.size() != L) throw dimension_error("bss_metrics: estimate/reference count mismatch");
    if (L > 8) throw unsupported_error("bss_metrics: exhaustive matching supports up to 8 sources");

    for (const auto& b : references) {
        b.validate();
        if (b.channel_count() != 1) throw dimension_error("bss_metrics: references must be mono");
    }
    for (const auto& b : estimates) {
        b.validate();
        if (b.channel_count() != 1) throw dimension_error("bss_metrics: estimates must be mono");
    }
    const std::size_t n = references.front().sample_count();
    for (const auto& b : references)
        if (b.sample_count() != n) throw dimension_error("bss_metrics: reference lengths differ");
    for (const auto& b : estimates)
        if (b.sample_count() != n) throw dimension_error("bss_metrics: estimate length differs from references");

    const auto ni = static_cast<Eigen::Index>(n);
    const auto li = static_cast<Eigen::Index>(L);
    Eigen::MatrixXd S(ni, li);
    for (std::size_t l = 0; l < L; ++l) {
        const std::vector<double>& r = references[l].channels[0];
        for (std::size_t i = 0; i < n; ++i) S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = r[i];
        if (S.col(static_cast<Eigen::Index>(l)).squaredNorm() == 0.0)
            throw domain_error("bss_metrics: reference " + std::to_string(l + 1) + " is identically zero");
    }

    const Eigen::MatrixXd gram = S.transpose() * S;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible()) throw domain_error("bss_metrics: references are linearly dependent");

    // Per (estimate, reference) pair: the three component energies of the
    // decomposition e = s_target + e_interf + e_artif.
    struct Decomp {
        double target = 0.0;
        double interf = 0.0;
        double artif = 0.0;
    };
    std::vector<std::vector<Decomp>> table(L, std::vector<Decomp>(L));
    for (std::size_t i = 0; i < L; ++i) {
        Eigen::VectorXd e(ni);
        const std::vector<double>& est = estimates[i].channels[0];
        for (std::size_t s = 0; s < n; ++s) e(static_cast<Eigen::Index>(s)) = est[s];

        const Eigen::VectorXd coeffs = lu.solve(S.transpose() * e);
        const Eigen::VectorXd in_span = S * coeffs;
        const double artif = (e - in_span).squaredNorm();
        for (std::size_t j = 0; j < L; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double scale = e.dot(S.col(jj)) / S.col(jj).squaredNorm();
            const Eigen::VectorXd target = scale * S.col(jj);
            table[i][j].target = target.squaredNorm();
            table[i][j].interf = (in_span - target).squaredNorm();
            table[i][j].artif = artif;
        }
    }

    std::vector<std::size_t> perm(L);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best_perm = perm;
    double best_total = -std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < L; ++i)
            total += detail::energy_ratio_db(table[i][perm[i]].target, table[i][perm[i]].interf);
        if (total > best_total) {
            best_total = total;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    SeparationReport report;
    report.permutation = best_perm;
    report.per_source.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
        const Decomp& d = table[i][best_perm[i]];
        report.per_source[i].sdr = detail::energy_ratio_db(d.target, d.interf + d.artif);
        report.per_source[i].sir = detail::energy_ratio_db(d.target, d.interf);
        report.per_source[i].sar = detail::energy_ratio_db(d.target + d.interf, d.artif);
        report.averages.sdr += report.per_source[i].sdr;
        report.averages.sir += report.per_source[i].sir;
        report.averages.sar += report.per_source[i].sar;
    }
    report.averages.sdr /= static_cast<double>(L);
    report.averages.sir /= static_cast<double>(L);
    report.averages.sar /= static_cast<double>(L);
    return report;
}

}  // namespace dirsep
