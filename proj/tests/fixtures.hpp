// Deterministic synthetic fixtures shared by the unit and acceptance suites:
// seeded noise, band-limited burst sources with controlled time supports,
// angle-parameterized mixtures, and directional point bundles.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "dirsep/audio.hpp"
#include "dirsep/directional.hpp"
#include "dirsep/evaluate.hpp"
#include "dirsep/sparsify.hpp"

namespace fixtures {

inline double unit_open(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double amplitude = 0.5) {
    std::mt19937_64 rng(seed);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amplitude * (2.0 * unit_open(rng) - 1.0);
    return x;
}

inline dirsep::AudioBuffer noise_buffer(std::size_t channels, std::size_t n, double rate,
                                        std::uint64_t seed) {
    dirsep::AudioBuffer buf;
    buf.sample_rate = rate;
    for (std::size_t k = 0; k < channels; ++k) buf.channels.push_back(white_noise(n, seed + k));
    return buf;
}

// Narrowband noise burst source: inside each active span, a sum of seeded
// random sinusoids confined to [f_lo, f_hi] Hz with raised-cosine ramps.
inline dirsep::AudioBuffer burst_source(std::size_t n, double rate, double f_lo, double f_hi,
                                        const std::vector<std::pair<std::size_t, std::size_t>>& spans,
                                        std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    dirsep::AudioBuffer buf;
    buf.sample_rate = rate;
    buf.channels.assign(1, std::vector<double>(n, 0.0));
    std::vector<double>& x = buf.channels[0];

    const std::size_t ramp = static_cast<std::size_t>(0.02 * rate);
    constexpr std::size_t tones = 24;
    for (const auto& [begin, end] : spans) {
        std::vector<double> freq(tones), phase(tones);
        for (std::size_t j = 0; j < tones; ++j) {
            freq[j] = f_lo + (f_hi - f_lo) * unit_open(rng);
            phase[j] = 2.0 * std::numbers::pi * unit_open(rng);
        }
        for (std::size_t i = begin; i < end && i < n; ++i) {
            double env = 1.0;
            if (i - begin < ramp) env = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i - begin) / static_cast<double>(ramp)));
            if (end - i <= ramp) env = std::min(env, 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(end - i) / static_cast<double>(ramp))));
            double v = 0.0;
            for (std::size_t j = 0; j < tones; ++j)
                v += std::sin(2.0 * std::numbers::pi * freq[j] * static_cast<double>(i) / rate + phase[j]);
            x[i] += env * v / std::sqrt(static_cast<double>(tones));
        }
    }
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::fabs(v));
    if (peak > 0.0)
        for (double& v : x) v *= 0.5 / peak;
    return buf;
}

struct MixtureFixture {
    dirsep::AudioBuffer mixture;
    std::vector<dirsep::AudioBuffer> references;
    dirsep::MixingSpec spec;
};

// L burst sources with largely disjoint supports, mixed through the given
// angle set. Every time slot has one dominant source at full level plus the
// next source at a quarter level, and the bands overlap halfway, so a
// minority of time-frequency points genuinely carries two sources.
inline MixtureFixture make_burst_mixture(const std::vector<std::vector<double>>& angles_deg,
                                         std::size_t K, double rate, double seconds,
                                         std::uint64_t seed) {
    const std::size_t L = angles_deg.size();
    const auto n = static_cast<std::size_t>(rate * seconds);
    const std::size_t slot = static_cast<std::size_t>(0.5 * rate);
    const std::size_t slots = n / slot;

    MixtureFixture fx;
    fx.spec = dirsep::mixing_matrix(angles_deg, K);
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<std::pair<std::size_t, std::size_t>> primary, secondary;
        for (std::size_t s = 0; s < slots; ++s) {
            if (s % L == l)
                primary.emplace_back(s * slot, (s + 1) * slot);
            else if ((s + L - 1) % L == l)
                secondary.emplace_back(s * slot, (s + 1) * slot);
        }
        const double f_lo = 300.0 + 450.0 * static_cast<double>(l);
        dirsep::AudioBuffer src = burst_source(n, rate, f_lo, f_lo + 900.0, primary, seed + 17 * l);
        const dirsep::AudioBuffer weak =
            burst_source(n, rate, f_lo, f_lo + 900.0, secondary, seed + 17 * l + 7);
        for (std::size_t i = 0; i < n; ++i) src.channels[0][i] += 0.25 * weak.channels[0][i];
        fx.references.push_back(std::move(src));
    }
    fx.mixture = dirsep::mix(fx.references, fx.spec);
    return fx;
}

inline MixtureFixture make_burst_mixture_2x4(std::uint64_t seed) {
    return make_burst_mixture({{-60.0}, {-20.0}, {20.0}, {70.0}}, 2, 16000.0, 10.0, seed);
}

// Directional bundle data: per angle, draws from the directional Laplacian
// at that axial direction (D = 2), optionally contaminated with a fraction
// of uniform axial outliers.
inline dirsep::SparseDirectionalSet directional_bundles(const std::vector<double>& angles_deg,
                                                        double concentration,
                                                        std::size_t per_cluster, std::uint64_t seed,
                                                        double outlier_fraction = 0.0) {
    dirsep::SparseDirectionalSet set;
    set.dimension = 2;
    std::uint32_t counter = 0;
    for (std::size_t c = 0; c < angles_deg.size(); ++c) {
        const double rad = angles_deg[c] * std::numbers::pi / 180.0;
        dirsep::DldParams p;
        p.dimension = 2;
        p.mean = {std::cos(rad), std::sin(rad)};
        p.concentration = concentration;
        const std::vector<double> pts = dirsep::sample_dld(p, per_cluster, seed + 101 * c);
        set.points.insert(set.points.end(), pts.begin(), pts.end());
        for (std::size_t i = 0; i < per_cluster; ++i)
            set.origins.push_back({counter++, 0, dirsep::PointPart::real_part});
    }
    if (outlier_fraction > 0.0) {
        const auto extra = static_cast<std::size_t>(outlier_fraction * static_cast<double>(set.count()));
        dirsep::DldParams uniform;
        uniform.dimension = 2;
        uniform.mean = {1.0, 0.0};
        uniform.concentration = 0.0;
        const std::vector<double> pts = dirsep::sample_dld(uniform, extra, seed + 9999);
        set.points.insert(set.points.end(), pts.begin(), pts.end());
        for (std::size_t i = 0; i < extra; ++i)
            set.origins.push_back({counter++, 0, dirsep::PointPart::real_part});
    }
    return set;
}

// Axial angle between two directions, degrees in [0, 90].
inline double axial_angle_deg(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return std::acos(std::min(1.0, std::fabs(dot))) * 180.0 / std::numbers::pi;
}

}  // namespace fixtures
