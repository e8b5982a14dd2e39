// Directional Laplacian density family on the unit hypersphere: normalizing
// integrals, density evaluation, the directional distance and its importance
// weight, rejection sampling, and the concentration-parameter solver.
//
// The density is axially symmetric (x and -x are equivalent) and its
// normalizing constant integrates to one over a hemisphere; tests pin this
// convention down, and the model files record it.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dirsep/errors.hpp"
#include "dirsep/quadrature.hpp"

namespace dirsep {

struct QuadratureSpec {
    std::size_t node_count = 512;
    double target_rel_error = 1e-10;

    void validate() const {
        if (node_count < 64) throw config_error("QuadratureSpec: node_count must be >= 64");
    }
};

// Mean direction, concentration and dimension of one directional Laplacian.
struct DldParams {
    std::vector<double> mean;
    double concentration = 0.0;
    std::size_t dimension = 0;

    void validate() const {
        if (dimension < 2) throw config_error("DldParams: dimension must be >= 2");
        if (mean.size() != dimension) throw dimension_error("DldParams: mean length != dimension");
        if (concentration < 0.0) throw domain_error("DldParams: concentration must be >= 0");
        double nrm2 = 0.0;
        for (double v : mean) nrm2 += v * v;
        if (std::fabs(std::sqrt(nrm2) - 1.0) > 1e-12)
            throw domain_error("DldParams: mean must be unit norm");
    }
};

namespace detail {

inline double ipow(double base, std::size_t e) {
    double r = 1.0;
    while (e != 0) {
        if (e & 1) r *= base;
        base *= base;
        e >>= 1;
    }
    return r;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Uniform double in (0, 1), identical on every platform for a given stream.
inline double unit_open(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller; consumes two uniforms per draw so the stream layout is fixed.
inline double standard_normal(std::mt19937_64& rng) {
    const double u1 = unit_open(rng);
    const double u2 = unit_open(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace detail

// I_D(k) = (1/pi) * integral over [0, pi] of exp(-k sin t) sin^D t dt.
//
// The integrand is symmetric about pi/2, so one half is evaluated and
// doubled. The substitution t = (pi/2) u^2 clusters nodes at t = 0 where the
// integrand spikes for large k; 512 nodes hold the relative error below
// 1e-13 for k up to 1000 and D up to 6.
inline double bessel_like_integral(std::size_t D, double k, const QuadratureSpec& quad = {}) {
    if (k < 0.0) throw domain_error("bessel_like_integral: k must be >= 0");
    quad.validate();
    const detail::GaussLegendreRule& rule = detail::cached_gauss_legendre(quad.node_count);
    const double half_pi = 0.5 * std::numbers::pi;
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double u = 0.5 * (rule.nodes[i] + 1.0);  // map [-1,1] -> [0,1]
        const double w = 0.5 * rule.weights[i];
        const double theta = half_pi * u * u;
        const double s = std::sin(theta);
        sum += w * std::exp(-k * s) * detail::ipow(s, D) * std::numbers::pi * u;
    }
    return 2.0 / std::numbers::pi * sum;
}

// Normalizing coefficient c_D(k) = Gamma((D-1)/2) / (pi^((D+1)/2) I_{D-2}(k)).
inline double dld_norm_coeff(std::size_t D, double k, const QuadratureSpec& quad = {}) {
    if (D < 2) throw domain_error("dld_norm_coeff: dimension must be >= 2");
    const double num = std::tgamma(0.5 * (static_cast<double>(D) - 1.0));
    const double den = std::pow(std::numbers::pi, 0.5 * (static_cast<double>(D) + 1.0))
                       * bessel_like_integral(D - 2, k, quad);
    return num / den;
}

// Directional distance sqrt(1 - (m'x)^2): zero when x is on the axis of m,
// one when orthogonal; invariant under x -> -x.
inline double directional_distance(std::span<const double> x, std::span<const double> m) {
    const double t = detail::dot(x, m);
    double t2 = t * t;
    if (t2 > 1.0) t2 = 1.0;
    return std::sqrt(1.0 - t2);
}

// Importance weight (1 - D_l)/2 in [0, 1/2].
inline double importance_weight(std::span<const double> x, std::span<const double> m) {
    return 0.5 * (1.0 - directional_distance(x, m));
}

// Density c_D(k) exp(-k sqrt(1 - (m'x)^2)) for unit x.
inline double dld_pdf(std::span<const double> x, const DldParams& p, const QuadratureSpec& quad = {}) {
    p.validate();
    if (x.size() != p.dimension) throw dimension_error("dld_pdf: x dimension mismatch");
    if (std::fabs(detail::norm(x) - 1.0) > 1e-6) throw domain_error("dld_pdf: x must be unit norm");
    return dld_norm_coeff(p.dimension, p.concentration, quad)
           * std::exp(-p.concentration * directional_distance(x, p.mean));
}

// n i.i.d. draws, flattened row-major n x D. Rejection sampling: propose
// uniformly on the sphere, accept with probability exp(-k D_l), which is the
// density over its envelope c_D(k). Fixed seed gives an identical sequence.
inline std::vector<double> sample_dld(const DldParams& p, std::size_t n, std::uint64_t seed) {
    p.validate();
    if (n == 0) throw domain_error("sample_dld: n must be >= 1");
    const std::size_t D = p.dimension;
    std::mt19937_64 rng(seed);
    std::vector<double> out;
    out.reserve(n * D);
    std::vector<double> cand(D);
    while (out.size() < n * D) {
        double nrm2 = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
            cand[i] = detail::standard_normal(rng);
            nrm2 += cand[i] * cand[i];
        }
        const double nrm = std::sqrt(nrm2);
        if (nrm < 1e-12) continue;
        for (std::size_t i = 0; i < D; ++i) cand[i] /= nrm;
        const double dl = directional_distance(cand, p.mean);
        if (detail::unit_open(rng) < std::exp(-p.concentration * dl)) {
            out.insert(out.end(), cand.begin(), cand.end());
        }
    }
    return out;
}

struct ConcentrationSolution {
    double k = 0.0;
    bool saturated = false;  // rhs below the ratio at k_max; k clamped there
};

inline constexpr double kConcentrationMax = 1000.0;

// Solves I_{D-1}(k)/I_{D-2}(k) = rhs for k by bisection. The ratio decreases
// strictly from its value at k = 0 towards zero, so rhs at or above ratio(0)
// yields k = 0 and rhs at or below ratio(k_max) saturates at k_max.
inline ConcentrationSolution solve_concentration(double rhs, std::size_t D,
                                                 const QuadratureSpec& quad = {}) {
    if (!(rhs > 0.0 && rhs < 1.0)) throw domain_error("solve_concentration: rhs must be in (0, 1)");
    if (D < 2) throw domain_error("solve_concentration: dimension must be >= 2");
    const auto ratio = [&](double k) {
        return bessel_like_integral(D - 1, k, quad) / bessel_like_integral(D - 2, k, quad);
    };
    if (rhs >= ratio(0.0)) return {0.0, false};
    if (rhs <= ratio(kConcentrationMax)) return {kConcentrationMax, true};

    double lo = 0.0, hi = kConcentrationMax;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double r = ratio(mid);
        if (r > rhs)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-10 * std::max(1.0, lo) && std::fabs(r - rhs) <= 1e-8) break;
    }
    return {0.5 * (lo + hi), false};
}

}  // namespace dirsep
