// Gauss-Legendre rules on [-1, 1], computed by Newton iteration on the
// Legendre recurrence and cached per node count.
#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

namespace dirsep::detail {

struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline GaussLegendreRule make_gauss_legendre(std::size_t n) {
    GaussLegendreRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const std::size_t m = (n + 1) / 2;
    const double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (dn + 0.5));
        double z1 = 0.0, pp = 0.0;
        do {
            double p1 = 1.0, p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double dj = static_cast<double>(j);
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * dj + 1.0) * z * p2 - dj * p3) / (dj + 1.0);
            }
            pp = dn * (z * p1 - p2) / (z * z - 1.0);
            z1 = z;
            z = z1 - p1 / pp;
        } while (std::fabs(z - z1) > 1e-15);
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    return rule;
}

inline const GaussLegendreRule& cached_gauss_legendre(std::size_t n) {
    static std::map<std::size_t, GaussLegendreRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
    return it->second;
}

}  // namespace dirsep::detail
