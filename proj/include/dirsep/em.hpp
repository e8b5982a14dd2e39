// Mixtures of directional Laplacians fit by EM, in two flavours: weighted
// (each point's influence on a component scales with its proximity to that
// component's mean) and unweighted (the plain mixture). Means update by one
// renormalized gradient step per iteration with backtracking; concentrations
// come from the ratio equation solved by bisection.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "dirsep/directional.hpp"
#include "dirsep/errors.hpp"
#include "dirsep/sparsify.hpp"

namespace dirsep {

enum class MixtureMode { weighted, unweighted };

struct DldComponent {
    double a = 0.0;  // prior weight
    DldParams params;
    bool k_saturated = false;
};

struct TrainingRecord {
    std::size_t iteration = 0;
    double max_mean_movement_rad = 0.0;
    double avg_log_density = 0.0;
    std::vector<std::size_t> reseeded;
};

struct WmdldModel {
    std::size_t dimension = 0;
    MixtureMode mode = MixtureMode::weighted;
    std::vector<DldComponent> components;
    std::vector<TrainingRecord> training_log;

    std::size_t component_count() const { return components.size(); }

    void validate() const {
        if (components.empty()) throw config_error("WmdldModel: needs at least one component");
        double total = 0.0;
        for (const auto& c : components) {
            if (c.a < 0.0) throw config_error("WmdldModel: component weights must be >= 0");
            if (c.params.dimension != dimension) throw dimension_error("WmdldModel: component dimension mismatch");
            c.params.validate();
            total += c.a;
        }
        if (mode == MixtureMode::unweighted && std::fabs(total - 1.0) > 1e-9)
            throw config_error("WmdldModel: unweighted priors must sum to 1");
    }
};

struct EmConfig {
    std::size_t max_iterations = 200;
    double mean_tolerance = 1e-4;  // radians of axial mean movement
    double k_init = 15.0;
    double step_scale = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (max_iterations < 1) throw config_error("EmConfig: max_iterations must be >= 1");
        if (!(mean_tolerance > 0.0)) throw config_error("EmConfig: mean_tolerance must be > 0");
        if (k_init < 0.0) throw config_error("EmConfig: k_init must be >= 0");
        if (!(step_scale > 0.0)) throw config_error("EmConfig: step_scale must be > 0");
    }
};

// Per-point component responsibilities, rows summing to one.
struct ResponsibilityTable {
    std::size_t points = 0;
    std::size_t components = 0;
    std::vector<double> values;  // points x components, row-major

    double at(std::size_t n, std::size_t i) const { return values[n * components + i]; }
    double& at(std::size_t n, std::size_t i) { return values[n * components + i]; }
};

namespace detail {

inline double axial_angle(std::span<const double> a, std::span<const double> b) {
    const double t = std::min(1.0, std::fabs(dot(a, b)));
    return std::acos(t);
}

// Dominant eigenvector of the axial scatter sum of x x' over the given rows.
inline std::vector<double> axial_mean(const SparseDirectionalSet& data,
                                      const std::vector<std::size_t>& rows) {
    const auto D = static_cast<Eigen::Index>(data.dimension);
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(D, D);
    Eigen::VectorXd x(D);
    for (std::size_t n : rows) {
        const std::span<const double> p = data.point(n);
        for (Eigen::Index i = 0; i < D; ++i) x(i) = p[static_cast<std::size_t>(i)];
        scatter.noalias() += x * x.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter);
    std::vector<double> mean(data.dimension);
    for (Eigen::Index i = 0; i < D; ++i) mean[static_cast<std::size_t>(i)] = eig.eigenvectors()(i, D - 1);
    canonical_axial_sign(mean);
    return mean;
}

}  // namespace detail

// Directional K-means: farthest-point seeding from a seeded random start,
// assignment by directional distance, centers updated as the dominant
// eigenvector of each cluster's axial scatter. Runs until assignments
// stabilize or 100 rounds.
inline std::vector<double> directional_kmeans(const SparseDirectionalSet& data, std::size_t R,
                                              std::uint64_t seed) {
    const std::size_t N = data.count();
    const std::size_t D = data.dimension;
    if (R < 1) throw config_error("directional_kmeans: R must be >= 1");
    if (R > N) throw insufficient_data_error("directional_kmeans: more centers than points");

    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> centers;
    centers.reserve(R);
    {
        const std::size_t start = static_cast<std::size_t>(rng() % N);
        const std::span<const double> p = data.point(start);
        centers.emplace_back(p.begin(), p.end());
    }
    std::vector<double> min_dist(N);
    while (centers.size() < R) {
        std::size_t far = 0;
        double far_dist = -1.0;
        for (std::size_t n = 0; n < N; ++n) {
            double d = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) d = std::min(d, directional_distance(data.point(n), c));
            min_dist[n] = d;
            if (d > far_dist) {
                far_dist = d;
                far = n;
            }
        }
        const std::span<const double> p = data.point(far);
        centers.emplace_back(p.begin(), p.end());
    }

    std::vector<std::size_t> assign(N, R);
    std::vector<std::vector<std::size_t>> clusters(R);
    for (int round = 0; round < 100; ++round) {
        bool changed = false;
        for (auto& c : clusters) c.clear();
        for (std::size_t n = 0; n < N; ++n) {
            std::size_t best = 0;
            double best_dist = directional_distance(data.point(n), centers[0]);
            for (std::size_t r = 1; r < R; ++r) {
                const double d = directional_distance(data.point(n), centers[r]);
                if (d < best_dist) {
                    best_dist = d;
                    best = r;
                }
            }
            if (assign[n] != best) {
                assign[n] = best;
                changed = true;
            }
            clusters[best].push_back(n);
        }
        if (!changed) break;
        for (std::size_t r = 0; r < R; ++r) {
            if (clusters[r].empty()) {  // reseed dead center to the worst-covered point
                std::size_t far = 0;
                double far_dist = -1.0;
                for (std::size_t n = 0; n < N; ++n) {
                    const double d = directional_distance(data.point(n), centers[assign[n]]);
                    if (d > far_dist) {
                        far_dist = d;
                        far = n;
                    }
                }
                const std::span<const double> p = data.point(far);
                centers[r].assign(p.begin(), p.end());
            } else {
                centers[r] = detail::axial_mean(data, clusters[r]);
            }
        }
    }

    std::vector<double> flat;
    flat.reserve(R * D);
    for (const auto& c : centers) flat.insert(flat.end(), c.begin(), c.end());
    return flat;
}

// Gradient of the per-component objective sum of mass_n * log pdf(x_n; m, k)
// with respect to the mean, holding the masses (importance weight times
// responsibility) fixed. Only the exponent depends on m, so this is
// k * sum_n mass_n * (m'x_n) / sqrt(1 - (m'x_n)^2) * x_n, with the square
// clamped away from one to keep the factor finite.
inline std::vector<double> mean_gradient(const SparseDirectionalSet& data,
                                         std::span<const double> mean, double concentration,
                                         std::span<const double> point_mass) {
    const std::size_t N = data.count();
    const std::size_t D = data.dimension;
    if (mean.size() != D) throw dimension_error("mean_gradient: mean dimension mismatch");
    if (point_mass.size() != N) throw dimension_error("mean_gradient: mass length mismatch");
    std::vector<double> grad(D, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
        if (point_mass[n] == 0.0) continue;
        const std::span<const double> x = data.point(n);
        const double t = detail::dot(x, mean);
        const double t2 = std::min(t * t, 1.0 - 1e-12);
        const double coeff = concentration * t / std::sqrt(1.0 - t2) * point_mass[n];
        for (std::size_t d = 0; d < D; ++d) grad[d] += coeff * x[d];
    }
    return grad;
}

// E-step: responsibilities p(i|x_n) proportional to a_i c_D(k_i) e^{-k_i D_l}.
// Computed per point in log space so a hard cluster never underflows the row.
inline ResponsibilityTable e_step(const SparseDirectionalSet& data, const WmdldModel& model) {
    model.validate();
    if (model.dimension != data.dimension) throw dimension_error("e_step: model/data dimension mismatch");
    const std::size_t N = data.count();
    const std::size_t R = model.component_count();

    std::vector<double> log_coeff(R);
    for (std::size_t i = 0; i < R; ++i) {
        const DldComponent& c = model.components[i];
        log_coeff[i] = (c.a > 0.0 ? std::log(c.a) : -std::numeric_limits<double>::infinity())
                       + std::log(dld_norm_coeff(model.dimension, c.params.concentration));
    }

    ResponsibilityTable resp{N, R, std::vector<double>(N * R)};
    std::vector<double> v(R);
    for (std::size_t n = 0; n < N; ++n) {
        const std::span<const double> x = data.point(n);
        double vmax = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < R; ++i) {
            const DldComponent& c = model.components[i];
            v[i] = log_coeff[i] - c.params.concentration * directional_distance(x, c.params.mean);
            vmax = std::max(vmax, v[i]);
        }
        if (!std::isfinite(vmax)) {  // every component has zero prior mass
            for (std::size_t i = 0; i < R; ++i) resp.at(n, i) = 1.0 / static_cast<double>(R);
            continue;
        }
        double den = 0.0;
        for (std::size_t i = 0; i < R; ++i) {
            const double e = std::exp(v[i] - vmax);
            resp.at(n, i) = e;
            den += e;
        }
        den = std::max(den, 1e-300);
        for (std::size_t i = 0; i < R; ++i) resp.at(n, i) /= den;
    }
    return resp;
}

namespace detail {

// Mean log mixture density over the data, with the importance weights inside
// the mixture sum in weighted mode. Diagnostic only.
inline double average_log_density(const SparseDirectionalSet& data, const WmdldModel& model) {
    const std::size_t N = data.count();
    const std::size_t R = model.component_count();
    std::vector<double> log_coeff(R);
    for (std::size_t i = 0; i < R; ++i) {
        const DldComponent& c = model.components[i];
        log_coeff[i] = (c.a > 0.0 ? std::log(c.a) : -std::numeric_limits<double>::infinity())
                       + std::log(dld_norm_coeff(model.dimension, c.params.concentration));
    }
    double total = 0.0;
    std::vector<double> v(R);
    for (std::size_t n = 0; n < N; ++n) {
        const std::span<const double> x = data.point(n);
        double vmax = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < R; ++i) {
            const DldComponent& c = model.components[i];
            double term = log_coeff[i] - c.params.concentration * directional_distance(x, c.params.mean);
            if (model.mode == MixtureMode::weighted) {
                const double w = importance_weight(x, c.params.mean);
                term += w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
            }
            v[i] = term;
            vmax = std::max(vmax, v[i]);
        }
        if (!std::isfinite(vmax)) {
            total += -700.0;  // all terms vanished; clamp the log
            continue;
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < R; ++i) sum += std::exp(v[i] - vmax);
        total += vmax + std::log(sum);
    }
    return N == 0 ? 0.0 : total / static_cast<double>(N);
}

}  // namespace detail

// M-step. Per component: importance weights from the pre-update mean (all
// ones in unweighted mode), prior update a_i = mean of w*p, one backtracked
// gradient step on the mean followed by renormalization, and the
// concentration from the weighted mean directional distance. Components whose
// responsibility mass collapses are reseeded to the worst-covered data point.
// Appends one record to the returned model's training log.
inline WmdldModel m_step(const SparseDirectionalSet& data, const WmdldModel& model,
                         const ResponsibilityTable& resp, const EmConfig& cfg) {
    model.validate();
    cfg.validate();
    const std::size_t N = data.count();
    const std::size_t R = model.component_count();
    const std::size_t D = model.dimension;
    if (resp.points != N || resp.components != R) throw dimension_error("m_step: responsibility table shape mismatch");

    WmdldModel next = model;
    TrainingRecord record;
    record.iteration = model.training_log.size() + 1;

    std::vector<double> wp(N), mass(R, 0.0);
    std::vector<double> grad(D), trial(D);
    for (std::size_t i = 0; i < R; ++i) {
        const std::vector<double>& mean = model.components[i].params.mean;
        const double k = model.components[i].params.concentration;

        double dl_sum = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const std::span<const double> x = data.point(n);
            const double w = model.mode == MixtureMode::weighted ? importance_weight(x, mean) : 1.0;
            wp[n] = w * resp.at(n, i);
            mass[i] += wp[n];
            dl_sum += directional_distance(x, mean) * wp[n];
        }
        next.components[i].a = mass[i] / static_cast<double>(N);
        if (mass[i] < 1e-10) continue;  // reseeded below

        grad = mean_gradient(data, mean, k, wp);

        // Backtracking on the frozen objective sum of w*p*D_l: accept the
        // first step that does not increase it, up to 10 halvings.
        double eta = cfg.step_scale / std::max(1.0, mass[i]);
        std::vector<double>& new_mean = next.components[i].params.mean;
        new_mean = mean;
        for (int halving = 0; halving <= 10; ++halving) {
            double nrm2 = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                trial[d] = mean[d] + eta * grad[d];
                nrm2 += trial[d] * trial[d];
            }
            const double nrm = std::sqrt(nrm2);
            if (nrm < 1e-12) {
                eta *= 0.5;
                continue;
            }
            for (std::size_t d = 0; d < D; ++d) trial[d] /= nrm;
            double dl_trial = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                if (wp[n] == 0.0) continue;
                dl_trial += directional_distance(data.point(n), trial) * wp[n];
            }
            if (dl_trial <= dl_sum) {
                new_mean = trial;
                dl_sum = dl_trial;
                break;
            }
            eta *= 0.5;
        }

        double rhs = dl_sum / mass[i];
        rhs = std::clamp(rhs, 1e-12, 1.0 - 1e-12);
        const ConcentrationSolution sol = solve_concentration(rhs, D);
        next.components[i].params.concentration = sol.k;
        next.components[i].k_saturated = sol.saturated;
    }

    for (std::size_t i = 0; i < R; ++i) {
        if (mass[i] >= 1e-10) continue;
        // Reseed to the point the live components describe worst.
        std::size_t worst = 0;
        double worst_density = std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < N; ++n) {
            const std::span<const double> x = data.point(n);
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < R; ++j) {
                if (j == i || mass[j] < 1e-10) continue;
                const DldParams& p = next.components[j].params;
                best = std::max(best, -p.concentration * directional_distance(x, p.mean)
                                          + std::log(dld_norm_coeff(D, p.concentration)));
            }
            if (best < worst_density) {
                worst_density = best;
                worst = n;
            }
        }
        const std::span<const double> x = data.point(worst);
        next.components[i].params.mean.assign(x.begin(), x.end());
        next.components[i].params.concentration = cfg.k_init;
        next.components[i].k_saturated = false;
        next.components[i].a = 1.0 / static_cast<double>(R);
        record.reseeded.push_back(i);
    }

    double movement = 0.0;
    for (std::size_t i = 0; i < R; ++i)
        movement = std::max(movement, detail::axial_angle(model.components[i].params.mean,
                                                          next.components[i].params.mean));
    record.max_mean_movement_rad = movement;
    record.avg_log_density = detail::average_log_density(data, next);
    next.training_log.push_back(std::move(record));
    return next;
}

// Full EM fit. Means start from directional K-means (or the caller's
// initial_means), priors at 1/R and concentrations at k_init; alternates
// E and M steps until every mean moves less than mean_tolerance or
// max_iterations is reached. Deterministic for a fixed seed.
inline WmdldModel fit(const SparseDirectionalSet& data, std::size_t R, const EmConfig& cfg,
                      MixtureMode mode, const std::vector<double>& initial_means = {}) {
    cfg.validate();
    const std::size_t N = data.count();
    if (N == 0) throw insufficient_data_error("fit: empty data");
    if (N < 10 * R) throw insufficient_data_error("fit: need at least 10 points per component");

    std::vector<double> means = initial_means;
    if (means.empty())
        means = directional_kmeans(data, R, cfg.seed);
    else if (means.size() != R * data.dimension)
        throw dimension_error("fit: initial_means must be R x dimension");

    WmdldModel model;
    model.dimension = data.dimension;
    model.mode = mode;
    model.components.resize(R);
    for (std::size_t i = 0; i < R; ++i) {
        DldComponent& c = model.components[i];
        c.a = 1.0 / static_cast<double>(R);
        c.params.dimension = data.dimension;
        c.params.concentration = cfg.k_init;
        c.params.mean.assign(means.begin() + static_cast<std::ptrdiff_t>(i * data.dimension),
                             means.begin() + static_cast<std::ptrdiff_t>((i + 1) * data.dimension));
    }

    for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
        const ResponsibilityTable resp = e_step(data, model);
        model = m_step(data, model, resp, cfg);
        if (model.training_log.back().max_mean_movement_rad < cfg.mean_tolerance) break;
    }
    return model;
}

}  // namespace dirsep
