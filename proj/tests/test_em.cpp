#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "dirsep/em.hpp"
#include "dirsep/serialize.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dirsep;

namespace {

std::vector<double> unit2(double angle_deg) {
    const double rad = angle_deg * std::numbers::pi / 180.0;
    return {std::cos(rad), std::sin(rad)};
}

WmdldModel two_component_model(double angle1_deg, double angle2_deg, double k, MixtureMode mode) {
    WmdldModel model;
    model.dimension = 2;
    model.mode = mode;
    model.components.resize(2);
    model.components[0] = {0.5, {unit2(angle1_deg), k, 2}, false};
    model.components[1] = {0.5, {unit2(angle2_deg), k, 2}, false};
    return model;
}

// Greedy match of fitted means to true axial angles; returns the worst
// angular error or infinity if two fits collapse onto one truth.
double worst_match_error_deg(const WmdldModel& model, const std::vector<double>& true_angles) {
    std::set<std::size_t> used;
    double worst = 0.0;
    for (double angle : true_angles) {
        const std::vector<double> target = unit2(angle);
        double best = 1e9;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < model.components.size(); ++i) {
            if (used.count(i) != 0) continue;
            const double err = fixtures::axial_angle_deg(model.components[i].params.mean, target);
            if (err < best) {
                best = err;
                best_i = i;
            }
        }
        used.insert(best_i);
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace

TEST_CASE("kmeans recovers two tight bundles", "[em]") {
    const SparseDirectionalSet data = fixtures::directional_bundles({0.0, 60.0}, 100.0, 1500, 21);
    const std::vector<double> centers = directional_kmeans(data, 2, 5);
    const double e1 = std::min(fixtures::axial_angle_deg(std::span(centers).subspan(0, 2), unit2(0.0)),
                               fixtures::axial_angle_deg(std::span(centers).subspan(0, 2), unit2(60.0)));
    const double e2 = std::min(fixtures::axial_angle_deg(std::span(centers).subspan(2, 2), unit2(0.0)),
                               fixtures::axial_angle_deg(std::span(centers).subspan(2, 2), unit2(60.0)));
    CHECK(e1 < 1.0);
    CHECK(e2 < 1.0);
    // The two centers must sit on distinct bundles.
    CHECK(fixtures::axial_angle_deg(std::span(centers).subspan(0, 2),
                                    std::span(centers).subspan(2, 2)) > 30.0);
}

TEST_CASE("kmeans with one center returns the dominant scatter eigenvector", "[em]") {
    const SparseDirectionalSet data = fixtures::directional_bundles({25.0}, 40.0, 800, 3);
    const std::vector<double> centers = directional_kmeans(data, 1, 9);

    Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
    for (std::size_t n = 0; n < data.count(); ++n) {
        const auto x = data.point(n);
        const Eigen::Vector2d v(x[0], x[1]);
        scatter += v * v.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
    const Eigen::Vector2d top = eig.eigenvectors().col(1);
    CHECK(fixtures::axial_angle_deg(centers, std::vector<double>{top(0), top(1)}) < 1e-9);
}

TEST_CASE("kmeans degenerate and error cases", "[em]") {
    SparseDirectionalSet data;
    data.dimension = 2;
    for (double angle : {0.0, 30.0, 60.0, -45.0, 85.0}) {
        const std::vector<double> v = unit2(angle);
        data.points.insert(data.points.end(), v.begin(), v.end());
        data.origins.push_back({0, 0, PointPart::real_part});
    }
    const std::vector<double> centers = directional_kmeans(data, 5, 123);
    // Every point coincides axially with exactly one center (up to the
    // eigensolver's roundoff in the single-point cluster update).
    for (std::size_t n = 0; n < 5; ++n) {
        std::size_t hits = 0;
        for (std::size_t r = 0; r < 5; ++r)
            if (fixtures::axial_angle_deg(data.point(n), std::span(centers).subspan(2 * r, 2)) < 1e-4)
                ++hits;
        REQUIRE(hits == 1);
    }
    CHECK_THROWS_AS(directional_kmeans(data, 6, 1), insufficient_data_error);
}

TEST_CASE("e-step responsibilities: single component and orthogonal pair", "[em]") {
    const SparseDirectionalSet data = fixtures::directional_bundles({10.0}, 15.0, 50, 2);

    WmdldModel single;
    single.dimension = 2;
    single.mode = MixtureMode::unweighted;
    single.components = {{1.0, {unit2(10.0), 15.0, 2}, false}};
    const ResponsibilityTable resp1 = e_step(data, single);
    for (std::size_t n = 0; n < data.count(); ++n) REQUIRE(resp1.at(n, 0) == 1.0);

    // Point exactly on m1 with m2 orthogonal: responsibility ratio e^k.
    SparseDirectionalSet one;
    one.dimension = 2;
    one.points = unit2(0.0);
    one.origins.push_back({0, 0, PointPart::real_part});
    const WmdldModel pair = two_component_model(0.0, 90.0, 15.0, MixtureMode::unweighted);
    const ResponsibilityTable resp2 = e_step(one, pair);
    CHECK(resp2.at(0, 0) / resp2.at(0, 1) == Catch::Approx(std::exp(15.0)).epsilon(1e-9));

    // Equidistant point between symmetric components: exactly half each.
    SparseDirectionalSet mid;
    mid.dimension = 2;
    mid.points = unit2(45.0);
    mid.origins.push_back({0, 0, PointPart::real_part});
    const ResponsibilityTable resp3 = e_step(mid, pair);
    CHECK(resp3.at(0, 0) == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(resp3.at(0, 1) == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("responsibilities form a stochastic matrix", "[em][property]") {
    const SparseDirectionalSet data =
        fixtures::directional_bundles({-50.0, 10.0, 70.0}, 8.0, 400, 77, 0.05);
    WmdldModel model;
    model.dimension = 2;
    model.mode = MixtureMode::weighted;
    model.components = {{0.2, {unit2(-48.0), 20.0, 2}, false},
                        {0.5, {unit2(12.0), 5.0, 2}, false},
                        {0.1, {unit2(65.0), 400.0, 2}, false}};
    const ResponsibilityTable resp = e_step(data, model);
    for (std::size_t n = 0; n < data.count(); ++n) {
        double row = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            REQUIRE(resp.at(n, i) >= 0.0);
            row += resp.at(n, i);
        }
        REQUIRE(std::fabs(row - 1.0) <= 1e-9);
    }
}

TEST_CASE("one m-step moves the mean toward the data and estimates k", "[em]") {
    const double true_k = 15.0;
    SparseDirectionalSet data;
    data.dimension = 2;
    {
        DldParams p{unit2(30.0), true_k, 2};
        data.points = sample_dld(p, 50000, 8);
        data.origins.assign(50000, {0, 0, PointPart::real_part});
    }

    SECTION("a step from an offset start shrinks the angular error") {
        WmdldModel model;
        model.dimension = 2;
        model.mode = MixtureMode::unweighted;
        model.components = {{1.0, {unit2(33.0), 15.0, 2}, false}};  // start 3 degrees off
        const ResponsibilityTable resp = e_step(data, model);
        const WmdldModel next = m_step(data, model, resp, {});
        const double before = fixtures::axial_angle_deg(model.components[0].params.mean, unit2(30.0));
        const double after = fixtures::axial_angle_deg(next.components[0].params.mean, unit2(30.0));
        CHECK(after < before);
        CHECK(next.components[0].a == Catch::Approx(1.0));
        REQUIRE(next.training_log.size() == 1);
    }

    SECTION("from the true mean, k lands within 10% at this sample size") {
        WmdldModel model;
        model.dimension = 2;
        model.mode = MixtureMode::unweighted;
        model.components = {{1.0, {unit2(30.0), 15.0, 2}, false}};
        const ResponsibilityTable resp = e_step(data, model);
        const WmdldModel next = m_step(data, model, resp, {});
        CHECK(next.components[0].params.concentration == Catch::Approx(true_k).epsilon(0.10));
        CHECK(fixtures::axial_angle_deg(next.components[0].params.mean, unit2(30.0)) < 0.5);
    }
}

TEST_CASE("means stay unit norm across iterations", "[em][property]") {
    const SparseDirectionalSet data = fixtures::directional_bundles({-30.0, 40.0}, 12.0, 700, 5);
    EmConfig cfg;
    cfg.max_iterations = 25;
    const WmdldModel model = fit(data, 2, cfg, MixtureMode::weighted);
    for (const auto& c : model.components) {
        double nrm2 = 0.0;
        for (double v : c.params.mean) nrm2 += v * v;
        REQUIRE(std::fabs(std::sqrt(nrm2) - 1.0) <= 1e-12);
    }
}

TEST_CASE("mass concentrated orthogonally to the mean clamps k to zero", "[em]") {
    SparseDirectionalSet data;
    data.dimension = 2;
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> v = unit2(90.0);  // orthogonal to m = (1, 0)
        data.points.insert(data.points.end(), v.begin(), v.end());
        data.origins.push_back({0, 0, PointPart::real_part});
    }
    WmdldModel model;
    model.dimension = 2;
    model.mode = MixtureMode::unweighted;
    model.components = {{1.0, {unit2(0.0), 15.0, 2}, false}};
    const ResponsibilityTable resp = e_step(data, model);
    const WmdldModel next = m_step(data, model, resp, {});
    // rhs = 1 clamps inside (0, 1); the solver then returns k = 0.
    CHECK(next.components[0].params.concentration == 0.0);
}

TEST_CASE("unweighted priors sum to one after every update", "[em]") {
    const SparseDirectionalSet data =
        fixtures::directional_bundles({-60.0, -20.0, 20.0, 70.0}, 30.0, 500, 6);
    EmConfig cfg;
    cfg.max_iterations = 10;
    const WmdldModel model = fit(data, 4, cfg, MixtureMode::unweighted);
    double total = 0.0;
    for (const auto& c : model.components) total += c.a;
    CHECK(std::fabs(total - 1.0) <= 1e-9);
}

TEST_CASE("gradient matches tangent-projected central differences", "[em][property]") {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t D = trial % 2 == 0 ? 2 : 3;
        const std::size_t N = 100;

        SparseDirectionalSet data;
        data.dimension = D;
        std::vector<double> mean(D);
        for (std::size_t d = 0; d < D; ++d) mean[d] = 2.0 * fixtures::unit_open(rng) - 1.0;
        double mn = std::sqrt(std::inner_product(mean.begin(), mean.end(), mean.begin(), 0.0));
        for (double& v : mean) v /= mn;

        std::vector<double> mass(N);
        std::size_t added = 0;
        while (added < N) {
            std::vector<double> x(D);
            for (std::size_t d = 0; d < D; ++d) x[d] = 2.0 * fixtures::unit_open(rng) - 1.0;
            const double nrm = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
            if (nrm < 1e-3) continue;
            for (double& v : x) v /= nrm;
            double dot = 0.0;
            for (std::size_t d = 0; d < D; ++d) dot += x[d] * mean[d];
            if (std::fabs(dot) > 0.99) continue;  // keep away from the gradient singularity
            data.points.insert(data.points.end(), x.begin(), x.end());
            data.origins.push_back({0, 0, PointPart::real_part});
            mass[added] = fixtures::unit_open(rng);
            ++added;
        }
        const double k = 1.0 + 29.0 * fixtures::unit_open(rng);

        const std::vector<double> grad = mean_gradient(data, mean, k, mass);

        // Central differences of sum(mass * (-k * D_l)) in ambient coordinates.
        const auto objective = [&](const std::vector<double>& m) {
            double J = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                double dot = 0.0;
                for (std::size_t d = 0; d < D; ++d) dot += data.point(n)[d] * m[d];
                const double t2 = std::min(dot * dot, 1.0);
                J += mass[n] * (-k * std::sqrt(1.0 - t2));
            }
            return J;
        };
        const double eps = 1e-6;
        std::vector<double> fd(D);
        for (std::size_t d = 0; d < D; ++d) {
            std::vector<double> plus = mean, minus = mean;
            plus[d] += eps;
            minus[d] -= eps;
            fd[d] = (objective(plus) - objective(minus)) / (2.0 * eps);
        }

        // Project both onto the tangent space at the mean before comparing.
        const auto project = [&](std::vector<double> v) {
            double dot = 0.0;
            for (std::size_t d = 0; d < D; ++d) dot += v[d] * mean[d];
            for (std::size_t d = 0; d < D; ++d) v[d] -= dot * mean[d];
            return v;
        };
        const std::vector<double> pg = project(grad), pf = project(fd);
        double diff2 = 0.0, ref2 = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            diff2 += (pg[d] - pf[d]) * (pg[d] - pf[d]);
            ref2 += pf[d] * pf[d];
        }
        REQUIRE(std::sqrt(diff2 / ref2) <= 1e-4);
    }
}

TEST_CASE("fit recovers the four-direction fixture", "[em]") {
    const std::vector<double> angles{-60.0, -20.0, 20.0, 70.0};
    const SparseDirectionalSet data = fixtures::directional_bundles(angles, 30.0, 5000, 31);
    for (MixtureMode mode : {MixtureMode::weighted, MixtureMode::unweighted}) {
        EmConfig cfg;
        cfg.seed = 7;
        const WmdldModel model = fit(data, 4, cfg, mode);
        CHECK(worst_match_error_deg(model, angles) <= 3.0);
    }
}

TEST_CASE("single-cluster fit converges quickly", "[em]") {
    const SparseDirectionalSet data = fixtures::directional_bundles({15.0}, 25.0, 4000, 12);
    EmConfig cfg;
    cfg.seed = 3;
    const WmdldModel model = fit(data, 1, cfg, MixtureMode::unweighted);
    REQUIRE(!model.training_log.empty());
    CHECK(model.training_log.size() <= 50);
    CHECK(model.training_log.back().max_mean_movement_rad < 1e-4);
    CHECK(fixtures::axial_angle_deg(model.components[0].params.mean, unit2(15.0)) < 1.0);
}

TEST_CASE("importance weights reduce the pull of outliers", "[em]") {
    const std::vector<double> angles{-60.0, -20.0, 20.0, 70.0};
    const SparseDirectionalSet data = fixtures::directional_bundles(angles, 30.0, 5000, 55, 0.10);
    EmConfig cfg;
    cfg.seed = 19;
    const WmdldModel weighted = fit(data, 4, cfg, MixtureMode::weighted);
    const WmdldModel unweighted = fit(data, 4, cfg, MixtureMode::unweighted);
    CHECK(worst_match_error_deg(weighted, angles) <= worst_match_error_deg(unweighted, angles));
}

TEST_CASE("fit is deterministic for a fixed seed", "[em]") {
    const SparseDirectionalSet data = fixtures::directional_bundles({-40.0, 35.0}, 20.0, 1000, 61, 0.02);
    EmConfig cfg;
    cfg.seed = 99;
    cfg.max_iterations = 40;
    const WmdldModel a = fit(data, 2, cfg, MixtureMode::weighted);
    const WmdldModel b = fit(data, 2, cfg, MixtureMode::weighted);
    CHECK(model_to_json(a).dump() == model_to_json(b).dump());
}

TEST_CASE("permuting initial centers permutes the fitted components", "[em]") {
    const SparseDirectionalSet data = fixtures::directional_bundles({-30.0, 10.0, 55.0}, 25.0, 800, 14);
    EmConfig cfg;
    cfg.max_iterations = 30;
    std::vector<double> init;
    for (double angle : {-29.0, 11.0, 54.0}) {
        const std::vector<double> v = unit2(angle);
        init.insert(init.end(), v.begin(), v.end());
    }
    std::vector<double> permuted;  // order 2, 0, 1
    for (std::size_t src : {2u, 0u, 1u})
        permuted.insert(permuted.end(), init.begin() + static_cast<std::ptrdiff_t>(2 * src),
                        init.begin() + static_cast<std::ptrdiff_t>(2 * src + 2));

    const WmdldModel base = fit(data, 3, cfg, MixtureMode::weighted, init);
    const WmdldModel perm = fit(data, 3, cfg, MixtureMode::weighted, permuted);
    // Summation order inside the shared E-step denominators shifts with the
    // component order, so the match is to tolerance, not bitwise; the
    // permutation itself must be unambiguous (components sit 40+ degrees
    // apart).
    const std::vector<std::size_t> order{2, 0, 1};
    for (std::size_t i = 0; i < 3; ++i) {
        const DldComponent& p = perm.components[i];
        const DldComponent& b = base.components[order[i]];
        CHECK(fixtures::axial_angle_deg(p.params.mean, b.params.mean) < 0.5);
        CHECK(p.params.concentration == Catch::Approx(b.params.concentration).epsilon(0.01));
        CHECK(p.a == Catch::Approx(b.a).margin(1e-4));
    }
}

TEST_CASE("fit rejects unusable inputs", "[em]") {
    SparseDirectionalSet empty;
    empty.dimension = 2;
    CHECK_THROWS_AS(fit(empty, 1, {}, MixtureMode::weighted), insufficient_data_error);

    const SparseDirectionalSet tiny = fixtures::directional_bundles({0.0}, 10.0, 15, 4);
    CHECK_THROWS_AS(fit(tiny, 2, {}, MixtureMode::weighted), insufficient_data_error);

    EmConfig bad;
    bad.max_iterations = 0;
    CHECK_THROWS_AS(bad.validate(), config_error);
    bad = {};
    bad.mean_tolerance = 0.0;
    CHECK_THROWS_AS(bad.validate(), config_error);
}

TEST_CASE("collapsed components are reseeded and logged", "[em]") {
    // Two real bundles but three components, one started orthogonally with a
    // huge concentration: its responsibility mass vanishes and it must be
    // reseeded rather than left dead.
    const SparseDirectionalSet data = fixtures::directional_bundles({-45.0, 45.0}, 60.0, 600, 8);
    WmdldModel model;
    model.dimension = 2;
    model.mode = MixtureMode::unweighted;
    model.components = {{0.499999999995, {unit2(-45.0), 60.0, 2}, false},
                        {0.499999999995, {unit2(45.0), 60.0, 2}, false},
                        {1e-11, {unit2(0.0), 1000.0, 2}, false}};
    const ResponsibilityTable resp = e_step(data, model);
    const WmdldModel next = m_step(data, model, resp, {});
    REQUIRE(next.training_log.size() == 1);
    CHECK(next.training_log.back().reseeded == std::vector<std::size_t>{2});
    CHECK(next.components[2].params.concentration == 15.0);  // back to k_init
}
