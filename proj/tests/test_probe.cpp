#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ifg/probe.hpp"

using namespace ifg;

namespace {

const PointMap identity = [](std::span<const double> x) { return Vec(x.begin(), x.end()); };

PointMap as_map(const IncrementalGenerator& g) {
    return [g](std::span<const double> x) { return generator_apply(g, x); };
}

const OrbitRecord* closest_refined_on_line(const std::vector<OrbitRecord>& recs) {
    const OrbitRecord* best = nullptr;
    for (const auto& r : recs) {
        if (!r.refined || r.kind != OrbitRecord::Kind::periodic || r.period != 2) continue;
        if (!best || std::abs(r.start[0] - 0.5) < std::abs(best->start[0] - 0.5)) best = &r;
    }
    return best;
}

} // namespace

TEST_CASE("counterexample generator") {
    const IncrementalGenerator g = build_counterexample();
    CHECK(g.size() == 2);
    CHECK(generator_apply(g, Vec{0.9, 0.9}) == Vec{0.9, 0.9});
    CHECK(generator_apply(g, Vec{0.5, 0.5}) == Vec{0.5, 0.5});
    const Vec q{0.5, 0.5 + 1.0 / 16.0};
    const Vec once = generator_apply(g, q);
    CHECK(std::abs(once[1] - (0.5 - 1.0 / 16.0)) <= 1e-8);
    CHECK(dist_inf(generator_apply(g, once), q) <= 1e-6);
    // identity outside B(p, 1/4)
    Rng rng(1);
    for (int i = 0; i < 500; ++i) {
        const Vec x{rng.uniform(), rng.uniform()};
        if (dist_l2(x, Vec{0.5, 0.5}) < 0.25) continue;
        CHECK(generator_apply(g, x) == x);
    }
}

TEST_CASE("classification is recomputable from iterates") {
    PeriodicOptions o;
    const OrbitRecord fixed = classify_orbit({0.1, 0.1}, {{0.1, 0.1}, {0.1, 0.1}}, o);
    CHECK(fixed.kind == OrbitRecord::Kind::fixed);
    const OrbitRecord two = classify_orbit({0.5, 0.6}, {{0.5, 0.4}, {0.5, 0.6}}, o);
    CHECK(two.kind == OrbitRecord::Kind::periodic);
    CHECK(two.period == 2);
    const OrbitRecord near = classify_orbit({0.5, 0.6}, {{0.5, 0.605}, {0.5, 0.6}}, o);
    CHECK(near.kind != OrbitRecord::Kind::periodic);
    std::vector<Vec> shrink;
    for (int k = 1; k <= 8; ++k) shrink.push_back({std::pow(0.5, k), 0.0});
    const OrbitRecord c = classify_orbit({1.0, 0.0}, shrink, o);
    CHECK(c.kind == OrbitRecord::Kind::contracting);
    CHECK(c.rate == doctest::Approx(0.5));
    const OrbitRecord u = classify_orbit({0.0, 0.0}, {{1.0, 0.0}, {3.0, 0.0}, {7.0, 0.0}, {15.0, 0.0}}, o);
    CHECK(u.kind == OrbitRecord::Kind::unclassified);
}

TEST_CASE("detect_periodic") {
    SUBCASE("identity: every seed fixed") {
        PeriodicOptions o;
        o.grid_n = 5;
        const auto recs = detect_periodic(identity, Box::unit(2), o);
        CHECK(recs.size() == 25);
        for (const auto& r : recs) CHECK(r.kind == OrbitRecord::Kind::fixed);
    }
    SUBCASE("counterexample: period-2 point on the line") {
        const IncrementalGenerator g = build_counterexample();
        const auto recs = detect_periodic(as_map(g), Box::unit(2));
        const OrbitRecord* q = closest_refined_on_line(recs);
        REQUIRE(q != nullptr);
        CHECK(std::abs(q->start[0] - 0.5) <= 1e-4);
        CHECK(dist_inf(q->iterates[1], q->start) <= 1e-6);
        CHECK(dist_inf(q->iterates[0], q->start) >= 1e-2);
        // all refined period-2 points lie on the line
        for (const auto& r : recs) {
            if (r.refined) CHECK(std::abs(r.start[0] - 0.5) <= 1e-4);
        }
        // determinism
        const auto again = detect_periodic(as_map(g), Box::unit(2));
        REQUIRE(again.size() == recs.size());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            CHECK(again[i].start == recs[i].start);
            CHECK(again[i].kind == recs[i].kind);
        }
    }
    SUBCASE("pure clipped rotation: a disc of period-2 points") {
        const IncrementalGenerator rot({FlowMap{clipped_rotation_field()}});
        PeriodicOptions o;
        o.grid_n = 21;
        const auto recs = detect_periodic(as_map(rot), Box::unit(2), o);
        std::size_t periodic = 0, off_line = 0;
        for (const auto& r : recs) {
            if (r.refined || r.kind != OrbitRecord::Kind::periodic) continue;
            ++periodic;
            CHECK(dist_l2(r.start, Vec{0.5, 0.5}) <= 0.125 + 1e-9);
            if (std::abs(r.start[0] - 0.5) > 1e-3) ++off_line;
        }
        CHECK(periodic >= 8);
        CHECK(off_line >= 4);
    }
    CHECK_THROWS_AS(detect_periodic(identity, Box::unit(2), {0}), ParameterError);
}

TEST_CASE("contraction audit") {
    const IncrementalGenerator g = build_counterexample();
    const PointMap F = as_map(g);
    const OrbitRecord q = classify_orbit({0.5, 0.5625}, {generator_apply(g, Vec{0.5, 0.5625}),
                                                          generator_apply(g, generator_apply(g, Vec{0.5, 0.5625}))},
                                         {});
    REQUIRE(q.kind == OrbitRecord::Kind::periodic);
    for (double radius : {1e-3, 1e-2, 2e-2}) {
        const ContractionReport rep = contraction_audit(F, q, radius, 16, 2);
        CHECK(rep.max_ratio < 1.0);
        CHECK(rep.max_ratio == doctest::Approx(std::exp(-2.0)).epsilon(1e-4));
    }
    const ContractionReport id = contraction_audit(identity, classify_orbit({0.5, 0.5}, {{0.5, 0.5}}, {}), 0.01, 8, 2);
    CHECK(id.max_ratio == doctest::Approx(1.0).epsilon(1e-12));
    const IncrementalGenerator sq({FlowMap{clipped_squeeze_field()}});
    const OrbitRecord line = classify_orbit({0.5, 0.55}, {generator_apply(sq, Vec{0.5, 0.55})}, {});
    REQUIRE(line.kind == OrbitRecord::Kind::fixed);
    const ContractionReport s = contraction_audit(as_map(sq), line, 0.01, 8, 1);
    CHECK(s.max_ratio == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
    CHECK(s.min_ratio == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
    CHECK_THROWS_AS(contraction_audit(F, classify_orbit({0.0, 0.0}, {{1.0, 0.0}}, {}), 0.01, 8, 1), ParameterError);
}

TEST_CASE("fit_single_flow") {
    SUBCASE("identity is found at initialization") {
        const FitResult r = fit_single_flow(identity, {4, 9, 32, 100, 0.25, 3});
        CHECK(r.residual_sup <= 1e-9);
        CHECK(r.evaluations == 1);
        CHECK(norm_inf(r.parameters) == 0.0);
    }
    SUBCASE("residual is recomputable and the run deterministic") {
        const VectorField target_field = random_grid_field(4, 0.3, 11);
        const FlowMap tf{target_field, Direction::forward, {Method::rk4, 32}};
        const PointMap target = [&](std::span<const double> x) { return flow_apply(tf, x); };
        const FitOptions o{4, 9, 32, 2000, 0.25, 5};
        const FitResult a = fit_single_flow(target, o);
        const FitResult b = fit_single_flow(target, o);
        CHECK(a.residual_sup == b.residual_sup);
        CHECK(a.parameters == b.parameters);
        CHECK(a.evaluations <= 2000);
        const auto pts = grid_points(Box::unit(2), 9);
        CHECK(fit_residual(a.candidate, pts, apply_all(target, pts), 32) == a.residual_sup);
        // candidate has compact support in the unit square
        CHECK(a.candidate(Vec{1.2, 0.5}) == Vec{0.0, 0.0});
    }
    CHECK_THROWS_AS(fit_single_flow(identity, {4, 9, 32, 0, 0.25, 0}), ParameterError);
}
