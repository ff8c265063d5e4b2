#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "ifg/fields.hpp"
#include "oracles.hpp"

using namespace ifg;

namespace {

constexpr double pi = std::numbers::pi;
const Vec p_center{0.5, 0.5};

Vec random_point(Rng& rng, std::size_t d, double lo = 0.0, double hi = 1.0) {
    Vec x(d);
    for (auto& v : x) v = rng.uniform(lo, hi);
    return x;
}

std::vector<VectorField> builtin_suite() {
    return {radial_bump_clip(rotation_field(p_center, pi), p_center, 0.125, 0.25),
            radial_bump_clip(squeeze_field(0.5), p_center, 0.125, 0.25), sin_bump_field()};
}

} // namespace

TEST_CASE("analytic field examples") {
    VectorField rot = rotation_field(p_center, pi);
    Vec v = rot(Vec{0.75, 0.5});
    CHECK(v[0] == doctest::Approx(0.0));
    CHECK(v[1] == doctest::Approx(0.25 * pi));
    CHECK(rot(p_center) == Vec{0.0, 0.0});
    CHECK(rot.lipschitz_bound() == pi);

    VectorField sq = squeeze_field(0.5);
    CHECK(sq(Vec{0.75, 0.2}) == Vec{-0.25, 0.0});
    CHECK(sq(Vec{0.5, 0.9}) == Vec{0.0, 0.0});
    CHECK(sq.lipschitz_bound() == 1.0);
    CHECK_THROWS_AS(rot.eval(Vec{1.0}, std::span<double>(v.data(), 2)), DimensionError);
}

TEST_CASE("radial clip") {
    VectorField rot = rotation_field(p_center, pi);
    VectorField clipped = radial_bump_clip(rot, p_center, 0.125, 0.25);
    CHECK(clipped(Vec{1.0, 0.5}) == Vec{0.0, 0.0});
    CHECK(clipped(p_center) == Vec{0.0, 0.0});
    CHECK(clipped(Vec{0.6, 0.5}) == rot(Vec{0.6, 0.5}));
    CHECK(radial_profile(0.1875, 0.125, 0.25) == doctest::Approx(0.5));
    CHECK_THROWS_AS(radial_bump_clip(rot, p_center, 0.25, 0.125), ParameterError);
    CHECK_THROWS_AS(radial_bump_clip(rot, p_center, 0.25, 0.25), ParameterError);
}

TEST_CASE("box clip") {
    const double delta = 0.4;
    VectorField id = linear_field(2, Vec{1, 0, 0, 1}, Vec{0, 0});
    VectorField clipped_id = box_bump_clip(id, delta);
    CHECK(clipped_id(Vec{0.5, 0.5})[0] == doctest::Approx(0.5).epsilon(1e-15));
    // Linear field of unbounded support does not vanish at a zero coordinate.
    CHECK(!clipped_id.support());

    VectorField z = box_bump_clip(zero_field(2), delta);
    Rng rng(2);
    for (int i = 0; i < 100; ++i) CHECK(norm_inf(z(random_point(rng, 2, -2, 3))) == 0.0);

    VectorField s = sin_bump_field();
    VectorField cs = box_bump_clip(s, delta);
    REQUIRE(cs.support());
    CHECK(cs(Vec{-0.5, 0.5}) == Vec{0.0, 0.0});
    for (int i = 0; i < 10000; ++i) {
        const Vec x = random_point(rng, 2, delta / 2, 1 - delta / 2);
        const Vec a = cs(x), b = s(x);
        CHECK(std::abs(a[0] - b[0]) <= 1e-12);
    }
    CHECK_THROWS_AS(box_bump_clip(s, 2.5), ParameterError);
}

TEST_CASE("clipped fields vanish outside declared support") {
    Rng rng(17);
    std::vector<VectorField> fields = builtin_suite();
    fields.push_back(box_bump_clip(sin_bump_field(), 0.3));
    for (const auto& f : fields) {
        REQUIRE(f.support());
        int tested = 0;
        while (tested < 10000) {
            const Vec x = random_point(rng, 2, -1.0, 2.0);
            if (f.support()->contains(x)) continue;
            ++tested;
            const Vec v = f(x);
            CHECK(v[0] == 0.0);
            CHECK(v[1] == 0.0);
        }
    }
}

TEST_CASE("declared lipschitz bounds dominate sampled slopes") {
    Rng rng(23);
    for (const auto& f : builtin_suite()) {
        double worst = 0.0;
        for (int i = 0; i < 20000; ++i) {
            const Vec x = random_point(rng, 2, -0.2, 1.2);
            Vec y = x;
            for (auto& v : y) v += rng.uniform(-0.02, 0.02);
            const double dx = dist_inf(x, y);
            if (dx == 0.0) continue;
            worst = std::max(worst, dist_inf(f(x), f(y)) / dx);
        }
        CHECK(worst <= f.lipschitz_bound());
    }
}

TEST_CASE("grid interpolant basics") {
    SUBCASE("1-d matches the linear interpolation oracle") {
        Vec v{0.0, 0.7, -0.2, 0.4, 0.0};
        GridInterpolant g({4}, v);
        Rng rng(4);
        for (int i = 0; i < 1000; ++i) {
            const double x = rng.uniform(-0.5, 1.5);
            CHECK(g(Vec{x})[0] == doctest::Approx(oracle::interp1(v, x)).epsilon(1e-14));
        }
        CHECK(g.lipschitz_linf() == doctest::Approx(4.0 * 0.9));
    }
    SUBCASE("reproduces vertex values") {
        Rng rng(8);
        Vec vals(3 * 5 * 2);
        for (auto& v : vals) v = rng.uniform(-1, 1);
        GridInterpolant g({2, 4}, vals);
        for (std::size_t k = 0; k < g.vertex_count(); ++k) {
            const Vec y = g(g.vertex_point(k));
            CHECK(y[0] == vals[2 * k]);
            CHECK(y[1] == vals[2 * k + 1]);
        }
    }
    SUBCASE("invalid construction") {
        CHECK_THROWS_AS(GridInterpolant({0}, Vec{0.0}), ParameterError);
        CHECK_THROWS_AS(GridInterpolant({2}, Vec{0.0}), DimensionError);
    }
}

TEST_CASE("affine reproduction") {
    for (std::size_t d : {1u, 2u, 3u}) {
        Vec a(d * d), b(d);
        Rng rng(d);
        for (auto& v : a) v = rng.uniform(-1, 1);
        for (auto& v : b) v = rng.uniform(-1, 1);
        VectorField lin = linear_field(d, a, b);
        auto approx = grid_relu_approximate_on_cube(lin, std::vector<std::size_t>(d, 3), Modulus::lipschitz(d, 1.0));
        for (double e : approx.measured_error) CHECK(e <= 1e-12);
        for (int i = 0; i < 500; ++i) {
            const Vec x = random_point(rng, d);
            const Vec u = lin(x), v = approx.field(x), w = approx.mlp.eval(x);
            for (std::size_t j = 0; j < d; ++j) {
                CHECK(std::abs(u[j] - v[j]) <= 1e-12);
                CHECK(std::abs(u[j] - w[j]) <= 1e-12);
            }
        }
    }
    VectorField c = constant_field(Vec{0.3, -0.1});
    auto approx = grid_relu_approximate_on_cube(c, {2, 2}, Modulus::lipschitz(2, 0.0));
    CHECK(approx.measured_error == Vec{0.0, 0.0});
}

TEST_CASE("MLP realization agrees with the direct interpolant") {
    for (std::size_t d : {1u, 2u, 3u}) {
        Rng rng(100 + d);
        const std::vector<std::size_t> counts(d, d == 3 ? 3 : 5);
        std::size_t vertices = 1;
        for (auto c : counts) vertices *= c + 1;
        Vec vals(vertices * d);
        for (auto& v : vals) v = rng.uniform(-1, 1);
        GridInterpolant g(counts, vals);
        MLP m = g.to_mlp();
        std::size_t log2d = 0;
        while ((1u << log2d) < d) ++log2d;
        CHECK(m.depth() == log2d + 3);
        CHECK(m.width() == 2 * d * vertices);
        for (int i = 0; i < 10000; ++i) {
            const Vec x = random_point(rng, d, -0.3, 1.3);
            const Vec u = g(x), w = m.eval(x);
            for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(u[j] - w[j]) <= 1e-9);
        }
    }
}

TEST_CASE("grid lipschitz constant is attained and dominates") {
    Rng rng(31);
    Vec vals(5 * 5 * 2);
    for (auto& v : vals) v = rng.uniform(-1, 1);
    GridInterpolant g({4, 4}, vals);
    const double lip = g.lipschitz_linf();
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const Vec x = random_point(rng, 2, -0.3, 1.3);
        Vec y = x;
        for (auto& v : y) v += rng.uniform(-1e-3, 1e-3);
        worst = std::max(worst, dist_inf(g(x), g(y)) / dist_inf(x, y));
    }
    CHECK(worst <= lip * (1 + 1e-12));
    CHECK(worst >= 0.8 * lip);
}

TEST_CASE("grid approximation error within modulus for the builtin suite") {
    for (const auto& f : builtin_suite()) {
        for (std::size_t n : {4u, 8u, 16u}) {
            auto approx = grid_relu_approximate(f, n, Modulus::lipschitz(2, f.lipschitz_bound()));
            for (std::size_t j = 0; j < 2; ++j) CHECK(approx.measured_error[j] <= approx.omega[j]);
            CHECK(approx.size.depth == 4);
            CHECK(approx.size.target_depth == 7);
        }
    }
    CHECK_THROWS_AS(grid_relu_approximate(rotation_field(p_center, 1.0), 4, Modulus::lipschitz(2, 1.0)),
                    ParameterError);
    CHECK_THROWS_AS(grid_relu_approximate(sin_bump_field(), 0, Modulus::lipschitz(2, 1.0)), ParameterError);
}

TEST_CASE("modulus") {
    CHECK(Modulus::lipschitz(2, 2.0).eval(0.25) == Vec{0.5, 0.5});
    CHECK(Modulus::lipschitz(2, 2.0).eval(0.0) == Vec{0.0, 0.0});
    CHECK(modulus_bound_eval(Modulus::smooth_rate(1, 2, Vec{1.0}), 4.0)[0] == doctest::Approx(680.0));
    CHECK(Modulus::holder(Vec{2.0}, 0.5).eval(0.25)[0] == doctest::Approx(1.0));
    CHECK(Modulus::holder(Vec{2.0}, 0.5).eval(0.0)[0] == 0.0);
    CHECK_THROWS_AS(Modulus::lipschitz(1, 1.0).eval(-0.1), ParameterError);
    CHECK_THROWS_AS(Modulus::smooth_rate(1, 2, Vec{1.0}).eval(0.5), ParameterError);
    // nondecreasing and subadditive for the Lipschitz kind
    Modulus m = Modulus::lipschitz(1, 3.0);
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const double a = rng.uniform(), b = rng.uniform();
        CHECK(m.eval(a + b)[0] <= m.eval(a)[0] + m.eval(b)[0] + 1e-15);
        CHECK(m.eval(std::max(a, b))[0] >= m.eval(std::min(a, b))[0]);
    }
    Modulus h = Modulus::from_json(Modulus::holder(Vec{1.0, 2.0}, 0.7).to_json());
    CHECK(h.kind() == Modulus::Kind::holder);
    CHECK(h.eval(0.3) == Modulus::holder(Vec{1.0, 2.0}, 0.7).eval(0.3));
}

TEST_CASE("grid binary round trip") {
    Rng rng(12);
    Vec vals(5 * 3 * 2);
    for (auto& v : vals) v = rng.uniform(-1, 1);
    GridInterpolant g({4, 2}, vals);
    const auto dir = std::filesystem::temp_directory_path() / "ifg_grid_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "g.bin";
    g.write_binary(path);
    CHECK(std::filesystem::file_size(path) == 16 + 8 * vals.size());
    GridInterpolant r = GridInterpolant::read_binary(path);
    CHECK(r.counts() == g.counts());
    CHECK(r.values() == g.values());
    std::filesystem::remove_all(dir);
}
