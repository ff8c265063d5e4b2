#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ifg/mlp.hpp"
#include "oracles.hpp"

using namespace ifg;

namespace {

MLP random_mlp(Rng& rng, std::vector<std::size_t> dims) {
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Vec w(dims[l + 1] * dims[l]), b(dims[l + 1]);
        for (auto& v : w) v = rng.uniform(-1.0, 1.0);
        for (auto& v : b) v = rng.uniform(-0.5, 0.5);
        layers.push_back(Layer::from_dense(dims[l + 1], dims[l], w, b));
    }
    return MLP(std::move(layers));
}

Vec random_point(Rng& rng, std::size_t d, double lo = -1.0, double hi = 1.0) {
    Vec x(d);
    for (auto& v : x) v = rng.uniform(lo, hi);
    return x;
}

MLP shifted_relu() {
    // relu(x - 0.5)
    std::vector<Layer> layers;
    layers.push_back(Layer::from_dense(1, 1, Vec{1.0}, Vec{-0.5}));
    layers.push_back(Layer::from_dense(1, 1, Vec{1.0}, Vec{0.0}));
    return MLP(std::move(layers));
}

} // namespace

TEST_CASE("identity network") {
    MLP id = MLP::identity(2);
    const Vec y = id.eval(Vec{0.3, 0.7});
    CHECK(y[0] == 0.3);
    CHECK(y[1] == 0.7);
    CHECK(id.depth() == 1);
    CHECK(lipschitz_upper_bound(id) == 1.0);
    CHECK(lipschitz_upper_bound(id, Norm::l2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("shifted relu values") {
    MLP m = shifted_relu();
    CHECK(m.eval(Vec{0.25})[0] == 0.0);
    CHECK(m.eval(Vec{0.75})[0] == 0.25);
}

TEST_CASE("dimension mismatch is an error") {
    MLP id = MLP::identity(2);
    CHECK_THROWS_AS(id.eval(Vec{1.0}), DimensionError);
    CHECK_THROWS_AS(compose(MLP::identity(3), id), DimensionError);
    std::vector<Layer> bad;
    bad.push_back(Layer::from_dense(2, 1, Vec{1, 1}, Vec{0, 0}));
    bad.push_back(Layer::from_dense(1, 3, Vec{1, 1, 1}, Vec{0}));
    CHECK_THROWS_AS(MLP(std::move(bad)), DimensionError);
}

TEST_CASE("single layer scaling norm") {
    MLP m = MLP::affine(2, 2, Vec{2, 0, 0, 2}, Vec{0, 0});
    CHECK(lipschitz_upper_bound(m) == 2.0);
    CHECK(lipschitz_upper_bound(m, Norm::l2) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("bump examples") {
    MLP b = build_bump({0.4, 1});
    CHECK(b.depth() == 3);
    CHECK(b.eval(Vec{0.5})[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b.eval(Vec{0.05})[0] == 0.0);
    CHECK(b.eval(Vec{0.15})[0] == doctest::Approx(0.10).epsilon(1e-14));
    CHECK(b.eval(Vec{2.0})[0] == 0.0);
    CHECK_THROWS_AS(build_bump({0.0, 1}), ParameterError);
    CHECK_THROWS_AS(build_bump({2.0, 1}), ParameterError);
    CHECK_THROWS_AS(build_bump({0.5, 0}), ParameterError);
}

TEST_CASE("bump matches closed form on 1e5 points for several deltas") {
    for (double delta : {0.1, 0.4, 0.75, 1.0}) {
        MLP b = build_bump({delta, 1});
        double worst = 0.0;
        for (int i = 0; i < 100000; ++i) {
            const double x = -1.0 + 3.0 * i / 99999.0;
            worst = std::max(worst, std::abs(b.eval(Vec{x})[0] - oracle::bump(x, delta)));
        }
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("bump lipschitz constant agrees with slope scan") {
    for (double delta : {0.1, 0.4, 1.0, 1.5}) {
        MLP b = build_bump({delta, 1});
        const double scanned =
            oracle::max_slope_scan([&](double x) { return b.eval(Vec{x})[0]; }, -0.5, 1.5, 200000);
        // Past δ = 1 the plateau is empty and the constant is only an upper bound.
        if (delta <= 1.0) CHECK(bump_lipschitz(delta) == doctest::Approx(scanned).epsilon(1e-6));
        CHECK(bump_lipschitz(delta) >= scanned - 1e-9);
        CHECK(lipschitz_upper_bound(b) >= scanned - 1e-9);
        CHECK(lipschitz_upper_bound(b) >= 2.0);
    }
}

TEST_CASE("compose equals sequential evaluation") {
    SUBCASE("identity") {
        MLP c = compose(MLP::identity(2), MLP::identity(2));
        CHECK(c.eval(Vec{0.1, -3.0}) == Vec{0.1, -3.0});
    }
    SUBCASE("1-d examples on 1e3 grid") {
        MLP r = shifted_relu();
        MLP b = build_bump({0.4, 1});
        MLP c = compose(r, b);
        CHECK(c.depth() == r.depth() + 2);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double x = -0.5 + 2.0 * i / 999.0;
            worst = std::max(worst, std::abs(c.eval(Vec{x})[0] - r.eval(b.eval(Vec{x}))[0]));
        }
        CHECK(worst == 0.0);
    }
    SUBCASE("random networks") {
        Rng rng(7);
        MLP a = random_mlp(rng, {3, 5, 4, 2});
        MLP b = random_mlp(rng, {4, 6, 3});
        MLP c = compose(a, b);
        for (int i = 0; i < 1000; ++i) {
            const Vec x = random_point(rng, 4);
            const Vec want = a.eval(b.eval(x));
            const Vec got = c.eval(x);
            for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(got[j] - want[j]) <= 1e-12);
        }
    }
    SUBCASE("inner bump keeps outer on the plateau") {
        Rng rng(11);
        MLP phi = random_mlp(rng, {2, 6, 2});
        MLP c = compose(phi, build_bump({0.4, 2}));
        for (int i = 0; i < 200; ++i) {
            const Vec x = random_point(rng, 2, 0.2, 0.8);
            const Vec want = phi.eval(x);
            const Vec got = c.eval(x);
            for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(got[j] - want[j]) <= 1e-12);
        }
    }
}

TEST_CASE("pad_to_depth keeps the function") {
    Rng rng(3);
    MLP a = random_mlp(rng, {2, 4, 3});
    MLP p = pad_to_depth(a, 5);
    CHECK(p.depth() == 5);
    for (int i = 0; i < 100; ++i) {
        const Vec x = random_point(rng, 2);
        const Vec u = a.eval(x), v = p.eval(x);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(u[j] - v[j]) <= 1e-12);
    }
}

TEST_CASE("parallelize") {
    SUBCASE("identities stack into a block map") {
        std::vector<MLP> parts{MLP::identity(1), MLP::identity(1)};
        MLP p = parallelize(parts);
        CHECK(p.input_dim() == 2);
        CHECK(p.eval(Vec{0.3, -2.0}) == Vec{0.3, -2.0});
    }
    SUBCASE("two bumps") {
        std::vector<MLP> parts{build_bump({0.4, 1}), build_bump({0.4, 1})};
        const Vec y = parallelize(parts).eval(Vec{0.5, 0.05});
        CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(y[1] == 0.0);
    }
    SUBCASE("random parts against independent evaluation") {
        Rng rng(5);
        std::vector<MLP> parts{random_mlp(rng, {2, 5, 3}), random_mlp(rng, {2, 4, 4, 4, 2})};
        MLP p = parallelize(parts);
        CHECK(p.width() <= parts[0].width() * 2 + parts[1].width());
        for (int i = 0; i < 100; ++i) {
            const Vec x1 = random_point(rng, 2), x2 = random_point(rng, 2);
            Vec x = x1;
            x.insert(x.end(), x2.begin(), x2.end());
            Vec want = parts[0].eval(x1);
            const Vec w2 = parts[1].eval(x2);
            want.insert(want.end(), w2.begin(), w2.end());
            const Vec got = p.eval(x);
            for (std::size_t j = 0; j < want.size(); ++j) CHECK(std::abs(got[j] - want[j]) <= 1e-12);
        }
    }
    SUBCASE("errors") {
        std::vector<MLP> none;
        CHECK_THROWS_AS(parallelize(none), ParameterError);
        std::vector<MLP> mixed{MLP::identity(1), MLP::identity(2)};
        CHECK_THROWS_AS(parallelize(mixed), DimensionError);
    }
}

TEST_CASE("lipschitz bound dominates sampled slopes") {
    Rng rng(99);
    for (int net = 0; net < 5; ++net) {
        MLP m = random_mlp(rng, {3, 8, 8, 3});
        const double linf = lipschitz_upper_bound(m, Norm::linf);
        const double l2 = lipschitz_upper_bound(m, Norm::l2);
        for (int i = 0; i < 2000; ++i) {
            const Vec x = random_point(rng, 3), y = random_point(rng, 3);
            const Vec fx = m.eval(x), fy = m.eval(y);
            CHECK(dist_inf(fx, fy) <= linf * dist_inf(x, y) + 1e-12);
            CHECK(dist_l2(fx, fy) <= l2 * dist_l2(x, y) + 1e-12);
        }
    }
}

TEST_CASE("piecewise affine along lines inside a linear region") {
    MLP b = build_bump({0.4, 1});
    // Each triple lies strictly inside one of the pieces.
    for (double x : {-0.5, 0.12, 0.3, 0.6, 0.85, 1.5}) {
        const double h = 1e-3;
        const double f0 = b.eval(Vec{x - h})[0], f1 = b.eval(Vec{x})[0], f2 = b.eval(Vec{x + h})[0];
        CHECK(std::abs((f0 + f2) / 2.0 - f1) <= 1e-13);
    }
}

TEST_CASE("custom activation") {
    MLP m = shifted_relu();
    const Vec y = m.eval(Vec{0.25}, [](double v) { return std::tanh(v); });
    CHECK(y[0] == doctest::Approx(std::tanh(-0.25)));
}

TEST_CASE("json round trip is exact") {
    Rng rng(1);
    MLP m = random_mlp(rng, {2, 7, 3});
    const std::string text = to_json(m).dump();
    MLP r = mlp_from_json(nlohmann::json::parse(text));
    CHECK(r.depth() == m.depth());
    for (int i = 0; i < 50; ++i) {
        const Vec x = random_point(rng, 2);
        CHECK(r.eval(x) == m.eval(x));
    }
    CHECK_THROWS_AS(mlp_from_json(nlohmann::json::parse(R"({"input_dim":1})")), ParameterError);
}
