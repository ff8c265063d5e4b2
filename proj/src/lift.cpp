#include <algorithm>
#include <cmath>
#include <numbers>

#include "ifg/lift.hpp"

namespace ifg {

namespace {

double trapezoid(double t) { return relu(std::min({1.0, 4.0 * t, 4.0 * (1.0 - t)})); }

void check_family(const std::vector<ScalarFunction>& f) {
    if (f.empty()) throw ParameterError("lift: need at least one component");
    for (const auto& g : f) {
        if (g.dim != f.front().dim) throw DimensionError("lift: components have different input dimensions");
        if (!g.eval) throw ParameterError("lift: component without evaluator");
    }
}

} // namespace

MLP clamp_lifted(std::size_t dim, std::size_t lifted) {
    std::vector<Layer::Entry> hidden, out;
    Vec hidden_bias(2 * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        const bool is_y = i >= dim - lifted;
        hidden.push_back({2 * i, i, 1.0});
        hidden.push_back({2 * i + 1, i, is_y ? 1.0 : -1.0});
        if (is_y) hidden_bias[2 * i + 1] = -1.0;
        out.push_back({i, 2 * i, 1.0});
        out.push_back({i, 2 * i + 1, -1.0});
    }
    std::vector<Layer> layers;
    layers.push_back(Layer::from_entries(2 * dim, dim, std::move(hidden), std::move(hidden_bias)));
    layers.push_back(Layer::from_entries(dim, 2 * dim, std::move(out), Vec(dim, 0.0)));
    return MLP(std::move(layers));
}

VectorField joint_lift_field(const std::vector<ScalarFunction>& f) {
    const std::size_t d = f.front().dim;
    const std::size_t m = d + f.size();
    double lip = 1.0;
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& g : f) {
        lip = std::max(lip, g.lipschitz);
        refs.push_back(g.ref);
    }
    VectorField::Info info{m, std::nullopt, lip, {{"id", "joint_lift"}, {"params", {{"functions", refs}}}}};
    return VectorField::analytic(std::move(info), [f, d](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d), 0.0);
        for (std::size_t i = 0; i < f.size(); ++i) out[d + i] = f[i](x.first(d));
    });
}

ScalarFunction scalar_function(const std::string& id, std::size_t dim, const nlohmann::json& params) {
    if (dim == 0) throw ParameterError("scalar function: dimension must be positive");
    ScalarFunction s;
    s.dim = dim;
    s.ref = {{"id", id}, {"dim", dim}, {"params", params.is_null() ? nlohmann::json::object() : params}};
    try {
        if (id == "zero") {
            s.eval = [](std::span<const double>) { return 0.0; };
        } else if (id == "constant") {
            const double v = params.at("value").get<double>();
            s.eval = [v](std::span<const double>) { return v; };
        } else if (id == "affine") {
            const Vec a = params.at("coeffs").get<Vec>();
            const double b = params.value("offset", 0.0);
            if (a.size() != dim) throw DimensionError("affine: coeffs length must equal dimension");
            for (double c : a) s.lipschitz += std::abs(c);
            s.eval = [a, b](std::span<const double> x) {
                double v = b;
                for (std::size_t i = 0; i < a.size(); ++i) v += a[i] * x[i];
                return v;
            };
        } else if (id == "square") {
            s.lipschitz = 2.0;
            s.eval = [](std::span<const double> x) { return x[0] * x[0]; };
        } else if (id == "tent") {
            s.lipschitz = 2.0;
            s.eval = [](std::span<const double> x) { return std::abs(2.0 * x[0] - 1.0); };
        } else if (id == "sin") {
            const double w = params.is_object() ? params.value("freq", 1.0) : 1.0;
            s.lipschitz = std::abs(w);
            s.eval = [w](std::span<const double> x) { return std::sin(w * x[0]); };
        } else if (id == "sin_bump") {
            s.lipschitz = 2.0 * std::numbers::pi + 4.0 * static_cast<double>(dim - 1);
            s.eval = [](std::span<const double> x) {
                if (!(x[0] > 0.0 && x[0] < 1.0)) return 0.0;
                double g = 1.0;
                for (std::size_t i = 1; i < x.size(); ++i) g *= trapezoid(x[i]);
                return g == 0.0 ? 0.0 : std::sin(2.0 * std::numbers::pi * x[0]) * g;
            };
        } else {
            throw ParameterError("unknown function id '" + id + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError("function '" + id + "': " + e.what());
    }
    return s;
}

ScalarFunction scalar_function_from_ref(const nlohmann::json& ref) {
    try {
        const std::string id = ref.at("id").get<std::string>();
        if (id == "mcshane") {
            const auto& p = ref.at("params");
            return mcshane_extension(p.at("points").get<std::vector<Vec>>(), p.at("values").get<Vec>(),
                                     p.at("lipschitz").get<double>());
        }
        return scalar_function(id, ref.value("dim", std::size_t{1}), ref.value("params", nlohmann::json::object()));
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("function reference: ") + e.what());
    }
}

ScalarFunction mcshane_extension(std::vector<Vec> points, Vec values, double lipschitz) {
    if (points.empty() || points.size() != values.size()) throw DimensionError("mcshane: points/values mismatch");
    if (!(lipschitz >= 0.0)) throw ParameterError("mcshane: Lipschitz constant must be >= 0");
    const std::size_t d = points.front().size();
    for (const auto& p : points) {
        if (p.size() != d) throw DimensionError("mcshane: ragged points");
    }
    ScalarFunction s;
    s.dim = d;
    s.lipschitz = lipschitz;
    s.ref = {{"id", "mcshane"},
             {"dim", d},
             {"params", {{"points", points}, {"values", values}, {"lipschitz", lipschitz}}}};
    s.eval = [points = std::move(points), values = std::move(values), lipschitz](std::span<const double> x) {
        double best = values[0] + lipschitz * dist_inf(x, points[0]);
        for (std::size_t k = 1; k < points.size(); ++k) best = std::min(best, values[k] + lipschitz * dist_inf(x, points[k]));
        return best;
    };
    return s;
}

VectorField lift_field(const ScalarFunction& g) {
    const std::size_t d = g.dim;
    VectorField::Info info{d + 1, std::nullopt, std::max(1.0, g.lipschitz), {{"id", "lift"}, {"params", {{"function", g.ref}}}}};
    return VectorField::analytic(std::move(info), [g, d](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d), 0.0);
        out[d] = g(x.first(d));
    });
}

Vec lifted_apply(const LiftedApproximator& approx, std::span<const double> x) {
    if (x.size() != approx.d) throw DimensionError("lifted_apply: expected dimension " + std::to_string(approx.d));
    Vec out(approx.D);
    if (approx.joint) {
        Vec z(approx.d + approx.D, 0.0);
        std::copy(x.begin(), x.end(), z.begin());
        const Vec y = flow_apply(approx.components.front(), z);
        std::copy(y.begin() + static_cast<std::ptrdiff_t>(approx.d), y.end(), out.begin());
        return out;
    }
    Vec z(approx.d + 1, 0.0);
    std::copy(x.begin(), x.end(), z.begin());
    for (std::size_t i = 0; i < approx.D; ++i) out[i] = flow_apply(approx.components[i], z)[approx.d];
    return out;
}

LiftedApproximator exact_lift(const std::vector<ScalarFunction>& f) {
    check_family(f);
    LiftedApproximator a{f.front().dim, f.size(), false, {}};
    for (const auto& g : f) a.components.push_back({lift_field(g), Direction::forward, {Method::euler, 1}});
    return a;
}

VectorField lifted_grid_field(const GridApproximation& grid, const nlohmann::json& target_ref, std::size_t lifted) {
    const std::size_t m = grid.field.dim();
    if (lifted == 0 || lifted >= m) throw ParameterError("lifted grid: lifted coordinate count out of range");
    MLP net = compose(grid.mlp, clamp_lifted(m, lifted));
    VectorField::Info info;
    info.dim = m;
    info.lipschitz = std::min(lipschitz_upper_bound(net), grid.field.lipschitz_bound());
    info.ref = {{"id", "lifted_grid"},
                {"params", {{"target", target_ref}, {"axis_counts", grid.field.grid()->counts()}, {"lifted", lifted}}}};
    return VectorField::from_mlp(std::move(info), std::move(net), grid.field.grid());
}

LiftApproximation approximate_lipschitz_function(const std::vector<ScalarFunction>& f, std::size_t n,
                                                 const LiftOptions& options) {
    check_family(f);
    if (n == 0) throw ParameterError("approximate_lipschitz_function: n must be positive");
    const std::size_t d = f.front().dim;
    const std::size_t D = f.size();
    const std::size_t lifted = options.joint ? D : 1;
    const std::size_t m = d + lifted;

    std::vector<std::size_t> counts(m, n);
    if (options.collapse_y) {
        for (std::size_t i = d; i < m; ++i) counts[i] = 1;
    }

    std::vector<VectorField> targets;
    std::vector<Vec> lips;
    if (options.joint) {
        targets.push_back(joint_lift_field(f));
        Vec l(m, 0.0);
        for (std::size_t i = 0; i < D; ++i) l[d + i] = f[i].lipschitz;
        lips.push_back(std::move(l));
    } else {
        for (const auto& g : f) {
            targets.push_back(lift_field(g));
            Vec l(m, 0.0);
            l[d] = g.lipschitz;
            lips.push_back(std::move(l));
        }
    }

    LiftApproximation out;
    out.approx = {d, D, options.joint, {}};
    std::vector<StageCertificate> stages;
    for (std::size_t c = 0; c < targets.size(); ++c) {
        GridApproximation grid = grid_relu_approximate_on_cube(targets[c], counts, Modulus::lipschitz(lips[c]));
        VectorField phi = lifted_grid_field(grid, targets[c].ref(), lifted);
        out.approx.components.push_back({phi, Direction::forward, options.integrator});
        out.sizes.push_back(size_report(*phi.mlp(), m, n));
        double err = 0.0;
        for (std::size_t i = d; i < m; ++i) err = std::max(err, grid.measured_error[i]);
        out.measured_field_error.push_back(err);
        stages.push_back({grid.omega, targets[c].lipschitz_bound()});
    }
    out.certificate = make_certificate(std::move(stages), n, m, ErrorCertificate::Kind::componentwise_max);
    return out;
}

} // namespace ifg
