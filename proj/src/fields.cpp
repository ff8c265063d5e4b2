#include <algorithm>
#include <cmath>
#include <numbers>

#include "ifg/fields.hpp"

namespace ifg {

struct VectorField::Impl {
    Info info;
    Backend backend = Backend::analytic;
    Evaluator evaluator;
    std::optional<MLP> network;
    std::shared_ptr<const GridInterpolant> grid;
    std::optional<double> clip_delta;
};

namespace {

void check_info(const VectorField::Info& info) {
    if (info.dim == 0) throw ParameterError("VectorField: dimension must be positive");
    if (info.support && info.support->dim() != info.dim) throw DimensionError("VectorField: support box dimension");
    if (!(info.lipschitz >= 0.0) || !std::isfinite(info.lipschitz)) {
        throw ParameterError("VectorField: Lipschitz bound must be finite and >= 0");
    }
}

} // namespace

const VectorField::Impl& VectorField::checked() const {
    if (!impl_) throw ParameterError("VectorField: use of an empty field");
    return *impl_;
}

VectorField VectorField::analytic(Info info, Evaluator eval) {
    check_info(info);
    if (!eval) throw ParameterError("VectorField: missing evaluator");
    auto impl = std::make_shared<Impl>();
    impl->info = std::move(info);
    impl->evaluator = std::move(eval);
    VectorField f;
    f.impl_ = std::move(impl);
    return f;
}

VectorField VectorField::from_mlp(Info info, MLP mlp, std::shared_ptr<const GridInterpolant> source,
                                  std::optional<double> clip_delta) {
    check_info(info);
    if (mlp.input_dim() != info.dim || mlp.output_dim() != info.dim) {
        throw DimensionError("VectorField: MLP must map R^d to R^d");
    }
    auto impl = std::make_shared<Impl>();
    impl->info = std::move(info);
    impl->backend = Backend::mlp;
    impl->network = std::move(mlp);
    impl->grid = std::move(source);
    impl->clip_delta = clip_delta;
    VectorField f;
    f.impl_ = std::move(impl);
    return f;
}

VectorField VectorField::from_grid(GridInterpolant grid, nlohmann::json ref) {
    auto shared = std::make_shared<const GridInterpolant>(std::move(grid));
    Info info;
    info.dim = shared->dim();
    info.support = shared->support();
    info.lipschitz = shared->lipschitz_linf();
    info.ref = ref.is_null() ? nlohmann::json{{"id", "grid"}, {"params", {{"axis_counts", shared->counts()}}}}
                             : std::move(ref);
    check_info(info);
    auto impl = std::make_shared<Impl>();
    impl->info = std::move(info);
    impl->backend = Backend::grid;
    impl->grid = std::move(shared);
    VectorField f;
    f.impl_ = std::move(impl);
    return f;
}

std::size_t VectorField::dim() const { return checked().info.dim; }
const std::optional<Box>& VectorField::support() const { return checked().info.support; }
double VectorField::lipschitz_bound() const { return checked().info.lipschitz; }
VectorField::Backend VectorField::backend() const { return checked().backend; }
const nlohmann::json& VectorField::ref() const { return checked().info.ref; }
const MLP* VectorField::mlp() const { return checked().network ? &*impl_->network : nullptr; }
std::shared_ptr<const GridInterpolant> VectorField::grid() const { return checked().grid; }
std::optional<double> VectorField::clip_delta() const { return checked().clip_delta; }

void VectorField::eval(std::span<const double> x, std::span<double> out) const {
    const Impl& impl = checked();
    if (x.size() != impl.info.dim || out.size() != impl.info.dim) {
        throw DimensionError("VectorField::eval: expected dimension " + std::to_string(impl.info.dim));
    }
    switch (impl.backend) {
    case Backend::analytic:
        impl.evaluator(x, out);
        break;
    case Backend::mlp:
        impl.network->eval_into(x, out);
        break;
    case Backend::grid:
        impl.grid->eval(x, out);
        break;
    }
}

Vec VectorField::operator()(std::span<const double> x) const {
    Vec out(dim());
    eval(x, out);
    return out;
}

VectorField zero_field(std::size_t dim) {
    VectorField::Info info{dim, Box::unit(dim), 0.0, {{"id", "zero"}, {"params", {{"dim", dim}}}}};
    return VectorField::analytic(std::move(info),
                                 [](std::span<const double>, std::span<double> out) { std::ranges::fill(out, 0.0); });
}

VectorField constant_field(Vec value) {
    const std::size_t d = value.size();
    const bool zero = norm_inf(value) == 0.0;
    VectorField::Info info{d, zero ? std::optional<Box>(Box::unit(d)) : std::nullopt, 0.0,
                           {{"id", "constant"}, {"params", {{"value", value}}}}};
    return VectorField::analytic(std::move(info), [value](std::span<const double>, std::span<double> out) {
        std::ranges::copy(value, out.begin());
    });
}

VectorField linear_field(std::size_t dim, Vec matrix, Vec offset) {
    if (matrix.size() != dim * dim || offset.size() != dim) throw DimensionError("linear_field: shape mismatch");
    double lip = 0.0;
    for (std::size_t r = 0; r < dim; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < dim; ++c) s += std::abs(matrix[r * dim + c]);
        lip = std::max(lip, s);
    }
    VectorField::Info info{dim, std::nullopt, lip,
                           {{"id", "linear"}, {"params", {{"dim", dim}, {"matrix", matrix}, {"offset", offset}}}}};
    return VectorField::analytic(std::move(info), [dim, matrix, offset](std::span<const double> x, std::span<double> out) {
        for (std::size_t r = 0; r < dim; ++r) {
            double s = offset[r];
            for (std::size_t c = 0; c < dim; ++c) s += matrix[r * dim + c] * x[c];
            out[r] = s;
        }
    });
}

VectorField rotation_field(std::span<const double> center, double rate) {
    if (center.size() != 2) throw DimensionError("rotation_field: center must have 2 entries");
    const double c1 = center[0], c2 = center[1];
    VectorField::Info info{2, std::nullopt, std::abs(rate),
                           {{"id", "rotation"}, {"params", {{"center", {c1, c2}}, {"rate", rate}}}}};
    return VectorField::analytic(std::move(info), [c1, c2, rate](std::span<const double> x, std::span<double> out) {
        out[0] = -rate * (x[1] - c2);
        out[1] = rate * (x[0] - c1);
    });
}

VectorField squeeze_field(double line_x) {
    VectorField::Info info{2, std::nullopt, 1.0, {{"id", "squeeze"}, {"params", {{"line_x", line_x}}}}};
    return VectorField::analytic(std::move(info), [line_x](std::span<const double> x, std::span<double> out) {
        out[0] = line_x - x[0];
        out[1] = 0.0;
    });
}

VectorField sin_bump_field() {
    // |∂x| + |∂y| <= 2π|cos| + 4|sin| <= sqrt(4π² + 16).
    const double lip = std::sqrt(4.0 * std::numbers::pi * std::numbers::pi + 16.0);
    VectorField::Info info{2, Box::unit(2), lip, {{"id", "sin_bump"}, {"params", nlohmann::json::object()}}};
    return VectorField::analytic(std::move(info), [](std::span<const double> x, std::span<double> out) {
        const double g = relu(std::min({1.0, 4.0 * x[1], 4.0 * (1.0 - x[1])}));
        const bool inside = x[0] > 0.0 && x[0] < 1.0;
        out[0] = inside && g > 0.0 ? std::sin(2.0 * std::numbers::pi * x[0]) * g : 0.0;
        out[1] = 0.0;
    });
}

double radial_profile(double dist, double r_inner, double r_outer) {
    if (dist <= r_inner) return 1.0;
    if (dist >= r_outer) return 0.0;
    return (r_outer - dist) / (r_outer - r_inner);
}

VectorField radial_bump_clip(const VectorField& field, std::span<const double> center, double r_inner,
                             double r_outer) {
    const std::size_t d = field.dim();
    if (center.size() != d) throw DimensionError("radial_bump_clip: center dimension");
    if (!(r_inner > 0.0 && r_inner < r_outer)) throw ParameterError("radial_bump_clip: need 0 < r_inner < r_outer");
    Vec c(center.begin(), center.end());
    Box box{Vec(d), Vec(d)};
    for (std::size_t i = 0; i < d; ++i) {
        box.lo[i] = c[i] - r_outer;
        box.hi[i] = c[i] + r_outer;
    }
    if (const auto& s = field.support()) {
        for (std::size_t i = 0; i < d; ++i) {
            box.lo[i] = std::max(box.lo[i], s->lo[i]);
            box.hi[i] = std::min(box.hi[i], s->hi[i]);
            if (box.lo[i] > box.hi[i]) box.lo[i] = box.hi[i];
        }
    }
    const Vec at_center = field(c);
    const double sup_v = norm_inf(at_center) + field.lipschitz_bound() * r_outer;
    const double lip = field.lipschitz_bound() + sup_v * std::sqrt(static_cast<double>(d)) / (r_outer - r_inner);
    VectorField::Info info{d, box, lip,
                           {{"id", "radial_clip"},
                            {"params", {{"inner", field.ref()}, {"center", c}, {"r_inner", r_inner}, {"r_outer", r_outer}}}}};
    return VectorField::analytic(std::move(info), [field, c, r_inner, r_outer](std::span<const double> x,
                                                                                std::span<double> out) {
        const double rho = radial_profile(dist_l2(x, c), r_inner, r_outer);
        if (rho == 0.0) {
            std::ranges::fill(out, 0.0);
            return;
        }
        field.eval(x, out);
        if (rho != 1.0) {
            for (double& v : out) v *= rho;
        }
    });
}

VectorField box_bump_clip(const VectorField& field, double delta) {
    const std::size_t d = field.dim();
    BumpSpec spec{delta, d};
    spec.validate();
    MLP bump = build_bump(spec);
    std::optional<Box> support;
    if (const auto& s = field.support(); s && std::ranges::all_of(s->lo, [](double v) { return v >= 0.0; })) {
        support = Box::cube(d, delta / 4.0, 1.0 - delta / 4.0);
    }
    VectorField::Info info{d, support, field.lipschitz_bound() * bump_lipschitz(delta),
                           {{"id", "box_clip"}, {"params", {{"inner", field.ref()}, {"delta", delta}}}}};
    if (const MLP* inner = field.mlp()) {
        return VectorField::from_mlp(std::move(info), compose(*inner, bump), field.grid(), delta);
    }
    return VectorField::analytic(std::move(info), [field, bump = std::move(bump), d](std::span<const double> x,
                                                                                    std::span<double> out) {
        Vec y(d);
        bump.eval_into(x, y);
        field.eval(y, out);
    });
}

nlohmann::json SizeReport::to_json() const {
    return {{"width", width},
            {"depth", depth},
            {"nonzeros", nonzeros},
            {"target_width", target_width},
            {"target_depth", target_depth},
            {"target_nonzeros", target_nonzeros},
            {"table_width", table_width},
            {"table_depth", table_depth},
            {"table_nonzeros", table_nonzeros}};
}

SizeReport size_report(const MLP& mlp, std::size_t dim, std::size_t n) {
    std::size_t log2d = 0;
    while ((std::size_t{1} << log2d) < dim) ++log2d;
    const double vertices = std::pow(static_cast<double>(n + 1), static_cast<double>(dim));
    const double dd = static_cast<double>(dim);
    SizeReport r;
    r.width = mlp.width();
    r.depth = mlp.depth();
    r.nonzeros = mlp.nonzeros();
    r.target_width = 8.0 * dd * vertices + 9.0;
    r.target_depth = static_cast<double>(log2d) + 6.0;
    r.target_nonzeros = 16.0 * dd * vertices + 9.0;
    r.table_width = 8.0 * dd * vertices;
    r.table_depth = static_cast<double>(log2d) + 4.0;
    r.table_nonzeros = 16.0 * dd * vertices;
    return r;
}

GridApproximation grid_relu_approximate(const VectorField& field, std::size_t n, const Modulus& modulus) {
    if (n == 0) throw ParameterError("grid_relu_approximate: n must be positive");
    const auto& s = field.support();
    if (!s || !Box::unit(field.dim()).contains(*s)) {
        throw ParameterError("grid_relu_approximate: field must be supported in [0,1]^d");
    }
    return grid_relu_approximate_on_cube(field, std::vector<std::size_t>(field.dim(), n), modulus);
}

GridApproximation grid_relu_approximate_on_cube(const VectorField& field, std::vector<std::size_t> counts,
                                                const Modulus& modulus) {
    const std::size_t d = field.dim();
    if (counts.size() != d) throw DimensionError("grid_relu_approximate: counts length must equal dimension");
    if (modulus.dim() != d) throw DimensionError("grid_relu_approximate: modulus dimension must equal field dimension");
    for (auto c : counts) {
        if (c == 0) throw ParameterError("grid_relu_approximate: n must be positive");
    }
    GridInterpolant grid = GridInterpolant::sample(
        [&](std::span<const double> x, std::span<double> out) { field.eval(x, out); }, counts);
    MLP mlp = grid.to_mlp();
    const std::size_t n = grid.n();
    SizeReport size = size_report(mlp, d, n);
    Vec omega = modulus.eval(static_cast<double>(d) / (2.0 * static_cast<double>(n)));

    // 4x finer lattice per axis.
    std::vector<std::size_t> fine(d);
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) {
        fine[i] = 4 * counts[i] + 1;
        total *= fine[i];
    }
    std::vector<Vec> per_point(total);
    parallel_for(total, [&](std::size_t k) {
        Vec x(d), a(d), b(d);
        std::size_t rest = k;
        for (std::size_t i = d; i-- > 0;) {
            x[i] = static_cast<double>(rest % fine[i]) / static_cast<double>(fine[i] - 1);
            rest /= fine[i];
        }
        field.eval(x, a);
        grid.eval(x, b);
        for (std::size_t j = 0; j < d; ++j) a[j] = std::abs(a[j] - b[j]);
        per_point[k] = std::move(a);
    });
    Vec measured(d, 0.0);
    for (const auto& e : per_point) {
        for (std::size_t j = 0; j < d; ++j) measured[j] = std::max(measured[j], e[j]);
    }
    VectorField approx = VectorField::from_grid(
        std::move(grid), {{"id", "grid_approx"}, {"params", {{"source", field.ref()}, {"axis_counts", counts}}}});
    return {std::move(approx), std::move(mlp), size, std::move(omega), std::move(measured)};
}

} // namespace ifg
