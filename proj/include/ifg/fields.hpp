#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "ifg/common.hpp"
#include "ifg/mlp.hpp"

namespace ifg {

/// Continuous piecewise-affine interpolant of vertex samples on the uniform
/// grid over [0,1]^d, using the Kuhn triangulation of every cell (simplices
/// ordered by descending fractional coordinate, ties by axis index).
/// Vertices outside the grid count as zero, so the interpolant decays to
/// zero within one cell outside the cube.
class GridInterpolant {
public:
    /// `values` holds vertex_count() x dim entries, vertices in lexicographic
    /// order (first axis slowest), components contiguous per vertex.
    GridInterpolant(std::vector<std::size_t> counts, Vec values);

    using Sampler = std::function<void(std::span<const double>, std::span<double>)>;
    static GridInterpolant sample(const Sampler& f, std::vector<std::size_t> counts);

    std::size_t dim() const { return counts_.size(); }
    const std::vector<std::size_t>& counts() const { return counts_; }
    bool isotropic() const;
    /// Largest per-axis subdivision count.
    std::size_t n() const;
    std::size_t vertex_count() const { return vertex_count_; }
    const Vec& values() const { return values_; }
    Vec vertex_point(std::size_t flat) const;

    void eval(std::span<const double> x, std::span<double> out) const;
    Vec operator()(std::span<const double> x) const;

    /// Largest l1 norm of a per-simplex gradient over all components,
    /// including the zero-padding ring: the exact l_inf Lipschitz constant.
    double lipschitz_linf() const;
    bool boundary_is_zero() const;
    /// [0,1]^d when every boundary vertex is zero, else the padded cube.
    Box support() const;
    double max_abs_value() const;

    /// Exact ReLU realization built from Kuhn hat functions
    /// hat(u) = relu(1 - max(0, u_1..u_d) - max(0, -u_1..-u_d)).
    MLP to_mlp() const;

    /// Binary layout: u64 dim, u64 n, then little-endian f64 payload.
    void write_binary(const std::filesystem::path& path) const;
    static GridInterpolant read_binary(const std::filesystem::path& path);
    nlohmann::json sidecar() const;

private:
    std::size_t flat_index(std::span<const std::ptrdiff_t> idx) const;

    std::vector<std::size_t> counts_;
    std::vector<std::size_t> strides_;
    std::size_t vertex_count_ = 0;
    Vec values_;
};

/// Componentwise modulus of regularity t -> ω(t).
class Modulus {
public:
    enum class Kind { lipschitz, holder, smooth_rate };

    static Modulus lipschitz(Vec constants);
    static Modulus lipschitz(std::size_t dim, double constant) { return lipschitz(Vec(dim, constant)); }
    static Modulus holder(Vec constants, double alpha);
    /// Smooth-case rate 85 (s+1)^d 8^s ||V_j||_{C^s} t^{-2s/d}, where the
    /// argument t plays the role of the product N·L.
    static Modulus smooth_rate(int s, std::size_t domain_dim, Vec cs_norms);

    Kind kind() const { return kind_; }
    std::size_t dim() const { return constants_.size(); }
    const Vec& constants() const { return constants_; }
    Vec eval(double t) const;

    nlohmann::json to_json() const;
    static Modulus from_json(const nlohmann::json& doc);

private:
    Kind kind_ = Kind::lipschitz;
    Vec constants_;
    double alpha_ = 1.0;
    int smoothness_ = 1;
    std::size_t domain_dim_ = 1;
};

Vec modulus_bound_eval(const Modulus& modulus, double t);

/// Lipschitz vector field on R^d with a declared support and an l_inf
/// Lipschitz upper bound. Cheap to copy; immutable after construction.
class VectorField {
public:
    enum class Backend { analytic, mlp, grid };
    using Evaluator = std::function<void(std::span<const double>, std::span<double>)>;

    struct Info {
        std::size_t dim = 0;
        std::optional<Box> support;
        double lipschitz = 0.0;
        nlohmann::json ref;
    };

    VectorField() = default;

    static VectorField analytic(Info info, Evaluator eval);
    static VectorField from_mlp(Info info, MLP mlp, std::shared_ptr<const GridInterpolant> source = nullptr,
                                std::optional<double> clip_delta = std::nullopt);
    static VectorField from_grid(GridInterpolant grid, nlohmann::json ref = nullptr);

    std::size_t dim() const;
    const std::optional<Box>& support() const;
    double lipschitz_bound() const;
    Backend backend() const;
    const nlohmann::json& ref() const;

    const MLP* mlp() const;
    /// Grid samples behind a grid backend or a grid-derived MLP backend.
    std::shared_ptr<const GridInterpolant> grid() const;
    std::optional<double> clip_delta() const;

    void eval(std::span<const double> x, std::span<double> out) const;
    Vec operator()(std::span<const double> x) const;

private:
    struct Impl;
    const Impl& checked() const;
    std::shared_ptr<const Impl> impl_;
};

VectorField zero_field(std::size_t dim);
VectorField constant_field(Vec value);
/// V(x) = A x + b with A row-major d x d.
VectorField linear_field(std::size_t dim, Vec matrix, Vec offset);
/// V(x, y) = (-rate (y - c2), rate (x - c1)).
VectorField rotation_field(std::span<const double> center, double rate);
/// V(x, y) = (line_x - x, 0).
VectorField squeeze_field(double line_x);
/// V(x, y) = (sin(2πx) g(y), 0) with g the unit trapezoid min(1, 4y, 4(1-y))+.
VectorField sin_bump_field();

/// Piecewise-linear radial profile: 1 on [0, r_inner], 0 beyond r_outer.
double radial_profile(double dist, double r_inner, double r_outer);

/// V(x) ρ(|x - center|_2). Lipschitz bound L_V + sup|V| sqrt(d) / (r_outer - r_inner),
/// with sup|V| over the outer ball bounded by |V(center)| + L_V r_outer.
VectorField radial_bump_clip(const VectorField& field, std::span<const double> center, double r_inner,
                             double r_outer);

/// x -> field(b(x_1), ..., b(x_d)) with the exact bump network. Vanishes
/// outside [δ/4, 1-δ/4]^d whenever the field vanishes on the coordinate
/// faces {x_i = 0}, which holds for fields supported in the positive orthant.
VectorField box_bump_clip(const VectorField& field, double delta);

struct SizeReport {
    std::size_t width = 0;
    std::size_t depth = 0;
    std::size_t nonzeros = 0;
    // Reference sizes: the constructive bound and the compact table figures.
    double target_width = 0;
    double target_depth = 0;
    double target_nonzeros = 0;
    double table_width = 0;
    double table_depth = 0;
    double table_nonzeros = 0;

    nlohmann::json to_json() const;
};

SizeReport size_report(const MLP& mlp, std::size_t dim, std::size_t n);

struct GridApproximation {
    VectorField field;  ///< grid backend
    MLP mlp;            ///< exact ReLU realization of the same interpolant
    SizeReport size;
    Vec omega;          ///< ω(d/(2n)) per component
    Vec measured_error; ///< per-component sup error on the 4x finer grid
};

/// Samples a field supported in [0,1]^d on the (n+1)^d vertex grid.
GridApproximation grid_relu_approximate(const VectorField& field, std::size_t n, const Modulus& modulus);

/// Same construction on explicit per-axis counts with no support requirement;
/// the error contract then holds on the cube only.
GridApproximation grid_relu_approximate_on_cube(const VectorField& field, std::vector<std::size_t> counts,
                                                const Modulus& modulus);

} // namespace ifg
