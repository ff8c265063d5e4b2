#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ifg/common.hpp"
#include "ifg/fields.hpp"
#include "ifg/flow.hpp"

namespace ifg {

/// Scalar map R^d -> R with an l_inf Lipschitz constant valid on [0,1]^d.
struct ScalarFunction {
    std::size_t dim = 1;
    double lipschitz = 0.0;
    std::function<double(std::span<const double>)> eval;
    nlohmann::json ref;

    double operator()(std::span<const double> x) const { return eval(x); }
};

/// Registry ids: zero, constant {value}, affine {coeffs, offset}, square (x_1^2),
/// tent (|2 x_1 - 1|), sin {freq} (sin(freq x_1)), sin_bump (sin(2π x_1) times a
/// unit trapezoid in the remaining coordinates).
ScalarFunction scalar_function(const std::string& id, std::size_t dim, const nlohmann::json& params = {});
ScalarFunction scalar_function_from_ref(const nlohmann::json& ref);

/// min_k (f_k + L |x - x_k|_inf): an L-Lipschitz extension of scattered samples.
ScalarFunction mcshane_extension(std::vector<Vec> points, Vec values, double lipschitz);

/// V_g(x, y) = (0, ..., 0, g(x)); Lipschitz bound max(1, L_g).
VectorField lift_field(const ScalarFunction& g);

/// (x, y_1..y_D) -> (0, f_1(x), ..., f_D(x)).
VectorField joint_lift_field(const std::vector<ScalarFunction>& f);

/// (x, y) -> (x, clamp(y, 0, 1)) on the last `lifted` coordinates, as a two-layer ReLU net.
MLP clamp_lifted(std::size_t dim, std::size_t lifted);

struct LiftedApproximator {
    std::size_t d = 0;
    std::size_t D = 0;
    bool joint = false;
    /// One flow in d+1 dimensions per output, or a single flow in d+D dimensions when joint.
    std::vector<FlowMap> components;
};

/// (π ∘ Flow(V_i) ∘ ι)(x) for each component, concatenated.
Vec lifted_apply(const LiftedApproximator& approx, std::span<const double> x);

/// Exact lifts; a single Euler step integrates them exactly.
LiftedApproximator exact_lift(const std::vector<ScalarFunction>& f);

struct LiftOptions {
    /// Use one cell along the lifted axis (the field is constant there).
    bool collapse_y = false;
    /// One flow in d+D dimensions instead of D flows in d+1.
    bool joint = false;
    Integrator integrator{Method::euler, 1};
};

struct LiftApproximation {
    LiftedApproximator approx;
    ErrorCertificate certificate;
    std::vector<SizeReport> sizes;
    Vec measured_field_error;  ///< per component, on the 4x finer grid
};

/// Grid-approximates each lifted field on [0,1]^{d+1}. The approximant is
/// Φ(x, y) = G(x, clamp(y, 0, 1)) with G the grid network; the clamp is a
/// two-unit ReLU pre-layer, so Φ is an exact ReLU MLP and its flow from y = 0
/// keeps x frozen.
LiftApproximation approximate_lipschitz_function(const std::vector<ScalarFunction>& f, std::size_t n,
                                                 const LiftOptions& options = {});

/// Grid network composed with the clamp pre-layer; `lifted` trailing coordinates are clamped.
VectorField lifted_grid_field(const GridApproximation& grid, const nlohmann::json& target_ref, std::size_t lifted);

} // namespace ifg
