#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"

#include "ifg/common.hpp"
#include "ifg/flow.hpp"

namespace ifg {

/// Stage 1: squeeze toward x = 1/2, stage 2: π-rotation about p = (1/2, 1/2),
/// both multiplied by the radial profile (1 inside r = 1/8, 0 outside R = 1/4).
IncrementalGenerator build_counterexample(Integrator integrator = {});
VectorField clipped_rotation_field();
VectorField clipped_squeeze_field();

struct OrbitRecord {
    enum class Kind { fixed, periodic, contracting, unclassified };

    Vec start;
    std::vector<Vec> iterates;  ///< F^1(start), F^2(start), ...
    Kind kind = Kind::unclassified;
    std::size_t period = 0;     ///< 1 for fixed, k for periodic(k)
    Vec limit;                  ///< contracting: last iterate
    double rate = 0.0;          ///< contracting: per-period ratio of successive displacements
    bool refined = false;       ///< produced by bisection rather than a grid seed
};

struct PeriodicOptions {
    std::size_t k_max = 2;
    double tol_close = 1e-6;
    double tol_separate = 1e-2;
    std::size_t grid_n = 16;
    std::size_t bisection_steps = 60;
};

/// Pure function of the stored iterates:
///  fixed        |F(s) - s| <= tol_close
///  periodic(k)  smallest k in [2, k_max] with |F^k(s) - s| <= tol_close and
///               |F^j(s) - s| >= tol_separate for 0 < j < k
///  contracting  for some k <= k_max the displacements |F^{(m+1)k} - F^{mk}| strictly decrease
OrbitRecord classify_orbit(Vec start, std::vector<Vec> iterates, const PeriodicOptions& options);

/// Scans a grid_n^d seed grid of `region`, then bisects sign changes of each
/// component of F^k - id along grid edges (k = 2..k_max) and classifies the
/// refined candidates. Seed records come first, refined ones after.
std::vector<OrbitRecord> detect_periodic(const PointMap& map, const Box& region, const PeriodicOptions& options = {});

struct ContractionProbe {
    Vec start;
    double transverse_before;
    double transverse_after;
    double ratio_per_period;
};

struct ContractionReport {
    std::vector<ContractionProbe> probes;
    double max_ratio = 0.0;
    double min_ratio = 0.0;
    std::size_t period = 0;
};

/// Probes on the circle of `radius` around a periodic point q, skipping those
/// within radius/10 of the invariant line through q with unit `normal`
/// (default e_1). Each probe is iterated n_iters periods; the ratio is the
/// per-period geometric mean of the transverse-distance change.
ContractionReport contraction_audit(const PointMap& map, const OrbitRecord& center, double radius, std::size_t n_probes,
                                    std::size_t n_iters, Vec normal = {});

struct FitOptions {
    std::size_t n_grid = 4;
    std::size_t eval_n = 9;       ///< evaluation grid points per axis on [0,1]^2
    std::size_t steps = 32;       ///< RK4 steps of the candidate flow
    std::size_t budget = 20000;   ///< residual evaluations, split between the two restarts
    double initial_step = 0.25;
    std::uint64_t seed = 0;
};

struct FitResult {
    VectorField candidate;
    Vec parameters;               ///< interior vertex values (boundary fixed at zero)
    double residual_sup = 0.0;
    std::size_t evaluations = 0;
    std::uint64_t seed = 0;
    std::string best_start;       ///< "zero" or "log_map"
};

/// Grid field on [0,1]^2 with zero boundary values built from interior parameters.
VectorField fit_candidate(const Vec& parameters, std::size_t n_grid);
double fit_residual(const VectorField& candidate, const std::vector<Vec>& points, const std::vector<Vec>& targets,
                    std::size_t steps);

/// Derivative-free compass search over interior grid values minimizing the
/// sup residual of Flow(candidate) against the target on the evaluation grid.
FitResult fit_single_flow(const PointMap& target, const FitOptions& options = {});

/// A seeded field in the search class, used as an in-class fitting target.
VectorField random_grid_field(std::size_t n_grid, double scale, std::uint64_t seed);

std::string to_string(OrbitRecord::Kind kind);

} // namespace ifg
