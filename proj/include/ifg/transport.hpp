#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"

#include "ifg/common.hpp"
#include "ifg/flow.hpp"
#include "ifg/lift.hpp"

namespace ifg {

/// Weighted point cloud; weights are nonnegative and sum to 1.
struct EmpiricalMeasure {
    std::vector<Vec> points;
    Vec weights;

    std::size_t size() const { return points.size(); }
    std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
    /// Throws on empty, ragged, non-finite, negative or unnormalized input.
    void validate() const;
};

EmpiricalMeasure uniform_measure(std::vector<Vec> points);
EmpiricalMeasure weighted_measure(std::vector<Vec> points, Vec weights);

EmpiricalMeasure pushforward(const PointMap& map, const EmpiricalMeasure& mu);
EmpiricalMeasure pushforward(const IncrementalGenerator& gen, const EmpiricalMeasure& mu);
EmpiricalMeasure pushforward(const LiftedApproximator& approx, const EmpiricalMeasure& mu);

struct CouplingEntry {
    std::size_t i;
    std::size_t j;
    double mass;
};

/// Right-hand side of  W1 <= L sqrt(d) C / N^{1/d} + δ + ε  holding with
/// probability at least 1 - 2 exp(-2 N δ² / (d L²)).
struct BoundTerms {
    double lipschitz = 1.0;
    std::size_t N = 0;
    std::size_t dim = 0;
    double delta = 0.0;
    double epsilon = 0.0;
    double constant_C = 1.0;
    bool constant_verified = false;

    double rhs() const;
    double probability_lhs() const;
    bool vacuous() const { return probability_lhs() <= 0.0; }
    nlohmann::json to_json() const;
};

struct TransportReport {
    double w1 = 0.0;
    std::vector<CouplingEntry> coupling;
    std::size_t pivots = 0;
    BoundTerms terms;
    double bound_rhs = 0.0;
    double success_probability_lhs = 0.0;
};

/// Exact W1 with Euclidean ground cost (network simplex on the complete
/// bipartite graph; arcs are implicit and costs computed on demand).
TransportReport w1_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Largest |marginal - weight| of the coupling over both sides.
double coupling_marginal_error(const TransportReport& report, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

using Sampler = std::function<std::vector<Vec>(std::size_t count, Rng& rng)>;

/// i.i.d. uniform points on [0,1]^d.
Sampler uniform_sampler(std::size_t dim);
/// One uniform point per cell of a k^d grid (k = floor(count^{1/d})), the rest i.i.d. uniform.
Sampler stratified_sampler(std::size_t dim);

struct ConcentrationOptions {
    std::size_t proxy_size = 4096;
    double constant_C = 1.0;
    double lipschitz = 1.0;  ///< certified L of the generator
    double epsilon = 0.0;    ///< certified approximation bound of the generator
    bool estimate_proxy_error = true;
};

struct ConcentrationRow {
    std::size_t N;
    std::size_t trial;
    double w1;
    double bound_rhs;
    double prob_lhs;
};

struct ConcentrationSummary {
    std::size_t N;
    double median;
    double mean;
    double q90;
    double bound_rhs;
    double prob_lhs;
    bool vacuous;
    double fraction_within_bound;
};

struct ConcentrationResult {
    std::vector<ConcentrationRow> rows;
    std::vector<ConcentrationSummary> summary;
    double proxy_error = 0.0;  ///< W1 between two independent proxies of the target
    bool constant_verified = false;
    bool median_strictly_decreasing = false;
};

ConcentrationResult concentration_experiment(const PointMap& gen, std::size_t dim, const Sampler& target,
                                             const Sampler& noise, const std::vector<std::size_t>& N_list,
                                             std::size_t trials, double delta, std::uint64_t seed,
                                             const ConcentrationOptions& options = {});

/// CSV with a header row: d coordinate columns and an optional trailing `weight` column.
EmpiricalMeasure read_measure_csv(const std::filesystem::path& path);
void write_measure_csv(const std::filesystem::path& path, const EmpiricalMeasure& mu);

} // namespace ifg
