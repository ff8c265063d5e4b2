#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ifg/common.hpp"
#include "ifg/fields.hpp"

namespace ifg {

enum class Direction { forward, backward };
enum class Method { rk4, euler };

struct Integrator {
    Method method = Method::rk4;
    std::size_t steps = 256;
};

/// Time-1 map of an autonomous field. Backward integrates -V.
struct FlowMap {
    VectorField field;
    Direction direction = Direction::forward;
    Integrator integrator;
};

Vec flow_apply(const FlowMap& flow, std::span<const double> x);
void flow_apply_into(const FlowMap& flow, std::span<const double> x, std::span<double> out);
FlowMap flow_inverse(const FlowMap& flow);

/// φ = φ_T ∘ ... ∘ φ_1; stage 1 is applied first.
class IncrementalGenerator {
public:
    explicit IncrementalGenerator(std::vector<FlowMap> stages);

    const std::vector<FlowMap>& stages() const { return stages_; }
    std::size_t size() const { return stages_.size(); }
    std::size_t dim() const { return stages_.front().field.dim(); }
    /// Π e^{L_t} over the stage fields.
    double lipschitz_bound() const;
    /// Union of stage supports; nullopt when any stage is unbounded.
    const std::optional<Box>& support() const { return support_; }

private:
    std::vector<FlowMap> stages_;
    std::optional<Box> support_;
};

Vec generator_apply(const IncrementalGenerator& gen, std::span<const double> x);
IncrementalGenerator generator_inverse(const IncrementalGenerator& gen);

struct StageCertificate {
    Vec omega;          ///< ω^{(t)}(d/2n) per component
    double lipschitz;   ///< L^{V^{(t)}}
};

struct ErrorCertificate {
    enum class Kind { composition, componentwise_max };

    std::vector<StageCertificate> per_stage;
    std::size_t n = 0;
    std::size_t dim = 0;
    Kind kind = Kind::composition;
    double total_bound = 0.0;
    double lipschitz_certificate = 1.0;

    /// Recomputes total_bound from per_stage:
    /// composition: Σ_t 2 |ω_t|_inf Π_{j>=t} e^{L_j};
    /// componentwise_max: max_t 2 |ω_t|_inf e^{L_t}.
    double recompute() const;
    nlohmann::json to_json() const;
    static ErrorCertificate from_json(const nlohmann::json& doc);
};

ErrorCertificate make_certificate(std::vector<StageCertificate> stages, std::size_t n, std::size_t dim,
                                  ErrorCertificate::Kind kind = ErrorCertificate::Kind::composition);

/// Composition bound from the stage fields' Lipschitz bounds.
ErrorCertificate certify(const IncrementalGenerator& gen, std::span<const Modulus> moduli, std::size_t n);

/// Grid network composed with the bump network of parameter delta.
VectorField clipped_grid_field(const GridApproximation& grid, const nlohmann::json& source_ref, double delta);

struct FlowApproximation {
    FlowMap flow;                   ///< flow of the clipped ReLU approximant
    ErrorCertificate certificate;
    SizeReport size;                ///< size of grid network composed with the bump
    Vec measured_field_error;       ///< grid interpolant vs field on the finer grid
    double delta = 0.0;             ///< bump parameter chosen
};

/// Grid approximation of a field supported in [0,1]^d, clipped with the bump
/// network so that the approximant vanishes outside [δ/4, 1-δ/4]^d.
/// δ = min(|ω(d/2n)|_inf / L^V, 1/2), which keeps |V - Φ| <= 2|ω|_inf.
FlowApproximation approximate_flowable(const VectorField& field, const Modulus& modulus, std::size_t n,
                                       Integrator integrator = {});

using PointMap = std::function<Vec(std::span<const double>)>;

/// max |F(x) - F(y)|_inf / |x - y|_inf over `samples` pairs in `domain`:
/// half independent uniform pairs, half pairs at distance <= 1e-3.
double empirical_lipschitz(const PointMap& map, const Box& domain, std::size_t samples, std::uint64_t seed);

/// Applies a map to every point; partition-independent.
std::vector<Vec> apply_all(const PointMap& map, const std::vector<Vec>& points);

std::string to_string(Direction d);
std::string to_string(Method m);
Direction direction_from_string(const std::string& s);
Method method_from_string(const std::string& s);

} // namespace ifg
