#include <algorithm>
#include <cmath>

#include "ifg/flow.hpp"

namespace ifg {

void flow_apply_into(const FlowMap& flow, std::span<const double> x, std::span<double> out) {
    const std::size_t d = flow.field.dim();
    if (x.size() != d || out.size() != d) throw DimensionError("flow_apply: dimension mismatch");
    if (!all_finite(x)) throw NumericError("flow_apply: non-finite input");
    if (flow.integrator.steps == 0) throw ParameterError("flow_apply: steps must be positive");
    const double sign = flow.direction == Direction::forward ? 1.0 : -1.0;
    const double h = sign / static_cast<double>(flow.integrator.steps);
    std::copy(x.begin(), x.end(), out.begin());
    Vec k1(d), k2(d), k3(d), k4(d), tmp(d);
    for (std::size_t step = 0; step < flow.integrator.steps; ++step) {
        flow.field.eval(out, k1);
        if (flow.integrator.method == Method::euler) {
            for (std::size_t i = 0; i < d; ++i) out[i] += h * k1[i];
        } else {
            for (std::size_t i = 0; i < d; ++i) tmp[i] = out[i] + 0.5 * h * k1[i];
            flow.field.eval(tmp, k2);
            for (std::size_t i = 0; i < d; ++i) tmp[i] = out[i] + 0.5 * h * k2[i];
            flow.field.eval(tmp, k3);
            for (std::size_t i = 0; i < d; ++i) tmp[i] = out[i] + h * k3[i];
            flow.field.eval(tmp, k4);
            for (std::size_t i = 0; i < d; ++i) out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if (!all_finite(out)) throw NumericError("flow_apply: non-finite state at step " + std::to_string(step + 1));
    }
}

Vec flow_apply(const FlowMap& flow, std::span<const double> x) {
    Vec out(x.size());
    flow_apply_into(flow, x, out);
    return out;
}

FlowMap flow_inverse(const FlowMap& flow) {
    FlowMap inv = flow;
    inv.direction = flow.direction == Direction::forward ? Direction::backward : Direction::forward;
    return inv;
}

IncrementalGenerator::IncrementalGenerator(std::vector<FlowMap> stages) : stages_(std::move(stages)) {
    if (stages_.empty()) throw ParameterError("IncrementalGenerator: needs at least one stage");
    const std::size_t d = stages_.front().field.dim();
    support_ = stages_.front().field.support();
    for (const auto& s : stages_) {
        if (s.field.dim() != d) throw DimensionError("IncrementalGenerator: stage dimensions differ");
        support_ = box_union(support_, s.field.support());
    }
}

double IncrementalGenerator::lipschitz_bound() const {
    double sum = 0.0;
    for (const auto& s : stages_) sum += s.field.lipschitz_bound();
    return std::exp(sum);
}

Vec generator_apply(const IncrementalGenerator& gen, std::span<const double> x) {
    Vec cur(x.begin(), x.end()), next(x.size());
    for (const auto& stage : gen.stages()) {
        flow_apply_into(stage, cur, next);
        std::swap(cur, next);
    }
    return cur;
}

IncrementalGenerator generator_inverse(const IncrementalGenerator& gen) {
    std::vector<FlowMap> stages;
    for (auto it = gen.stages().rbegin(); it != gen.stages().rend(); ++it) stages.push_back(flow_inverse(*it));
    return IncrementalGenerator(std::move(stages));
}

double ErrorCertificate::recompute() const {
    if (kind == Kind::componentwise_max) {
        double best = 0.0;
        for (const auto& s : per_stage) best = std::max(best, 2.0 * norm_inf(s.omega) * std::exp(s.lipschitz));
        return best;
    }
    double total = 0.0;
    for (std::size_t t = 0; t < per_stage.size(); ++t) {
        double tail = 0.0;
        for (std::size_t j = t; j < per_stage.size(); ++j) tail += per_stage[j].lipschitz;
        total += 2.0 * norm_inf(per_stage[t].omega) * std::exp(tail);
    }
    return total;
}

nlohmann::json ErrorCertificate::to_json() const {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : per_stage) stages.push_back({{"omega", s.omega}, {"lipschitz", s.lipschitz}});
    return {{"kind", kind == Kind::composition ? "composition" : "componentwise_max"},
            {"n", n},
            {"dim", dim},
            {"per_stage", stages},
            {"total_bound", total_bound},
            {"lipschitz_certificate", lipschitz_certificate}};
}

ErrorCertificate ErrorCertificate::from_json(const nlohmann::json& doc) {
    try {
        ErrorCertificate c;
        const std::string kind = doc.at("kind").get<std::string>();
        if (kind == "composition") {
            c.kind = Kind::composition;
        } else if (kind == "componentwise_max") {
            c.kind = Kind::componentwise_max;
        } else {
            throw ParameterError("certificate: unknown kind '" + kind + "'");
        }
        c.n = doc.at("n").get<std::size_t>();
        c.dim = doc.at("dim").get<std::size_t>();
        for (const auto& s : doc.at("per_stage")) {
            c.per_stage.push_back({s.at("omega").get<Vec>(), s.at("lipschitz").get<double>()});
        }
        c.total_bound = doc.at("total_bound").get<double>();
        c.lipschitz_certificate = doc.at("lipschitz_certificate").get<double>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("certificate: malformed JSON: ") + e.what());
    }
}

ErrorCertificate make_certificate(std::vector<StageCertificate> stages, std::size_t n, std::size_t dim,
                                  ErrorCertificate::Kind kind) {
    ErrorCertificate c;
    c.per_stage = std::move(stages);
    c.n = n;
    c.dim = dim;
    c.kind = kind;
    c.total_bound = c.recompute();
    double sum = 0.0;
    for (const auto& s : c.per_stage) sum += s.lipschitz;
    c.lipschitz_certificate = kind == ErrorCertificate::Kind::composition ? std::exp(sum) : 0.0;
    if (kind == ErrorCertificate::Kind::componentwise_max) {
        for (const auto& s : c.per_stage) c.lipschitz_certificate = std::max(c.lipschitz_certificate, std::exp(s.lipschitz));
    }
    return c;
}

ErrorCertificate certify(const IncrementalGenerator& gen, std::span<const Modulus> moduli, std::size_t n) {
    if (moduli.size() != gen.size()) {
        throw DimensionError("certify: " + std::to_string(moduli.size()) + " moduli for " + std::to_string(gen.size()) +
                             " stages");
    }
    if (n == 0) throw ParameterError("certify: n must be positive");
    const std::size_t d = gen.dim();
    const double t = static_cast<double>(d) / (2.0 * static_cast<double>(n));
    std::vector<StageCertificate> stages;
    for (std::size_t i = 0; i < gen.size(); ++i) {
        if (moduli[i].dim() != d) throw DimensionError("certify: modulus dimension");
        stages.push_back({moduli[i].eval(t), gen.stages()[i].field.lipschitz_bound()});
    }
    return make_certificate(std::move(stages), n, d);
}

VectorField clipped_grid_field(const GridApproximation& grid, const nlohmann::json& source_ref, double delta) {
    const std::size_t d = grid.field.dim();
    MLP net = compose(grid.mlp, build_bump({delta, d}));
    const double grid_lip = grid.field.lipschitz_bound();
    VectorField::Info info;
    info.dim = d;
    if (grid.field.grid()->boundary_is_zero()) info.support = Box::cube(d, delta / 4.0, 1.0 - delta / 4.0);
    info.lipschitz = std::min(lipschitz_upper_bound(net), grid_lip * bump_lipschitz(delta));
    info.ref = {{"id", "clipped_grid"},
                {"params", {{"source", source_ref}, {"axis_counts", grid.field.grid()->counts()}, {"delta", delta}}}};
    return VectorField::from_mlp(std::move(info), std::move(net), grid.field.grid(), delta);
}

FlowApproximation approximate_flowable(const VectorField& field, const Modulus& modulus, std::size_t n,
                                       Integrator integrator) {
    GridApproximation grid = grid_relu_approximate(field, n, modulus);
    const std::size_t d = field.dim();
    const double omega = norm_inf(grid.omega);
    const double lv = field.lipschitz_bound();
    double delta = 0.5;
    if (lv > 0.0) {
        if (omega == 0.0) throw ParameterError("approximate_flowable: zero modulus for a non-constant field");
        delta = std::min(omega / lv, 0.5);
    }
    VectorField approx = clipped_grid_field(grid, field.ref(), delta);

    FlowApproximation out{FlowMap{approx, Direction::forward, integrator},
                          make_certificate({{grid.omega, lv}}, n, d),
                          size_report(*approx.mlp(), d, n),
                          grid.measured_error,
                          delta};
    out.certificate.lipschitz_certificate = std::exp(approx.lipschitz_bound());
    return out;
}

double empirical_lipschitz(const PointMap& map, const Box& domain, std::size_t samples, std::uint64_t seed) {
    const std::size_t d = domain.dim();
    std::vector<double> ratios(samples, 0.0);
    parallel_for(samples, [&](std::size_t i) {
        Rng rng(mix_seed(seed, i));
        Vec x(d), y(d);
        for (std::size_t k = 0; k < d; ++k) x[k] = rng.uniform(domain.lo[k], domain.hi[k]);
        if (i % 2 == 0) {
            for (std::size_t k = 0; k < d; ++k) y[k] = rng.uniform(domain.lo[k], domain.hi[k]);
        } else {
            for (std::size_t k = 0; k < d; ++k) y[k] = x[k] + rng.uniform(-1e-3, 1e-3);
        }
        const double dx = dist_inf(x, y);
        if (dx == 0.0) return;
        ratios[i] = dist_inf(map(x), map(y)) / dx;
    });
    return samples == 0 ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
}

std::vector<Vec> apply_all(const PointMap& map, const std::vector<Vec>& points) {
    std::vector<Vec> out(points.size());
    parallel_for(points.size(), [&](std::size_t i) { out[i] = map(points[i]); });
    return out;
}

std::string to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }
std::string to_string(Method m) { return m == Method::rk4 ? "rk4" : "euler"; }

Direction direction_from_string(const std::string& s) {
    if (s == "forward") return Direction::forward;
    if (s == "backward") return Direction::backward;
    throw ParameterError("unknown direction '" + s + "'");
}

Method method_from_string(const std::string& s) {
    if (s == "rk4") return Method::rk4;
    if (s == "euler") return Method::euler;
    throw ParameterError("unknown integrator '" + s + "'");
}

} // namespace ifg
