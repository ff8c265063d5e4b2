#include <cmath>
#include <numbers>

#include "ifg/lift.hpp"
#include "ifg/probe.hpp"
#include "ifg/registry.hpp"

namespace ifg {

namespace {

using nlohmann::json;

const json& params_of(const json& ref) {
    static const json empty = json::object();
    return ref.contains("params") ? ref.at("params") : empty;
}

GridApproximation resample(const VectorField& source, const std::vector<std::size_t>& counts) {
    if (counts.size() != source.dim()) throw DimensionError("grid ref: axis_counts length must equal dimension");
    for (auto c : counts) {
        if (c == 0) throw ParameterError("grid ref: axis counts must be positive");
    }
    GridInterpolant grid = GridInterpolant::sample(
        [&](std::span<const double> x, std::span<double> out) { source.eval(x, out); }, counts);
    MLP mlp = grid.to_mlp();
    VectorField f = VectorField::from_grid(
        std::move(grid), {{"id", "grid_approx"}, {"params", {{"source", source.ref()}, {"axis_counts", counts}}}});
    return {std::move(f), std::move(mlp), {}, {}, {}};
}

VectorField build(const json& ref, const std::filesystem::path& base) {
    if (!ref.is_object()) throw ParameterError("field ref must be an object");
    const std::string id = ref.at("id").get<std::string>();
    const json& p = params_of(ref);
    if (id == "zero") return zero_field(p.at("dim").get<std::size_t>());
    if (id == "constant") return constant_field(p.at("value").get<Vec>());
    if (id == "linear") {
        return linear_field(p.at("dim").get<std::size_t>(), p.at("matrix").get<Vec>(), p.at("offset").get<Vec>());
    }
    if (id == "rotation") return rotation_field(p.at("center").get<Vec>(), p.at("rate").get<double>());
    if (id == "squeeze") return squeeze_field(p.at("line_x").get<double>());
    if (id == "sin_bump") return sin_bump_field();
    if (id == "radial_clip") {
        return radial_bump_clip(build(p.at("inner"), base), p.at("center").get<Vec>(), p.at("r_inner").get<double>(),
                                p.at("r_outer").get<double>());
    }
    if (id == "box_clip") return box_bump_clip(build(p.at("inner"), base), p.at("delta").get<double>());
    if (id == "grid") {
        if (!p.contains("path")) throw ParameterError("grid ref without a path cannot be rebuilt");
        std::filesystem::path path = p.at("path").get<std::string>();
        if (path.is_relative() && !base.empty()) path = base / path;
        return VectorField::from_grid(GridInterpolant::read_binary(path), ref);
    }
    if (id == "grid_approx") {
        return resample(build(p.at("source"), base), p.at("axis_counts").get<std::vector<std::size_t>>()).field;
    }
    if (id == "clipped_grid") {
        const json& source = p.at("source");
        return clipped_grid_field(resample(build(source, base), p.at("axis_counts").get<std::vector<std::size_t>>()),
                                  source, p.at("delta").get<double>());
    }
    if (id == "lift") return lift_field(scalar_function_from_ref(p.at("function")));
    if (id == "joint_lift") {
        std::vector<ScalarFunction> f;
        for (const auto& g : p.at("functions")) f.push_back(scalar_function_from_ref(g));
        if (f.empty()) throw ParameterError("joint_lift ref: no functions");
        return joint_lift_field(f);
    }
    if (id == "lifted_grid") {
        const json& target = p.at("target");
        return lifted_grid_field(resample(build(target, base), p.at("axis_counts").get<std::vector<std::size_t>>()),
                                 target, p.at("lifted").get<std::size_t>());
    }
    throw ParameterError("unknown field id '" + id + "'");
}

} // namespace

VectorField field_from_ref(const nlohmann::json& ref, const std::filesystem::path& base_dir) {
    try {
        return build(ref, base_dir);
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed field ref: ") + e.what());
    }
}

const std::vector<std::string>& builtin_field_names() {
    static const std::vector<std::string> names{"rotation_clipped", "squeeze_clipped", "sin_bump"};
    return names;
}

VectorField builtin_field(const std::string& name) {
    if (name == "rotation_clipped") return clipped_rotation_field();
    if (name == "squeeze_clipped") return clipped_squeeze_field();
    if (name == "sin_bump") return sin_bump_field();
    throw ParameterError("unknown builtin field '" + name + "'");
}

const std::vector<std::string>& builtin_generator_names() {
    static const std::vector<std::string> names{"counterexample", "rotation", "squeeze", "sin_bump",
                                                "sin_bump_rotation"};
    return names;
}

IncrementalGenerator builtin_generator(const std::string& name, Integrator integrator) {
    auto stage = [&](const char* field) { return FlowMap{builtin_field(field), Direction::forward, integrator}; };
    if (name == "counterexample") return build_counterexample(integrator);
    if (name == "rotation") return IncrementalGenerator({stage("rotation_clipped")});
    if (name == "squeeze") return IncrementalGenerator({stage("squeeze_clipped")});
    if (name == "sin_bump") return IncrementalGenerator({stage("sin_bump")});
    if (name == "sin_bump_rotation") return IncrementalGenerator({stage("sin_bump"), stage("rotation_clipped")});
    throw ParameterError("unknown builtin generator '" + name + "'");
}

VectorField field_from_spec(const nlohmann::json& spec, const std::filesystem::path& base_dir) {
    if (spec.is_string()) return builtin_field(spec.get<std::string>());
    return field_from_ref(spec, base_dir);
}

nlohmann::json flow_to_json(const FlowMap& flow) {
    return {{"field", flow.field.ref()},
            {"direction", to_string(flow.direction)},
            {"integrator", {{"method", to_string(flow.integrator.method)}, {"steps", flow.integrator.steps}}},
            {"lipschitz", flow.field.lipschitz_bound()}};
}

FlowMap flow_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    try {
        FlowMap f{field_from_spec(doc.at("field"), base_dir), Direction::forward, {}};
        if (doc.contains("direction")) f.direction = direction_from_string(doc.at("direction").get<std::string>());
        if (doc.contains("integrator")) {
            const auto& in = doc.at("integrator");
            if (in.contains("method")) f.integrator.method = method_from_string(in.at("method").get<std::string>());
            if (in.contains("steps")) f.integrator.steps = in.at("steps").get<std::size_t>();
        }
        if (f.integrator.steps == 0) throw ParameterError("flow: integrator steps must be positive");
        if (doc.contains("lipschitz")) {
            const double stored = doc.at("lipschitz").get<double>();
            const double rebuilt = f.field.lipschitz_bound();
            if (std::abs(stored - rebuilt) > 1e-12 * std::max(1.0, std::abs(rebuilt))) {
                throw ParameterError("flow: stored Lipschitz bound " + format_double(stored) +
                                     " does not match rebuilt " + format_double(rebuilt));
            }
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed flow record: ") + e.what());
    }
}

nlohmann::json generator_to_json(const IncrementalGenerator& gen) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : gen.stages()) stages.push_back(flow_to_json(s));
    return {{"format", "ifg-generator/1"},
            {"dim", gen.dim()},
            {"stages", stages},
            {"lipschitz_bound", gen.lipschitz_bound()}};
}

IncrementalGenerator generator_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    try {
        if (doc.at("format").get<std::string>() != "ifg-generator/1") {
            throw ParameterError("generator: unsupported format");
        }
        std::vector<FlowMap> stages;
        for (const auto& s : doc.at("stages")) stages.push_back(flow_from_json(s, base_dir));
        if (stages.empty()) throw ParameterError("generator: no stages");
        IncrementalGenerator gen(std::move(stages));
        if (gen.dim() != doc.at("dim").get<std::size_t>()) throw DimensionError("generator: dimension mismatch");
        return gen;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed generator: ") + e.what());
    }
}

} // namespace ifg
