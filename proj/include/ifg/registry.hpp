#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ifg/fields.hpp"
#include "ifg/flow.hpp"

namespace ifg {

/// Rebuilds a field from the `ref` record every builder attaches.
/// Grid-derived refs are resampled from their source, so the result matches
/// the original bit for bit. `grid` refs need a `path` to a binary grid file,
/// resolved against base_dir when relative.
VectorField field_from_ref(const nlohmann::json& ref, const std::filesystem::path& base_dir = {});

/// rotation_clipped, squeeze_clipped, sin_bump.
const std::vector<std::string>& builtin_field_names();
VectorField builtin_field(const std::string& name);

/// counterexample (squeeze then rotation), rotation, squeeze, sin_bump,
/// sin_bump_rotation (sin_bump then rotation).
const std::vector<std::string>& builtin_generator_names();
IncrementalGenerator builtin_generator(const std::string& name, Integrator integrator = {});

/// A field given either as a builtin name (string) or as a ref object.
VectorField field_from_spec(const nlohmann::json& spec, const std::filesystem::path& base_dir = {});

nlohmann::json flow_to_json(const FlowMap& flow);
FlowMap flow_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// {"format": "ifg-generator/1", "dim", "stages": [...], "lipschitz_bound"}.
nlohmann::json generator_to_json(const IncrementalGenerator& gen);
/// Rejects documents whose stored stage Lipschitz bounds disagree with the rebuilt fields.
IncrementalGenerator generator_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

} // namespace ifg
