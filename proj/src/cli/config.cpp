#include <cmath>
#include <fstream>
#include <sstream>

#include "ifg/registry.hpp"
#include "internal.hpp"

namespace ifg::cli {

Reader::Reader(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
}

const json& Reader::need(const std::string& key) {
    if (!doc_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    used_.insert(key);
    return doc_.at(key);
}

double Reader::number(const std::string& key) {
    const json& v = need(key);
    if (!v.is_number()) throw ConfigError(where_ + "." + key + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where_ + "." + key + ": must be finite");
    resolved_[key] = x;
    return x;
}

double Reader::number(const std::string& key, double fallback) {
    if (!has(key)) {
        resolved_[key] = fallback;
        return fallback;
    }
    return number(key);
}

std::size_t Reader::count(const std::string& key) {
    const json& v = need(key);
    if (!v.is_number_unsigned()) throw ConfigError(where_ + "." + key + ": expected a nonnegative integer");
    const auto x = v.get<std::size_t>();
    resolved_[key] = x;
    return x;
}

std::size_t Reader::count(const std::string& key, std::size_t fallback) {
    if (!has(key)) {
        resolved_[key] = fallback;
        return fallback;
    }
    return count(key);
}

std::uint64_t Reader::seed(const std::string& key) {
    const json& v = need(key);
    if (!v.is_number_unsigned()) throw ConfigError(where_ + "." + key + ": seed must be a nonnegative integer");
    const auto x = v.get<std::uint64_t>();
    resolved_[key] = x;
    return x;
}

bool Reader::flag(const std::string& key, bool fallback) {
    if (!has(key)) {
        resolved_[key] = fallback;
        return fallback;
    }
    const json& v = need(key);
    if (!v.is_boolean()) throw ConfigError(where_ + "." + key + ": expected true or false");
    resolved_[key] = v;
    return v.get<bool>();
}

std::string Reader::text(const std::string& key) {
    const json& v = need(key);
    if (!v.is_string()) throw ConfigError(where_ + "." + key + ": expected a string");
    resolved_[key] = v;
    return v.get<std::string>();
}

std::string Reader::text(const std::string& key, const std::string& fallback) {
    if (!has(key)) {
        resolved_[key] = fallback;
        return fallback;
    }
    return text(key);
}

Vec Reader::numbers(const std::string& key) {
    const json& v = need(key);
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
        throw ConfigError(where_ + "." + key + ": expected an array of numbers");
    }
    resolved_[key] = v;
    return v.get<Vec>();
}

std::vector<std::size_t> Reader::counts(const std::string& key, std::vector<std::size_t> fallback) {
    if (!has(key)) {
        resolved_[key] = fallback;
        return fallback;
    }
    const json& v = need(key);
    if (!v.is_array() || v.empty() ||
        !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_unsigned(); })) {
        throw ConfigError(where_ + "." + key + ": expected a nonempty array of nonnegative integers");
    }
    resolved_[key] = v;
    return v.get<std::vector<std::size_t>>();
}

const json& Reader::raw(const std::string& key) {
    const json& v = need(key);
    resolved_[key] = v;
    return v;
}

Reader Reader::sub(const std::string& key) { return Reader(need(key), where_ + "." + key); }

void Reader::finish() const {
    for (const auto& [key, value] : doc_.items()) {
        if (!used_.contains(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
}

Integrator read_integrator(Reader& r, const std::string& key, Integrator fallback) {
    Integrator in = fallback;
    if (r.has(key)) {
        Reader s = r.sub(key);
        const std::string method = s.text("method", to_string(fallback.method));
        try {
            in.method = method_from_string(method);
        } catch (const ParameterError& e) {
            throw ConfigError(s.where() + ": " + e.what());
        }
        in.steps = s.count("steps", fallback.steps);
        s.finish();
    }
    if (in.steps == 0) throw ConfigError(r.where() + "." + key + ".steps: must be positive");
    r.put(key, {{"method", to_string(in.method)}, {"steps", in.steps}});
    return in;
}

GeneratorSpec read_generator(Reader& r, const std::string& key, Integrator integrator,
                             const std::filesystem::path& base) {
    const json& spec = r.raw(key);
    if (spec.is_string()) {
        IncrementalGenerator g = builtin_generator(spec.get<std::string>(), integrator);
        return {g, g, 0.0, spec};
    }
    if (spec.is_object() && spec.contains("manifest")) {
        if (!spec.at("manifest").is_string()) throw ConfigError(r.where() + "." + key + ".manifest: expected a path");
        std::filesystem::path path = spec.at("manifest").get<std::string>();
        if (path.is_relative()) path = base / path;
        if (std::filesystem::is_directory(path)) path /= "manifest.json";
        const json m = load_json_file(path);
        if (m.value("command", "") != "approx-flow") {
            throw ConfigError(path.string() + ": not an approx-flow manifest");
        }
        const auto dir = path.parent_path();
        return {generator_from_json(m.at("approximant"), dir), generator_from_json(m.at("target"), dir),
                m.at("certificate").at("total_bound").get<double>(), spec};
    }
    if (spec.is_object()) {
        IncrementalGenerator g = generator_from_json(spec, base);
        return {g, g, 0.0, spec};
    }
    throw ConfigError(r.where() + "." + key + ": expected a builtin name, a generator document or {\"manifest\": path}");
}

json Check::to_json() const {
    return {{"name", name},
            {"passed", passed},
            {"severity", warning_only ? "warning" : "error"},
            {"measured", measured},
            {"threshold", threshold},
            {"detail", detail}};
}

json load_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
}

std::string csv_row(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ',';
        s += cells[i];
    }
    return s + '\n';
}

std::string num(double v) { return format_double(v); }

bool all_error_checks_pass(const std::vector<Check>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed || c.warning_only; });
}

std::string version() { return IFG_VERSION; }

} // namespace ifg::cli
