#pragma once

#include <cstdint>
#include <functional>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ifg/flow.hpp"

namespace ifg::cli {

using nlohmann::json;

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Typed, strict view of one JSON object. Every read is recorded, with
/// defaults filled in, so the resolved document can be written back out.
class Reader {
public:
    Reader(const json& doc, std::string where);

    bool has(const std::string& key) const { return doc_.contains(key); }
    const std::string& where() const { return where_; }

    double number(const std::string& key);
    double number(const std::string& key, double fallback);
    std::size_t count(const std::string& key);
    std::size_t count(const std::string& key, std::size_t fallback);
    std::uint64_t seed(const std::string& key);
    bool flag(const std::string& key, bool fallback);
    std::string text(const std::string& key);
    std::string text(const std::string& key, const std::string& fallback);
    Vec numbers(const std::string& key);
    std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback);
    /// Raw value, copied into the resolved document unchanged.
    const json& raw(const std::string& key);
    Reader sub(const std::string& key);
    void put(const std::string& key, json value) { resolved_[key] = std::move(value); }

    /// Throws on keys that were never read.
    void finish() const;
    const json& resolved() const { return resolved_; }

private:
    const json& need(const std::string& key);

    json doc_;
    std::string where_;
    std::set<std::string> used_;
    json resolved_ = json::object();
};

/// Reads {"method", "steps"} under `key`, defaulting to `fallback`.
Integrator read_integrator(Reader& r, const std::string& key, Integrator fallback);

struct Check {
    std::string name;
    bool passed = false;
    bool warning_only = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;

    json to_json() const;
};

struct RunOutput {
    json manifest;
    std::string metrics_csv;
    std::vector<Check> checks;
    std::vector<std::pair<std::string, std::string>> extra_files;
};

/// Output of a config parse: the job closure runs after the output location is known.
struct Job {
    std::string command;
    json resolved_config;
    std::function<RunOutput()> run;
};

Job parse_approx_flow(const json& config, const std::filesystem::path& base);
Job parse_lift_approx(const json& config, const std::filesystem::path& base);
Job parse_generate(const json& config, const std::filesystem::path& base);
Job parse_probe(const json& config, const std::filesystem::path& base);
Job parse_bench(const json& config, const std::filesystem::path& base);

struct VerifyResult {
    std::vector<Check> checks;
    std::string command;
};

VerifyResult verify_manifest(const std::filesystem::path& path, bool remeasure);

/// A generator given as a builtin name, an inline generator document, or
/// {"manifest": path} naming an approx-flow run.
struct GeneratorSpec {
    IncrementalGenerator generator;
    IncrementalGenerator target;
    double epsilon = 0.0;
    json source;
};
GeneratorSpec read_generator(Reader& r, const std::string& key, Integrator integrator,
                             const std::filesystem::path& base);

/// sup_x |target(x) - approx(x)|_inf over points; optionally per point.
double flow_error_sup(const IncrementalGenerator& target, const IncrementalGenerator& approx,
                      const std::vector<Vec>& points, Vec* per_point = nullptr);

json load_json_file(const std::filesystem::path& path);
std::string csv_row(const std::vector<std::string>& cells);
std::string num(double v);
bool all_error_checks_pass(const std::vector<Check>& checks);
std::string version();

} // namespace ifg::cli
