#include <fstream>
#include <map>

#include "CLI11.hpp"

#include "ifg/cli.hpp"
#include "internal.hpp"

namespace ifg::cli {

namespace {

using Parser = Job (*)(const json&, const std::filesystem::path&);

struct CommandInfo {
    const char* name;
    const char* help;
    Parser parse;
};

const CommandInfo kCommands[] = {
    {"approx-flow", "Grid ReLU approximation of each stage field with a composition certificate", parse_approx_flow},
    {"lift-approx", "Lifted-flow approximation of Lipschitz functions", parse_lift_approx},
    {"generate", "Pushforward sampling and W1 concentration experiment", parse_generate},
    {"probe-flowability", "Periodic orbit, contraction and single-flow fit probes", parse_probe},
    {"bench", "Timing of the main kernels", parse_bench},
};

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << text;
    if (!os) throw std::runtime_error("cannot write " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void print_checks(std::ostream& out, const std::vector<Check>& checks) {
    for (const auto& c : checks) {
        const char* tag = c.passed ? "PASS" : (c.warning_only ? "WARN" : "FAIL");
        out << tag << "  " << c.name << "  measured=" << num(c.measured) << " threshold=" << num(c.threshold);
        if (!c.detail.empty()) out << "  (" << c.detail << ")";
        out << "\n";
    }
}

json checks_json(const std::string& command, const std::vector<Check>& checks) {
    json list = json::array();
    for (const auto& c : checks) list.push_back(c.to_json());
    return {{"command", command}, {"passed", all_error_checks_pass(checks)}, {"checks", list}};
}

int run_job(const CommandInfo& cmd, const std::string& config_path, const std::string& out_override,
            std::ostream& out) {
    const std::filesystem::path cfg_path = config_path;
    const std::filesystem::path base = cfg_path.parent_path();
    const json cfg = load_json_file(cfg_path);
    Job job = cmd.parse(cfg, base);

    std::filesystem::path dir;
    if (!out_override.empty()) {
        dir = out_override;
    } else if (job.resolved_config.contains("output")) {
        dir = job.resolved_config.at("output").get<std::string>();
        if (dir.is_relative()) dir = (base / dir).lexically_normal();
    } else {
        throw ConfigError("no output directory: set 'output' in the config or pass --out");
    }
    job.resolved_config.erase("output");

    RunOutput result = job.run();

    json manifest = {{"format", "ifg-run/1"}, {"command", job.command}, {"version", version()},
                     {"config", job.resolved_config}};
    for (auto& [k, v] : result.manifest.items()) manifest[k] = v;

    std::filesystem::create_directories(dir);
    write_text(dir / "config.json", dump(job.resolved_config));
    write_text(dir / "manifest.json", dump(manifest));
    write_text(dir / "metrics.csv", result.metrics_csv);
    write_text(dir / "acceptance.json", dump(checks_json(job.command, result.checks)));
    for (const auto& [name, text] : result.extra_files) write_text(dir / name, text);

    print_checks(out, result.checks);
    out << "wrote " << dir.string() << "\n";
    return all_error_checks_pass(result.checks) ? ok : acceptance_failure;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Incremental flow generator toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version());

    std::string config_path, out_dir, verify_path;
    bool remeasure = false;
    std::map<CLI::App*, const CommandInfo*> by_app;
    for (const auto& cmd : kCommands) {
        CLI::App* sc = app.add_subcommand(cmd.name, cmd.help);
        sc->add_option("-c,--config", config_path, "JSON run configuration")->required();
        sc->add_option("-o,--out", out_dir, "Output directory (overrides the config's 'output')");
        by_app[sc] = &cmd;
    }
    CLI::App* verify = app.add_subcommand("verify", "Re-check the certificates of a run directory or manifest");
    verify->add_option("path", verify_path, "Run directory or manifest.json")->required();
    verify->add_flag("--remeasure", remeasure, "Also recompute measured errors from the rebuilt generators");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : config_error;
    }

    try {
        if (verify->parsed()) {
            const VerifyResult res = verify_manifest(verify_path, remeasure);
            out << "verify " << res.command << "\n";
            print_checks(out, res.checks);
            return all_error_checks_pass(res.checks) ? ok : acceptance_failure;
        }
        for (const auto& [sc, cmd] : by_app) {
            if (sc->parsed()) return run_job(*cmd, config_path, out_dir, out);
        }
        err << "no command given\n";
        return config_error;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const ParameterError& e) {
        err << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const DimensionError& e) {
        err << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return numeric_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return io_failure;
    }
}

} // namespace ifg::cli
