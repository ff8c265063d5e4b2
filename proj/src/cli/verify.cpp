#include <cmath>

#include "ifg/lift.hpp"
#include "ifg/probe.hpp"
#include "ifg/registry.hpp"
#include "ifg/transport.hpp"
#include "internal.hpp"

namespace ifg::cli {

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

void certificate_checks(const json& doc, double measured, const std::string& tag, std::vector<Check>& out) {
    const ErrorCertificate cert = ErrorCertificate::from_json(doc);
    const double again = cert.recompute();
    out.push_back({"certificate_recomputes", close(again, cert.total_bound), false, again, cert.total_bound, tag});
    out.push_back({"certificate_dominates", measured <= again, false, measured, again, tag});
}

} // namespace

VerifyResult verify_manifest(const std::filesystem::path& path, bool remeasure) {
    const std::filesystem::path file = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
    const json m = load_json_file(file);
    const std::filesystem::path dir = file.parent_path();
    VerifyResult res;
    try {
        res.command = m.at("command").get<std::string>();
        auto& checks = res.checks;
        if (res.command == "approx-flow") {
            const IncrementalGenerator target = generator_from_json(m.at("target"), dir);
            const IncrementalGenerator approx = generator_from_json(m.at("approximant"), dir);
            const double measured = m.at("measured_flow_error").get<double>();
            certificate_checks(m.at("certificate"), measured, "", checks);
            const ErrorCertificate cert = ErrorCertificate::from_json(m.at("certificate"));
            bool same = cert.per_stage.size() == target.size();
            for (std::size_t t = 0; same && t < target.size(); ++t) {
                same = cert.per_stage[t].lipschitz == target.stages()[t].field.lipschitz_bound();
            }
            checks.push_back({"certificate_matches_target", same, false, 0.0, 0.0, "per-stage Lipschitz constants"});
            double lip_sum = 0.0;
            for (const auto& s : approx.stages()) lip_sum += s.field.lipschitz_bound();
            checks.push_back({"lipschitz_certificate", close(std::exp(lip_sum), cert.lipschitz_certificate), false,
                              std::exp(lip_sum), cert.lipschitz_certificate, ""});
            if (remeasure) {
                const auto points = grid_points(Box::unit(target.dim()), m.at("eval_grid").get<std::size_t>());
                const double again = flow_error_sup(target, approx, points);
                checks.push_back({"measured_error_reproduces", again == measured, false, again, measured, ""});
            }
        } else if (res.command == "lift-approx") {
            for (const auto& run : m.at("runs")) {
                const std::string tag = "n=" + std::to_string(run.at("n").get<std::size_t>());
                const Vec err = run.at("measured_error").get<Vec>();
                certificate_checks(run.at("certificate"), *std::max_element(err.begin(), err.end()), tag, checks);
                for (const auto& c : run.at("approximator").at("components")) flow_from_json(c, dir);
            }
            checks.push_back({"components_rebuild", true, false, 0.0, 0.0, ""});
        } else if (res.command == "generate") {
            const IncrementalGenerator gen = generator_from_json(m.at("generator"), dir);
            for (const auto& s : m.at("summary")) {
                const json& t = s.at("terms");
                const BoundTerms terms{t.at("lipschitz").get<double>(), t.at("N").get<std::size_t>(),
                                       t.at("dim").get<std::size_t>(), t.at("delta").get<double>(),
                                       t.at("epsilon").get<double>(), t.at("constant_C").get<double>(), false};
                const std::string tag = "N=" + std::to_string(terms.N);
                checks.push_back({"bound_recomputes", close(terms.rhs(), t.at("rhs").get<double>()), false, terms.rhs(),
                                  t.at("rhs").get<double>(), tag});
                checks.push_back({"lipschitz_matches", close(terms.lipschitz, gen.lipschitz_bound()), false,
                                  terms.lipschitz, gen.lipschitz_bound(), tag});
            }
        } else if (res.command == "probe-flowability") {
            const json& o = m.at("periodic_options");
            PeriodicOptions po;
            po.grid_n = o.at("grid_n").get<std::size_t>();
            po.k_max = o.at("k_max").get<std::size_t>();
            po.tol_close = o.at("tol_close").get<double>();
            po.tol_separate = o.at("tol_separate").get<double>();
            po.bisection_steps = o.at("bisection_steps").get<std::size_t>();
            bool same = true;
            for (const auto& r : m.at("periodic_records")) {
                const OrbitRecord again = classify_orbit(r.at("start").get<Vec>(),
                                                         r.at("iterates").get<std::vector<Vec>>(), po);
                same = same && to_string(again.kind) == r.at("kind").get<std::string>() &&
                       again.period == r.at("period").get<std::size_t>();
            }
            checks.push_back({"classification_recomputes", same, false, 0.0, 0.0, ""});
            if (remeasure) {
                const IncrementalGenerator gen = generator_from_json(m.at("generator"), dir);
                double worst = 0.0;
                for (const auto& r : m.at("periodic_records")) {
                    Vec x = r.at("start").get<Vec>();
                    const auto it = r.at("iterates").get<std::vector<Vec>>();
                    for (const auto& expected : it) {
                        x = generator_apply(gen, x);
                        worst = std::max(worst, dist_inf(x, expected));
                    }
                }
                checks.push_back({"iterates_reproduce", worst == 0.0, false, worst, 0.0, ""});
            }
        } else if (res.command == "bench") {
            checks.push_back({"nothing_to_verify", true, false, 0.0, 0.0, "bench runs carry no certificates"});
        } else {
            throw ConfigError(file.string() + ": unknown command '" + res.command + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(file.string() + ": malformed manifest: " + e.what());
    }
    return res;
}

} // namespace ifg::cli
