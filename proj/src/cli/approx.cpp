#include <cmath>

#include "ifg/lift.hpp"
#include "ifg/registry.hpp"
#include "internal.hpp"

namespace ifg::cli {

namespace {

Check bound_check(std::string name, double measured, double bound, std::string detail = {}) {
    return {std::move(name), measured <= bound, false, measured, bound, std::move(detail)};
}

Check recompute_check(const ErrorCertificate& cert) {
    const double again = cert.recompute();
    return {"certificate_recomputes", std::abs(again - cert.total_bound) <= 1e-12 * std::max(1.0, cert.total_bound),
            false, again, cert.total_bound, ""};
}

std::string coord_header(std::size_t d) {
    std::string s;
    for (std::size_t i = 0; i < d; ++i) s += "x" + std::to_string(i) + ",";
    return s;
}

} // namespace

double flow_error_sup(const IncrementalGenerator& target, const IncrementalGenerator& approx,
                      const std::vector<Vec>& points, Vec* per_point) {
    Vec err(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        err[i] = dist_inf(generator_apply(target, points[i]), generator_apply(approx, points[i]));
    });
    double sup = 0.0;
    for (double e : err) {
        if (!std::isfinite(e)) throw NumericError("flow error is not finite");
        sup = std::max(sup, e);
    }
    if (per_point) *per_point = std::move(err);
    return sup;
}

Job parse_approx_flow(const json& config, const std::filesystem::path& base) {
    Reader r(config, "config");
    std::vector<VectorField> fields;
    std::vector<Modulus> moduli;
    json stages = json::array();
    {
        const json& list = r.raw("stages");
        if (!list.is_array() || list.empty()) throw ConfigError("config.stages: expected a nonempty array");
        for (std::size_t t = 0; t < list.size(); ++t) {
            Reader s(list[t], "config.stages[" + std::to_string(t) + "]");
            VectorField f = field_from_spec(s.raw("field"), base);
            if (!fields.empty() && f.dim() != fields.front().dim()) {
                throw ConfigError(s.where() + ": stage dimension differs from stage 0");
            }
            const auto& sup = f.support();
            if (!sup || !Box::unit(f.dim()).contains(*sup)) {
                throw ConfigError(s.where() + ": field must be supported in the unit cube");
            }
            Modulus m = s.has("modulus") ? Modulus::from_json(s.raw("modulus"))
                                         : Modulus::lipschitz(f.dim(), f.lipschitz_bound());
            if (m.dim() != f.dim()) throw ConfigError(s.where() + ".modulus: dimension mismatch");
            s.put("modulus", m.to_json());
            s.finish();
            stages.push_back(s.resolved());
            fields.push_back(std::move(f));
            moduli.push_back(std::move(m));
        }
        r.put("stages", stages);
    }
    const std::size_t n = r.count("n");
    if (n == 0) throw ConfigError("config.n: must be positive");
    const Integrator integrator = read_integrator(r, "integrator", {Method::rk4, 256});
    const Integrator reference = read_integrator(r, "reference", {Method::rk4, 4096});
    const std::size_t eval_grid = r.count("eval_grid", 33);
    if (eval_grid < 2) throw ConfigError("config.eval_grid: need at least 2 points per axis");
    if (r.has("output")) r.text("output");
    r.finish();

    Job job{"approx-flow", r.resolved(), {}};
    job.run = [=]() {
        const std::size_t d = fields.front().dim();
        std::vector<FlowMap> exact, approx;
        std::vector<StageCertificate> per_stage;
        RunOutput out;
        out.metrics_csv = csv_row({"stage", "n", "delta", "omega_inf", "lipschitz_target", "lipschitz_approx",
                                   "field_error", "width", "depth", "nonzeros"});
        json stage_info = json::array();
        double lip_sum = 0.0;
        for (std::size_t t = 0; t < fields.size(); ++t) {
            FlowApproximation a = approximate_flowable(fields[t], moduli[t], n, integrator);
            const double omega = norm_inf(a.certificate.per_stage[0].omega);
            const double field_err = norm_inf(a.measured_field_error);
            out.metrics_csv += csv_row({std::to_string(t), std::to_string(n), num(a.delta), num(omega),
                                        num(fields[t].lipschitz_bound()), num(a.flow.field.lipschitz_bound()),
                                        num(field_err), std::to_string(a.size.width), std::to_string(a.size.depth),
                                        std::to_string(a.size.nonzeros)});
            stage_info.push_back({{"delta", a.delta},
                                  {"measured_field_error", a.measured_field_error},
                                  {"size", a.size.to_json()}});
            out.checks.push_back(bound_check("field_error_within_modulus", field_err, omega,
                                             "stage " + std::to_string(t)));
            per_stage.push_back(a.certificate.per_stage[0]);
            lip_sum += a.flow.field.lipschitz_bound();
            approx.push_back(a.flow);
            exact.push_back({fields[t], Direction::forward, reference});
        }
        ErrorCertificate cert = make_certificate(per_stage, n, d);
        cert.lipschitz_certificate = std::exp(lip_sum);
        const IncrementalGenerator target(exact), approximant(approx);
        const auto points = grid_points(Box::unit(d), eval_grid);
        Vec per_point;
        const double measured = flow_error_sup(target, approximant, points, &per_point);
        out.checks.push_back(bound_check("certificate_dominates", measured, cert.total_bound));
        out.checks.push_back(recompute_check(cert));

        std::string errors = coord_header(d) + "error\n";
        for (std::size_t i = 0; i < points.size(); ++i) {
            std::vector<std::string> row;
            for (double v : points[i]) row.push_back(num(v));
            row.push_back(num(per_point[i]));
            errors += csv_row(row);
        }
        out.extra_files.push_back({"flow_error.csv", errors});
        out.manifest = {{"target", generator_to_json(target)},
                        {"approximant", generator_to_json(approximant)},
                        {"certificate", cert.to_json()},
                        {"measured_flow_error", measured},
                        {"eval_grid", eval_grid},
                        {"stages", stage_info}};
        return out;
    };
    return job;
}

Job parse_lift_approx(const json& config, const std::filesystem::path&) {
    Reader r(config, "config");
    std::vector<ScalarFunction> functions;
    {
        const json& list = r.raw("functions");
        if (!list.is_array() || list.empty()) throw ConfigError("config.functions: expected a nonempty array");
        for (const auto& f : list) {
            functions.push_back(scalar_function_from_ref(f));
            if (functions.back().dim != functions.front().dim) {
                throw ConfigError("config.functions: input dimensions differ");
            }
        }
    }
    const std::vector<std::size_t> n_list = r.counts("n", {8, 16});
    for (auto n : n_list) {
        if (n == 0) throw ConfigError("config.n: entries must be positive");
    }
    const bool joint = r.flag("joint", false);
    const bool collapse_y = r.flag("collapse_y", false);
    const Integrator integrator = read_integrator(r, "integrator", {Method::euler, 1});
    const std::size_t d = functions.front().dim;
    const std::size_t eval_n = r.count("eval_points", d == 1 ? 1001 : 21);
    if (eval_n < 2) throw ConfigError("config.eval_points: need at least 2 points per axis");
    if (r.has("output")) r.text("output");
    r.finish();

    Job job{"lift-approx", r.resolved(), {}};
    job.run = [=]() {
        RunOutput out;
        const std::size_t D = functions.size();
        const auto points = grid_points(Box::unit(d), eval_n);
        std::vector<Vec> truth(points.size(), Vec(D));
        for (std::size_t k = 0; k < points.size(); ++k) {
            for (std::size_t i = 0; i < D; ++i) truth[k][i] = functions[i](points[k]);
        }
        const LiftedApproximator exact = exact_lift(functions);
        double exact_err = 0.0;
        for (std::size_t k = 0; k < points.size(); ++k) {
            exact_err = std::max(exact_err, dist_inf(lifted_apply(exact, points[k]), truth[k]));
        }
        out.checks.push_back(bound_check("exact_lift_reproduces", exact_err, 1e-12));

        out.metrics_csv = csv_row({"n", "component", "measured_error", "modulus_bound", "certificate_bound",
                                   "field_error", "width", "depth", "nonzeros"});
        json runs = json::array();
        Vec previous;
        std::size_t previous_n = 0;
        for (std::size_t n : n_list) {
            const LiftApproximation la = approximate_lipschitz_function(functions, n, {collapse_y, joint, integrator});
            std::vector<Vec> got(points.size());
            parallel_for(points.size(), [&](std::size_t k) { got[k] = lifted_apply(la.approx, points[k]); });
            Vec err(D, 0.0);
            for (std::size_t k = 0; k < points.size(); ++k) {
                for (std::size_t i = 0; i < D; ++i) {
                    const double e = std::abs(got[k][i] - truth[k][i]);
                    if (!std::isfinite(e)) throw NumericError("lifted output is not finite");
                    err[i] = std::max(err[i], e);
                }
            }
            json comps = json::array();
            for (const auto& c : la.approx.components) comps.push_back(flow_to_json(c));
            for (std::size_t i = 0; i < D; ++i) {
                const std::size_t stage = joint ? 0 : i;
                const double modulus_bound = norm_inf(la.certificate.per_stage[stage].omega);
                const SizeReport& sz = la.sizes[stage];
                out.metrics_csv += csv_row({std::to_string(n), std::to_string(i), num(err[i]), num(modulus_bound),
                                            num(la.certificate.total_bound),
                                            num(la.measured_field_error[stage]), std::to_string(sz.width),
                                            std::to_string(sz.depth), std::to_string(sz.nonzeros)});
                const std::string tag = "n=" + std::to_string(n) + " component " + std::to_string(i);
                out.checks.push_back(bound_check("error_within_modulus", err[i], modulus_bound, tag));
                out.checks.push_back(bound_check("certificate_dominates", err[i], la.certificate.total_bound, tag));
                if (!previous.empty() && n == 2 * previous_n) {
                    Check rate = bound_check("error_rate", err[i], previous[i] * 0.5 + 1e-12, tag + " vs previous n");
                    rate.warning_only = true;
                    out.checks.push_back(rate);
                }
            }
            out.checks.push_back(recompute_check(la.certificate));
            runs.push_back({{"n", n},
                            {"approximator", {{"d", d}, {"D", D}, {"joint", joint}, {"components", comps}}},
                            {"certificate", la.certificate.to_json()},
                            {"measured_error", err}});
            previous = err;
            previous_n = n;
        }
        json refs = json::array();
        for (const auto& f : functions) refs.push_back(f.ref);
        out.manifest = {{"functions", refs}, {"exact_lift_error", exact_err}, {"eval_points", eval_n}, {"runs", runs}};
        return out;
    };
    return job;
}

} // namespace ifg::cli
