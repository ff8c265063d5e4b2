#include <cmath>

#include "ifg/probe.hpp"
#include "ifg/registry.hpp"
#include "internal.hpp"

namespace ifg::cli {

namespace {

json orbit_json(const OrbitRecord& o) {
    json j{{"start", o.start},   {"iterates", o.iterates}, {"kind", to_string(o.kind)},
           {"period", o.period}, {"refined", o.refined}};
    if (o.kind == OrbitRecord::Kind::contracting) {
        j["limit"] = o.limit;
        j["rate"] = o.rate;
    }
    return j;
}

double closure(const OrbitRecord& o) {
    return o.period == 0 || o.period > o.iterates.size() ? INFINITY : dist_inf(o.iterates[o.period - 1], o.start);
}

struct Line {
    Vec normal;
    double offset = 0.0;
    double tol = 1e-4;
    double distance(const Vec& x) const {
        double s = -offset;
        for (std::size_t i = 0; i < x.size(); ++i) s += normal[i] * x[i];
        return std::abs(s);
    }
};

} // namespace

Job parse_probe(const json& config, const std::filesystem::path& base) {
    Reader r(config, "config");
    const Integrator integrator = read_integrator(r, "integrator", {Method::rk4, 256});
    const GeneratorSpec spec = read_generator(r, "generator", integrator, base);
    const std::size_t d = spec.generator.dim();
    const std::uint64_t seed = r.seed("seed");

    Box region = Box::unit(d);
    if (r.has("region")) {
        Reader s = r.sub("region");
        region = {s.numbers("lo"), s.numbers("hi")};
        s.finish();
        if (region.lo.size() != d || region.hi.size() != d) throw ConfigError("config.region: dimension mismatch");
        for (std::size_t i = 0; i < d; ++i) {
            if (!(region.lo[i] < region.hi[i])) throw ConfigError("config.region: lo must be below hi");
        }
    }
    r.put("region", {{"lo", region.lo}, {"hi", region.hi}});

    PeriodicOptions po;
    po.grid_n = r.count("grid_n", po.grid_n);
    po.k_max = r.count("k_max", po.k_max);
    po.tol_close = r.number("tol_close", po.tol_close);
    po.tol_separate = r.number("tol_separate", po.tol_separate);
    po.bisection_steps = r.count("bisection_steps", po.bisection_steps);
    if (po.grid_n < 2 || po.k_max < 1) throw ConfigError("config: grid_n must be >= 2 and k_max >= 1");

    std::optional<Line> line;
    if (r.has("line")) {
        Reader s = r.sub("line");
        Line l{s.numbers("normal"), s.number("offset"), s.number("tol", 1e-4)};
        s.finish();
        if (l.normal.size() != d) throw ConfigError("config.line.normal: dimension mismatch");
        r.put("line", s.resolved());
        line = l;
    }

    double radius = 0.01, max_ratio = 0.9;
    std::size_t n_probes = 16, n_iters = 2;
    Vec normal(d, 0.0);
    normal[0] = 1.0;
    std::optional<Vec> center;
    {
        Reader s = r.has("contraction") ? r.sub("contraction") : Reader(json::object(), "config.contraction");
        radius = s.number("radius", radius);
        n_probes = s.count("probes", n_probes);
        n_iters = s.count("iters", n_iters);
        max_ratio = s.number("max_ratio", max_ratio);
        if (s.has("normal")) normal = s.numbers("normal");
        s.put("normal", normal);
        if (s.has("center")) center = s.numbers("center");
        s.finish();
        if (!(radius > 0.0) || n_probes == 0 || n_iters == 0) {
            throw ConfigError("config.contraction: radius, probes and iters must be positive");
        }
        if (normal.size() != d || (center && center->size() != d)) {
            throw ConfigError("config.contraction: dimension mismatch");
        }
        r.put("contraction", s.resolved());
    }

    bool fit_enabled = d == 2;
    FitOptions fo;
    double self_scale = 0.3, margin = 10.0;
    {
        Reader s = r.has("fit") ? r.sub("fit") : Reader(json::object(), "config.fit");
        fit_enabled = s.flag("enabled", fit_enabled);
        fo.budget = s.count("budget", fo.budget);
        fo.n_grid = s.count("n_grid", fo.n_grid);
        fo.eval_n = s.count("eval_n", fo.eval_n);
        fo.steps = s.count("steps", fo.steps);
        fo.initial_step = s.number("initial_step", fo.initial_step);
        self_scale = s.number("self_scale", self_scale);
        margin = s.number("margin", margin);
        s.finish();
        if (fit_enabled && d != 2) throw ConfigError("config.fit: the single-flow fit needs a 2-d generator");
        if (fo.budget == 0 || fo.n_grid < 2 || fo.eval_n < 2 || fo.steps == 0 || !(fo.initial_step > 0.0)) {
            throw ConfigError("config.fit: budget, n_grid, eval_n, steps and initial_step out of range");
        }
        r.put("fit", s.resolved());
    }
    fo.seed = seed;
    if (r.has("output")) r.text("output");
    r.finish();

    Job job{"probe-flowability", r.resolved(), {}};
    job.run = [=]() {
        const IncrementalGenerator gen = spec.generator;
        const PointMap F = [gen](std::span<const double> x) { return generator_apply(gen, x); };
        RunOutput out;
        const std::vector<OrbitRecord> recs = detect_periodic(F, region, po);

        std::string orbits = csv_row({"index", "refined", "kind", "period", "closure", "x0", "x1"});
        json periodic = json::array();
        const OrbitRecord* best = nullptr;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const OrbitRecord& o = recs[i];
            std::vector<std::string> row{std::to_string(i), o.refined ? "1" : "0", to_string(o.kind),
                                         std::to_string(o.period), num(closure(o))};
            for (std::size_t k = 0; k < std::min<std::size_t>(d, 2); ++k) row.push_back(num(o.start[k]));
            if (d == 1) row.push_back("");
            orbits += csv_row(row);
            if (o.kind != OrbitRecord::Kind::periodic) continue;
            periodic.push_back(orbit_json(o));
            if (line && line->distance(o.start) > line->tol) continue;
            if (!best || closure(o) < closure(*best)) best = &o;
        }
        out.extra_files.push_back({"orbits.csv", orbits});
        out.checks.push_back({"periodic_point_found", best != nullptr, false, best ? closure(*best) : INFINITY,
                              po.tol_close, line ? "restricted to the configured line" : ""});
        if (line) {
            out.checks.push_back({"periodic_point_on_line", best != nullptr, false,
                                  best ? line->distance(best->start) : INFINITY, line->tol, ""});
        }
        if (best) {
            const Vec& q = best->start;
            out.checks.push_back({"periodic_point_separated", dist_inf(best->iterates[0], q) >= po.tol_separate,
                                  false, dist_inf(best->iterates[0], q), po.tol_separate, "|F(q) - q|"});
        }

        json contraction = nullptr;
        std::optional<OrbitRecord> anchor;
        if (center) {
            std::vector<Vec> it;
            Vec x = *center;
            for (std::size_t k = 0; k < 2 * po.k_max; ++k) it.push_back(x = F(x));
            anchor = classify_orbit(*center, it, po);
        } else if (best) {
            anchor = *best;
        }
        if (anchor && (anchor->kind == OrbitRecord::Kind::periodic || anchor->kind == OrbitRecord::Kind::fixed)) {
            const ContractionReport rep = contraction_audit(F, *anchor, radius, n_probes, n_iters, normal);
            json probes = json::array();
            for (const auto& p : rep.probes) {
                probes.push_back({{"start", p.start},
                                  {"transverse_before", p.transverse_before},
                                  {"transverse_after", p.transverse_after},
                                  {"ratio_per_period", p.ratio_per_period}});
            }
            contraction = {{"center", anchor->start}, {"period", rep.period}, {"max_ratio", rep.max_ratio},
                           {"min_ratio", rep.min_ratio}, {"probes", probes}};
            out.checks.push_back({"contraction", rep.max_ratio <= max_ratio, false, rep.max_ratio, max_ratio,
                                  "max transverse ratio per period"});
        } else {
            out.checks.push_back({"contraction", false, false, INFINITY, max_ratio, "no periodic anchor point"});
        }

        json fit = nullptr;
        if (fit_enabled) {
            const FitResult cx = fit_single_flow(F, fo);
            const FlowMap self_flow{random_grid_field(fo.n_grid, self_scale, seed), Direction::forward,
                                    {Method::rk4, fo.steps}};
            const PointMap self_target = [self_flow](std::span<const double> x) { return flow_apply(self_flow, x); };
            const FitResult self = fit_single_flow(self_target, fo);
            auto fit_json = [](const FitResult& f) {
                return json{{"residual_sup", f.residual_sup}, {"evaluations", f.evaluations},
                            {"best_start", f.best_start},     {"seed", f.seed},
                            {"parameters", f.parameters}};
            };
            fit = {{"target", fit_json(cx)}, {"self_recovery", fit_json(self)}, {"self_scale", self_scale},
                   {"ratio", self.residual_sup > 0.0 ? cx.residual_sup / self.residual_sup : INFINITY}};
            out.checks.push_back({"fit_gap", cx.residual_sup >= margin * self.residual_sup, true, cx.residual_sup,
                                  margin * self.residual_sup, "target residual vs margin x self-recovery residual"});
        }

        out.metrics_csv = csv_row({"metric", "value"});
        out.metrics_csv += csv_row({"seed_records", std::to_string(recs.size())});
        out.metrics_csv += csv_row({"periodic_records", std::to_string(periodic.size())});
        if (best) {
            out.metrics_csv += csv_row({"best_closure", num(closure(*best))});
            out.metrics_csv += csv_row({"best_x0", num(best->start[0])});
            if (d > 1) out.metrics_csv += csv_row({"best_x1", num(best->start[1])});
        }
        if (!contraction.is_null()) out.metrics_csv += csv_row({"contraction_max_ratio", num(contraction["max_ratio"])});
        if (!fit.is_null()) {
            out.metrics_csv += csv_row({"fit_target_residual", num(fit["target"]["residual_sup"])});
            out.metrics_csv += csv_row({"fit_self_residual", num(fit["self_recovery"]["residual_sup"])});
        }
        out.manifest = {{"generator", generator_to_json(gen)},
                        {"periodic_options",
                         {{"grid_n", po.grid_n},
                          {"k_max", po.k_max},
                          {"tol_close", po.tol_close},
                          {"tol_separate", po.tol_separate},
                          {"bisection_steps", po.bisection_steps}}},
                        {"periodic_records", periodic},
                        {"best", best ? orbit_json(*best) : json(nullptr)},
                        {"contraction", contraction},
                        {"fit", fit}};
        return out;
    };
    return job;
}

} // namespace ifg::cli
