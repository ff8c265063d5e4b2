#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "ifg/probe.hpp"

namespace ifg {

namespace {

const Vec kCenter{0.5, 0.5};
constexpr double kInner = 0.125;
constexpr double kOuter = 0.25;

std::vector<Vec> iterate(const PointMap& map, const Vec& start, std::size_t count) {
    std::vector<Vec> out;
    out.reserve(count);
    Vec cur = start;
    for (std::size_t i = 0; i < count; ++i) {
        cur = map(cur);
        out.push_back(cur);
    }
    return out;
}

std::size_t orbit_length(const PeriodicOptions& o) { return 4 * std::max<std::size_t>(o.k_max, 1); }

} // namespace

VectorField clipped_rotation_field() {
    return radial_bump_clip(rotation_field(kCenter, std::numbers::pi), kCenter, kInner, kOuter);
}

VectorField clipped_squeeze_field() { return radial_bump_clip(squeeze_field(0.5), kCenter, kInner, kOuter); }

IncrementalGenerator build_counterexample(Integrator integrator) {
    return IncrementalGenerator({FlowMap{clipped_squeeze_field(), Direction::forward, integrator},
                                 FlowMap{clipped_rotation_field(), Direction::forward, integrator}});
}

OrbitRecord classify_orbit(Vec start, std::vector<Vec> iterates, const PeriodicOptions& o) {
    OrbitRecord r;
    r.start = std::move(start);
    r.iterates = std::move(iterates);
    const auto& it = r.iterates;
    auto at = [&](std::size_t j) -> const Vec& { return j == 0 ? r.start : it[j - 1]; };
    if (it.empty()) return r;
    if (dist_inf(it[0], r.start) <= o.tol_close) {
        r.kind = OrbitRecord::Kind::fixed;
        r.period = 1;
        return r;
    }
    for (std::size_t k = 2; k <= std::min(o.k_max, it.size()); ++k) {
        if (dist_inf(at(k), r.start) > o.tol_close) continue;
        bool separated = true;
        for (std::size_t j = 1; j < k; ++j) separated = separated && dist_inf(at(j), r.start) >= o.tol_separate;
        if (separated) {
            r.kind = OrbitRecord::Kind::periodic;
            r.period = k;
            return r;
        }
    }
    for (std::size_t k = 1; k <= o.k_max; ++k) {
        const std::size_t periods = it.size() / k;
        if (periods < 3) break;
        Vec steps;
        for (std::size_t m = 0; m + 1 <= periods; ++m) steps.push_back(dist_inf(at((m + 1) * k), at(m * k)));
        bool decreasing = steps.front() > 0.0;
        for (std::size_t m = 1; m < steps.size(); ++m) decreasing = decreasing && steps[m] < steps[m - 1];
        if (!decreasing) continue;
        const double rate = std::pow(steps.back() / steps.front(), 1.0 / static_cast<double>(steps.size() - 1));
        if (rate < 1.0) {
            r.kind = OrbitRecord::Kind::contracting;
            r.period = k;
            r.limit = it.back();
            r.rate = rate;
            return r;
        }
    }
    return r;
}

std::vector<OrbitRecord> detect_periodic(const PointMap& map, const Box& region, const PeriodicOptions& o) {
    if (o.k_max == 0) throw ParameterError("detect_periodic: k_max must be >= 1");
    if (o.grid_n < 2) throw ParameterError("detect_periodic: grid_n must be >= 2");
    const std::size_t d = region.dim();
    const std::vector<Vec> seeds = grid_points(region, o.grid_n);
    const std::size_t len = orbit_length(o);

    std::vector<OrbitRecord> records(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t s) { records[s] = classify_orbit(seeds[s], iterate(map, seeds[s], len), o); });

    std::vector<std::size_t> stride(d, 1);
    for (std::size_t i = d - 1; i-- > 0;) stride[i] = stride[i + 1] * o.grid_n;

    struct Edge {
        std::size_t a, b, component, k;
    };
    std::vector<Edge> edges;
    for (std::size_t k = 2; k <= o.k_max; ++k) {
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            for (std::size_t axis = 0; axis < d; ++axis) {
                if ((s / stride[axis]) % o.grid_n + 1 >= o.grid_n) continue;
                const std::size_t t = s + stride[axis];
                for (std::size_t c = 0; c < d; ++c) {
                    const double da = records[s].iterates[k - 1][c] - seeds[s][c];
                    const double db = records[t].iterates[k - 1][c] - seeds[t][c];
                    if (da * db < 0.0) edges.push_back({s, t, c, k});
                }
            }
        }
    }

    std::vector<OrbitRecord> refined(edges.size());
    std::vector<char> keep(edges.size(), 0);
    parallel_for(edges.size(), [&](std::size_t e) {
        const Edge& edge = edges[e];
        const Vec& a = seeds[edge.a];
        const Vec& b = seeds[edge.b];
        auto point = [&](double t) {
            Vec x(d);
            for (std::size_t i = 0; i < d; ++i) x[i] = a[i] + t * (b[i] - a[i]);
            return x;
        };
        auto g = [&](double t) {
            const Vec x = point(t);
            const auto orbit = iterate(map, x, edge.k);
            return orbit.back()[edge.component] - x[edge.component];
        };
        double lo = 0.0, hi = 1.0;
        double glo = records[edge.a].iterates[edge.k - 1][edge.component] - a[edge.component];
        for (std::size_t step = 0; step < o.bisection_steps; ++step) {
            const double mid = 0.5 * (lo + hi);
            const double gm = g(mid);
            if (gm == 0.0) {
                lo = hi = mid;
                break;
            }
            if ((gm < 0.0) == (glo < 0.0)) {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        const Vec q = point(0.5 * (lo + hi));
        OrbitRecord r = classify_orbit(q, iterate(map, q, len), o);
        if (r.kind == OrbitRecord::Kind::periodic && r.period == edge.k) {
            r.refined = true;
            refined[e] = std::move(r);
            keep[e] = 1;
        }
    });
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!keep[e]) continue;
        const bool duplicate = std::any_of(records.begin() + static_cast<std::ptrdiff_t>(seeds.size()), records.end(),
                                           [&](const OrbitRecord& r) { return dist_inf(r.start, refined[e].start) <= 1e-9; });
        if (!duplicate) records.push_back(std::move(refined[e]));
    }
    return records;
}

ContractionReport contraction_audit(const PointMap& map, const OrbitRecord& center, double radius, std::size_t n_probes,
                                    std::size_t n_iters, Vec normal) {
    if (center.kind != OrbitRecord::Kind::periodic && center.kind != OrbitRecord::Kind::fixed) {
        throw ParameterError("contraction_audit: center orbit must be periodic");
    }
    if (!(radius > 0.0) || n_probes == 0 || n_iters == 0) throw ParameterError("contraction_audit: invalid probe setup");
    const Vec& q = center.start;
    const std::size_t d = q.size();
    if (normal.empty()) {
        normal.assign(d, 0.0);
        normal[0] = 1.0;
    }
    if (normal.size() != d) throw DimensionError("contraction_audit: normal dimension");
    const double nn = std::sqrt(std::inner_product(normal.begin(), normal.end(), normal.begin(), 0.0));
    if (nn == 0.0) throw ParameterError("contraction_audit: zero normal");
    for (double& v : normal) v /= nn;
    auto transverse = [&](const Vec& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) s += normal[i] * (x[i] - q[i]);
        return std::abs(s);
    };

    std::vector<Vec> starts;
    if (d == 2) {
        for (std::size_t i = 0; i < n_probes; ++i) {
            const double th = 2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n_probes);
            Vec x{q[0] + radius * std::cos(th), q[1] + radius * std::sin(th)};
            if (transverse(x) >= radius / 10.0) starts.push_back(std::move(x));
        }
    } else {
        for (double s : {1.0, -1.0}) {
            Vec x = q;
            for (std::size_t i = 0; i < d; ++i) x[i] += s * radius * normal[i];
            starts.push_back(std::move(x));
        }
    }

    ContractionReport rep;
    rep.period = center.period;
    rep.probes.resize(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
        const auto orbit = iterate(map, starts[i], center.period * n_iters);
        const double before = transverse(starts[i]);
        const double after = transverse(orbit.back());
        rep.probes[i] = {starts[i], before, after, std::pow(after / before, 1.0 / static_cast<double>(n_iters))};
    });
    rep.max_ratio = 0.0;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    for (const auto& p : rep.probes) {
        rep.max_ratio = std::max(rep.max_ratio, p.ratio_per_period);
        rep.min_ratio = std::min(rep.min_ratio, p.ratio_per_period);
    }
    return rep;
}

VectorField fit_candidate(const Vec& parameters, std::size_t n_grid) {
    if (n_grid < 2) throw ParameterError("fit: n_grid must be >= 2");
    const std::size_t inner = n_grid - 1;
    if (parameters.size() != 2 * inner * inner) throw DimensionError("fit: parameter count");
    Vec values(2 * (n_grid + 1) * (n_grid + 1), 0.0);
    for (std::size_t a = 0; a < inner; ++a) {
        for (std::size_t b = 0; b < inner; ++b) {
            const std::size_t v = (a + 1) * (n_grid + 1) + (b + 1);
            const std::size_t p = a * inner + b;
            values[2 * v] = parameters[2 * p];
            values[2 * v + 1] = parameters[2 * p + 1];
        }
    }
    return VectorField::from_grid(GridInterpolant({n_grid, n_grid}, std::move(values)));
}

namespace {

/// Per-point l_inf residuals of Flow(candidate) against the targets.
Vec residuals(const VectorField& candidate, const std::vector<Vec>& points, const std::vector<Vec>& targets,
              std::size_t steps) {
    const FlowMap flow{candidate, Direction::forward, {Method::rk4, steps}};
    Vec r(points.size());
    Vec out(candidate.dim());
    try {
        for (std::size_t i = 0; i < points.size(); ++i) {
            flow_apply_into(flow, points[i], out);
            r[i] = dist_inf(out, targets[i]);
        }
    } catch (const NumericError&) {
        std::fill(r.begin(), r.end(), std::numeric_limits<double>::infinity());
    }
    return r;
}

} // namespace

double fit_residual(const VectorField& candidate, const std::vector<Vec>& points, const std::vector<Vec>& targets,
                    std::size_t steps) {
    const Vec r = residuals(candidate, points, targets, steps);
    return r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
}

VectorField random_grid_field(std::size_t n_grid, double scale, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xF1E1D));
    Vec p(2 * (n_grid - 1) * (n_grid - 1));
    for (auto& v : p) v = rng.uniform(-scale, scale);
    return fit_candidate(p, n_grid);
}

FitResult fit_single_flow(const PointMap& target, const FitOptions& options) {
    if (options.budget == 0) throw ParameterError("fit: budget must be >= 1");
    if (options.eval_n < 2) throw ParameterError("fit: eval_n must be >= 2");
    const std::size_t n = options.n_grid;
    if (n < 2) throw ParameterError("fit: n_grid must be >= 2");
    const std::vector<Vec> points = grid_points(Box::unit(2), options.eval_n);
    const std::vector<Vec> targets = apply_all(target, points);

    // Objective 0: mean square (smooth surrogate); objective 1: sup residual.
    auto objective = [&](const Vec& p, int kind) {
        const Vec r = residuals(fit_candidate(p, n), points, targets, options.steps);
        if (kind == 1) return *std::max_element(r.begin(), r.end());
        double s = 0.0;
        for (double v : r) s += v * v;
        return s / static_cast<double>(r.size());
    };

    struct Run {
        Vec p;
        double f;
        std::size_t evals;
    };
    auto search = [&](Vec p, int kind, std::size_t budget, std::uint64_t stream) {
        Rng rng(mix_seed(options.seed, stream));
        double f = objective(p, kind);
        std::size_t evals = 1;
        double step = options.initial_step;
        const double floor = kind == 1 ? 1e-12 : 1e-24;
        std::vector<std::size_t> order(p.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        while (evals < budget && step > 1e-10 && f > floor) {
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
            bool improved = false;
            for (std::size_t idx : order) {
                for (double sign : {1.0, -1.0}) {
                    if (evals >= budget) break;
                    Vec q = p;
                    q[idx] += sign * step;
                    const double fq = objective(q, kind);
                    ++evals;
                    if (fq < f) {
                        p = std::move(q);
                        f = fq;
                        improved = true;
                        break;
                    }
                }
                if (evals >= budget) break;
            }
            if (!improved) step *= 0.5;
        }
        return Run{std::move(p), f, evals};
    };
    // Surrogate descent on most of the budget, then polishing on the sup residual.
    auto restart = [&](const Vec& start, std::size_t budget, std::uint64_t stream) {
        const double init = objective(start, 1);
        if (init <= 1e-12) return Run{start, init, 1};
        Run smooth = search(start, 0, std::max<std::size_t>(1, budget * 7 / 10), 2 * stream);
        Run sup = search(smooth.p, 1, std::max<std::size_t>(1, budget - smooth.evals - 1), 2 * stream + 1);
        sup.evals += smooth.evals + 1;
        return sup;
    };

    const std::size_t inner = n - 1;
    Vec zero(2 * inner * inner, 0.0);
    Vec logmap(zero.size());
    for (std::size_t a = 0; a < inner; ++a) {
        for (std::size_t b = 0; b < inner; ++b) {
            const Vec v{static_cast<double>(a + 1) / static_cast<double>(n), static_cast<double>(b + 1) / static_cast<double>(n)};
            const Vec img = target(v);
            logmap[2 * (a * inner + b)] = img[0] - v[0];
            logmap[2 * (a * inner + b) + 1] = img[1] - v[1];
        }
    }

    const std::size_t half = std::max<std::size_t>(1, options.budget / 2);
    Run first = restart(zero, half, 1);
    FitResult result;
    result.seed = options.seed;
    result.evaluations = first.evals;
    Run best = first;
    result.best_start = "zero";
    if (first.f > 1e-12 && options.budget > first.evals) {
        Run second = restart(logmap, options.budget - first.evals, 2);
        result.evaluations += second.evals;
        if (second.f < best.f) {
            best = std::move(second);
            result.best_start = "log_map";
        }
    }
    result.parameters = best.p;
    result.residual_sup = best.f;
    result.candidate = fit_candidate(best.p, n);
    return result;
}

std::string to_string(OrbitRecord::Kind kind) {
    switch (kind) {
    case OrbitRecord::Kind::fixed:
        return "fixed";
    case OrbitRecord::Kind::periodic:
        return "periodic";
    case OrbitRecord::Kind::contracting:
        return "contracting";
    case OrbitRecord::Kind::unclassified:
        break;
    }
    return "unclassified";
}

} // namespace ifg
