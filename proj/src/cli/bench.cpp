#include <algorithm>
#include <chrono>
#include <cmath>

#include "ifg/registry.hpp"
#include "ifg/transport.hpp"
#include "internal.hpp"

namespace ifg::cli {

namespace {

template <class F>
Vec time_repeats(std::size_t repeats, F&& body) {
    Vec t;
    for (std::size_t k = 0; k < repeats; ++k) {
        const auto start = std::chrono::steady_clock::now();
        body();
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    std::sort(t.begin(), t.end());
    return t;
}

} // namespace

Job parse_bench(const json& config, const std::filesystem::path&) {
    Reader r(config, "config");
    const std::uint64_t seed = r.seed("seed");
    const std::size_t repeats = r.count("repeats", 3);
    const std::vector<std::size_t> grid_n = r.counts("grid_n", {4, 8, 16});
    const std::vector<std::size_t> w1_sizes = r.counts("w1_sizes", {256, 1024});
    const std::size_t flow_points = r.count("flow_points", 256);
    if (repeats == 0 || flow_points == 0) throw ConfigError("config: repeats and flow_points must be positive");
    for (auto n : grid_n) {
        if (n == 0) throw ConfigError("config.grid_n: entries must be positive");
    }
    for (auto n : w1_sizes) {
        if (n == 0) throw ConfigError("config.w1_sizes: entries must be positive");
    }
    if (r.has("output")) r.text("output");
    r.finish();

    Job job{"bench", r.resolved(), {}};
    job.run = [=]() {
        RunOutput out;
        out.metrics_csv = csv_row({"benchmark", "size", "repeats", "best_seconds", "median_seconds", "per_item_seconds",
                                   "items"});
        json results = json::array();
        bool finite = true;
        auto record = [&](const std::string& name, std::size_t size, std::size_t items, const Vec& t) {
            const double med = t[t.size() / 2];
            out.metrics_csv += csv_row({name, std::to_string(size), std::to_string(t.size()), num(t.front()), num(med),
                                        num(t.front() / static_cast<double>(items)), std::to_string(items)});
            results.push_back({{"benchmark", name}, {"size", size}, {"items", items}});
            finite = finite && std::all_of(t.begin(), t.end(), [](double v) { return std::isfinite(v); });
        };

        Rng rng(mix_seed(seed, 0xBE7C));
        const auto points = uniform_sampler(2)(flow_points, rng);
        const VectorField v = builtin_field("sin_bump");
        for (std::size_t n : grid_n) {
            std::optional<FlowApproximation> a;
            record("approximate_flowable", n, 1,
                   time_repeats(repeats, [&] { a = approximate_flowable(v, Modulus::lipschitz(2, v.lipschitz_bound()), n); }));
            const MLP& net = *a->flow.field.mlp();
            double sink = 0.0;
            record("mlp_eval", n, points.size(), time_repeats(repeats, [&] {
                       for (const auto& p : points) sink += net.eval(p)[0];
                   }));
            record("flow_apply_rk4_256", n, points.size(), time_repeats(repeats, [&] {
                       for (const auto& p : points) sink += flow_apply(a->flow, p)[0];
                   }));
            finite = finite && std::isfinite(sink);
        }
        for (std::size_t m : w1_sizes) {
            const EmpiricalMeasure mu = uniform_measure(uniform_sampler(2)(m, rng));
            const EmpiricalMeasure nu = uniform_measure(uniform_sampler(2)(m, rng));
            double w = 0.0;
            record("w1_exact", m, 1, time_repeats(repeats, [&] { w = w1_exact(mu, nu).w1; }));
            finite = finite && std::isfinite(w);
        }
        out.checks.push_back({"results_finite", finite, false, 0.0, 0.0, ""});
        out.manifest = {{"benchmarks", results},
                        {"threads", std::max(1u, std::thread::hardware_concurrency())},
                        {"note", "timings are in metrics.csv and are not reproducible bit for bit"}};
        return out;
    };
    return job;
}

} // namespace ifg::cli
