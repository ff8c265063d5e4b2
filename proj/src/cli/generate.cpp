#include <cmath>
#include <sstream>

#include "ifg/registry.hpp"
#include "ifg/transport.hpp"
#include "internal.hpp"

namespace ifg::cli {

namespace {

std::string measure_csv(const EmpiricalMeasure& mu) {
    std::vector<std::string> head;
    for (std::size_t i = 0; i < mu.dim(); ++i) head.push_back("x" + std::to_string(i));
    head.push_back("weight");
    std::string s = csv_row(head);
    for (std::size_t k = 0; k < mu.size(); ++k) {
        std::vector<std::string> row;
        for (double v : mu.points[k]) row.push_back(num(v));
        row.push_back(num(mu.weights[k]));
        s += csv_row(row);
    }
    return s;
}

} // namespace

Job parse_generate(const json& config, const std::filesystem::path& base) {
    Reader r(config, "config");
    const Integrator integrator = read_integrator(r, "integrator", {Method::rk4, 256});
    const GeneratorSpec spec = read_generator(r, "generator", integrator, base);
    const std::uint64_t seed = r.seed("seed");
    const std::vector<std::size_t> N_list = r.counts("N_list", {16, 64, 256});
    const std::size_t trials = r.count("trials", 32);
    const double delta = r.number("delta", 0.2);
    ConcentrationOptions opt;
    opt.proxy_size = r.count("proxy_size", 4096);
    opt.constant_C = r.number("C", 1.0);
    opt.lipschitz = spec.generator.lipschitz_bound();
    opt.epsilon = spec.epsilon;
    const std::string noise_kind = r.text("noise", "uniform");
    if (noise_kind != "uniform" && noise_kind != "stratified") {
        throw ConfigError("config.noise: expected 'uniform' or 'stratified'");
    }
    std::optional<EmpiricalMeasure> input;
    if (r.has("input")) {
        std::filesystem::path p = r.text("input");
        if (p.is_relative()) p = base / p;
        try {
            input = read_measure_csv(p);
        } catch (const ParameterError& e) {
            throw ConfigError(std::string("config.input: ") + e.what());
        }
        if (input->dim() != spec.generator.dim()) throw ConfigError("config.input: dimension mismatch");
    }
    if (trials == 0) throw ConfigError("config.trials: must be positive");
    if (opt.proxy_size == 0) throw ConfigError("config.proxy_size: must be positive");
    if (!(delta >= 0.0)) throw ConfigError("config.delta: must be nonnegative");
    if (!(opt.constant_C > 0.0)) throw ConfigError("config.C: must be positive");
    for (std::size_t k = 0; k < N_list.size(); ++k) {
        if (N_list[k] == 0 || (k > 0 && N_list[k] <= N_list[k - 1])) {
            throw ConfigError("config.N_list: must be positive and strictly increasing");
        }
    }
    if (r.has("output")) r.text("output");
    r.finish();

    Job job{"generate", r.resolved(), {}};
    job.run = [=]() {
        const std::size_t d = spec.generator.dim();
        const IncrementalGenerator gen = spec.generator, target = spec.target;
        const PointMap gen_map = [gen](std::span<const double> x) { return generator_apply(gen, x); };
        const PointMap target_map = [target](std::span<const double> x) { return generator_apply(target, x); };
        const Sampler noise = noise_kind == "uniform" ? uniform_sampler(d) : stratified_sampler(d);
        const Sampler proxy = [d, target_map](std::size_t count, Rng& rng) {
            return apply_all(target_map, stratified_sampler(d)(count, rng));
        };
        const ConcentrationResult res = concentration_experiment(gen_map, d, proxy, noise, N_list, trials, delta, seed, opt);

        RunOutput out;
        out.metrics_csv = csv_row({"N", "median", "mean", "q90", "bound_rhs", "prob_lhs", "vacuous",
                                   "fraction_within_bound"});
        json summary = json::array();
        for (const auto& s : res.summary) {
            out.metrics_csv += csv_row({std::to_string(s.N), num(s.median), num(s.mean), num(s.q90), num(s.bound_rhs),
                                        num(s.prob_lhs), s.vacuous ? "1" : "0", num(s.fraction_within_bound)});
            const BoundTerms terms{opt.lipschitz, s.N, d, delta, opt.epsilon, opt.constant_C, false};
            summary.push_back({{"N", s.N},
                               {"median", s.median},
                               {"mean", s.mean},
                               {"q90", s.q90},
                               {"fraction_within_bound", s.fraction_within_bound},
                               {"terms", terms.to_json()}});
        }
        std::string rows = csv_row({"N", "trial", "w1", "bound_rhs", "prob_lhs"});
        for (const auto& row : res.rows) {
            rows += csv_row({std::to_string(row.N), std::to_string(row.trial), num(row.w1), num(row.bound_rhs),
                             num(row.prob_lhs)});
        }
        out.extra_files.push_back({"concentration.csv", rows});

        Rng sample_rng(mix_seed(seed, 0x5A3D1E));
        const EmpiricalMeasure samples = pushforward(gen, uniform_measure(noise(N_list.back(), sample_rng)));
        out.extra_files.push_back({"samples.csv", measure_csv(samples)});
        if (input) out.extra_files.push_back({"pushforward.csv", measure_csv(pushforward(gen, *input))});

        out.checks.push_back({"median_strictly_decreasing", res.median_strictly_decreasing, false,
                              res.summary.back().median, res.summary.front().median,
                              "median W1 across the N list"});
        const bool finite = std::all_of(samples.points.begin(), samples.points.end(),
                                        [](const Vec& p) { return all_finite(p); });
        out.checks.push_back({"samples_finite", finite, false, 0.0, 0.0, ""});
        out.manifest = {{"generator", generator_to_json(gen)},
                        {"target", generator_to_json(target)},
                        {"generator_source", spec.source},
                        {"proxy_error", res.proxy_error},
                        {"constant_verified", res.constant_verified},
                        {"constant_note", "C is user-set and not verified"},
                        {"summary", summary}};
        return out;
    };
    return job;
}

} // namespace ifg::cli
