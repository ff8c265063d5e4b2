#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "ifg/transport.hpp"

namespace ifg {

void EmpiricalMeasure::validate() const {
    if (points.empty()) throw ParameterError("measure: no points");
    if (weights.size() != points.size()) throw DimensionError("measure: weights and points differ in length");
    const std::size_t d = points.front().size();
    if (d == 0) throw DimensionError("measure: zero-dimensional points");
    double total = 0.0;
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (points[k].size() != d) throw DimensionError("measure: ragged points");
        if (!all_finite(points[k])) throw NumericError("measure: non-finite point");
        if (!(weights[k] >= 0.0)) throw ParameterError("measure: negative weight");
        total += weights[k];
    }
    if (std::abs(total - 1.0) > 1e-12) throw ParameterError("measure: weights sum to " + format_double(total));
}

EmpiricalMeasure uniform_measure(std::vector<Vec> points) {
    const std::size_t n = points.size();
    EmpiricalMeasure m{std::move(points), Vec(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n))};
    m.validate();
    return m;
}

EmpiricalMeasure weighted_measure(std::vector<Vec> points, Vec weights) {
    EmpiricalMeasure m{std::move(points), std::move(weights)};
    m.validate();
    return m;
}

EmpiricalMeasure pushforward(const PointMap& map, const EmpiricalMeasure& mu) {
    mu.validate();
    EmpiricalMeasure out{apply_all(map, mu.points), mu.weights};
    out.validate();
    return out;
}

EmpiricalMeasure pushforward(const IncrementalGenerator& gen, const EmpiricalMeasure& mu) {
    if (mu.dim() != gen.dim()) throw DimensionError("pushforward: measure and generator dimensions differ");
    return pushforward([&](std::span<const double> x) { return generator_apply(gen, x); }, mu);
}

EmpiricalMeasure pushforward(const LiftedApproximator& approx, const EmpiricalMeasure& mu) {
    if (mu.dim() != approx.d) throw DimensionError("pushforward: measure and lift dimensions differ");
    return pushforward([&](std::span<const double> x) { return lifted_apply(approx, x); }, mu);
}

double BoundTerms::rhs() const {
    const double d = static_cast<double>(dim);
    return lipschitz * std::sqrt(d) * constant_C / std::pow(static_cast<double>(N), 1.0 / d) + delta + epsilon;
}

double BoundTerms::probability_lhs() const {
    const double d = static_cast<double>(dim);
    return 1.0 - 2.0 * std::exp(-2.0 * static_cast<double>(N) * delta * delta / (d * lipschitz * lipschitz));
}

nlohmann::json BoundTerms::to_json() const {
    return {{"lipschitz", lipschitz},   {"N", N},
            {"dim", dim},               {"delta", delta},
            {"epsilon", epsilon},       {"constant_C", constant_C},
            {"constant_verified", constant_verified},
            {"rhs", rhs()},             {"probability_lhs", probability_lhs()},
            {"vacuous", vacuous()}};
}

namespace {

/// Network simplex for the uncapacitated transportation problem on the
/// complete bipartite graph. Supply nodes 0..n-1, demand nodes n..n+m-1,
/// artificial root n+m. Tree arcs are stored on their child node.
class TransportSimplex {
public:
    TransportSimplex(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu)
        : mu_(mu), nu_(nu), n_(mu.size()), m_(nu.size()), nodes_(n_ + m_ + 1), root_(n_ + m_) {
        parent_.assign(nodes_, kNone);
        dir_.assign(nodes_, 0);
        flow_.assign(nodes_, 0.0);
        cost_.assign(nodes_, 0.0);
        depth_.assign(nodes_, 0);
        pi_.assign(nodes_, 0.0);
        first_child_.assign(nodes_, kNone);
        next_sib_.assign(nodes_, kNone);
        prev_sib_.assign(nodes_, kNone);

        double max_cost = 0.0;
        Vec lo = mu.points.front(), hi = mu.points.front();
        for (const auto* side : {&mu.points, &nu.points}) {
            for (const auto& p : *side) {
                for (std::size_t k = 0; k < p.size(); ++k) {
                    lo[k] = std::min(lo[k], p[k]);
                    hi[k] = std::max(hi[k], p[k]);
                }
            }
        }
        max_cost = dist_l2(lo, hi);
        art_cost_ = (max_cost + 1.0) * static_cast<double>(nodes_);

        for (std::size_t u = 0; u < root_; ++u) {
            const double supply = u < n_ ? mu.weights[u] : -nu.weights[u - n_];
            parent_[u] = root_;
            depth_[u] = 1;
            if (supply >= 0.0) {
                dir_[u] = kUp;
                flow_[u] = supply;
                cost_[u] = 0.0;
                pi_[u] = 0.0;
            } else {
                dir_[u] = kDown;
                flow_[u] = -supply;
                cost_[u] = art_cost_;
                pi_[u] = art_cost_;
            }
            attach(u, root_);
        }
        const std::size_t arcs = n_ * m_;
        block_ = std::max<std::size_t>(10, static_cast<std::size_t>(std::sqrt(static_cast<double>(arcs))));
    }

    std::size_t solve() {
        std::size_t pivots = 0;
        std::size_t i = 0, j = 0;
        double c = 0.0;
        while (find_entering(i, j, c)) {
            pivot(i, n_ + j, c);
            ++pivots;
        }
        return pivots;
    }

    std::vector<CouplingEntry> coupling() const {
        std::vector<CouplingEntry> out;
        for (std::size_t u = 0; u < root_; ++u) {
            const std::size_t p = parent_[u];
            if (p == root_ || flow_[u] <= 0.0) continue;
            // Real arcs always run supply -> demand.
            const std::size_t src = dir_[u] == kUp ? u : p;
            const std::size_t dst = dir_[u] == kUp ? p : u;
            out.push_back({src, dst - n_, flow_[u]});
        }
        std::sort(out.begin(), out.end(),
                  [](const CouplingEntry& a, const CouplingEntry& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
        return out;
    }

private:
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    static constexpr int kUp = 1;    // arc child -> parent
    static constexpr int kDown = -1; // arc parent -> child

    double arc_cost(std::size_t i, std::size_t j) const { return dist_l2(mu_.points[i], nu_.points[j]); }

    /// Block search over arcs (i, j); returns false when no reduced cost is below -eps.
    bool find_entering(std::size_t& bi, std::size_t& bj, double& bc) {
        const std::size_t arcs = n_ * m_;
        double best = -kEps;
        bool found = false;
        std::size_t scanned = 0;
        std::size_t in_block = 0;
        while (scanned < arcs) {
            const std::size_t i = next_arc_ / m_, j = next_arc_ % m_;
            // Cheap lower bound test first: cost >= 0, so rc >= pi_i - pi_j.
            const double base = pi_[i] - pi_[n_ + j];
            if (base < best) {
                const double c = arc_cost(i, j);
                const double rc = c + base;
                if (rc < best) {
                    best = rc;
                    bi = i;
                    bj = j;
                    bc = c;
                    found = true;
                }
            }
            next_arc_ = next_arc_ + 1 == arcs ? 0 : next_arc_ + 1;
            ++scanned;
            if (++in_block == block_) {
                if (found) return true;
                in_block = 0;
            }
        }
        return found;
    }

    void detach(std::size_t u) {
        const std::size_t p = parent_[u];
        if (prev_sib_[u] != kNone) {
            next_sib_[prev_sib_[u]] = next_sib_[u];
        } else {
            first_child_[p] = next_sib_[u];
        }
        if (next_sib_[u] != kNone) prev_sib_[next_sib_[u]] = prev_sib_[u];
        next_sib_[u] = prev_sib_[u] = kNone;
    }

    void attach(std::size_t u, std::size_t p) {
        prev_sib_[u] = kNone;
        next_sib_[u] = first_child_[p];
        if (first_child_[p] != kNone) prev_sib_[first_child_[p]] = u;
        first_child_[p] = u;
    }

    void pivot(std::size_t first, std::size_t second, double in_cost) {
        // Join node of the cycle closed by the entering arc first -> second.
        std::size_t a = first, b = second;
        while (a != b) {
            if (depth_[a] >= depth_[b]) {
                a = parent_[a];
            } else {
                b = parent_[b];
            }
        }
        const std::size_t join = a;

        // Leaving arc: bottleneck of the arcs whose flow decreases around the cycle.
        constexpr double inf = std::numeric_limits<double>::infinity();
        double delta = inf;
        std::size_t u_out = kNone;
        int side = 0;
        for (std::size_t u = first; u != join; u = parent_[u]) {
            const double d = dir_[u] == kUp ? flow_[u] : inf;
            if (d < delta) {
                delta = d;
                u_out = u;
                side = 1;
            }
        }
        for (std::size_t u = second; u != join; u = parent_[u]) {
            const double d = dir_[u] == kDown ? flow_[u] : inf;
            if (d <= delta) {
                delta = d;
                u_out = u;
                side = 2;
            }
        }
        if (u_out == kNone) throw NumericError("w1_exact: unbounded pivot");

        if (delta > 0.0) {
            for (std::size_t u = first; u != join; u = parent_[u]) flow_[u] -= dir_[u] * delta;
            for (std::size_t u = second; u != join; u = parent_[u]) flow_[u] += dir_[u] * delta;
        }
        const std::size_t u_in = side == 1 ? first : second;
        const std::size_t v_in = side == 1 ? second : first;

        // Reverse the stem u_in -> ... -> u_out and hang it below v_in.
        path_.clear();
        for (std::size_t u = u_in;; u = parent_[u]) {
            path_.push_back(u);
            if (u == u_out) break;
        }
        for (std::size_t u : path_) detach(u);
        for (std::size_t t = path_.size() - 1; t >= 1; --t) {
            const std::size_t w = path_[t], below = path_[t - 1];
            parent_[w] = below;
            dir_[w] = -dir_[below];
            flow_[w] = flow_[below];
            cost_[w] = cost_[below];
        }
        parent_[u_in] = v_in;
        dir_[u_in] = u_in == first ? kUp : kDown;
        flow_[u_in] = delta;
        cost_[u_in] = in_cost;
        for (std::size_t u : path_) attach(u, parent_[u]);

        // Potentials and depths of the re-hung subtree.
        const double sigma = pi_[v_in] - pi_[u_in] - dir_[u_in] * in_cost;
        stack_.clear();
        stack_.push_back(u_in);
        while (!stack_.empty()) {
            const std::size_t u = stack_.back();
            stack_.pop_back();
            pi_[u] += sigma;
            depth_[u] = depth_[parent_[u]] + 1;
            for (std::size_t c = first_child_[u]; c != kNone; c = next_sib_[c]) stack_.push_back(c);
        }
    }

    static constexpr double kEps = 1e-12;

    const EmpiricalMeasure& mu_;
    const EmpiricalMeasure& nu_;
    std::size_t n_, m_, nodes_, root_;
    double art_cost_ = 0.0;
    std::size_t block_ = 0;
    std::size_t next_arc_ = 0;
    std::vector<std::size_t> parent_;
    std::vector<int> dir_;
    Vec flow_, cost_;
    std::vector<std::size_t> depth_;
    Vec pi_;
    std::vector<std::size_t> first_child_, next_sib_, prev_sib_;
    std::vector<std::size_t> path_, stack_;
};

} // namespace

TransportReport w1_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    mu.validate();
    nu.validate();
    if (mu.dim() != nu.dim()) throw DimensionError("w1_exact: measures live in different dimensions");
    const double mass_mu = std::accumulate(mu.weights.begin(), mu.weights.end(), 0.0);
    const double mass_nu = std::accumulate(nu.weights.begin(), nu.weights.end(), 0.0);
    if (std::abs(mass_mu - mass_nu) > 1e-9) throw ParameterError("w1_exact: total masses differ");

    TransportSimplex solver(mu, nu);
    TransportReport r;
    r.pivots = solver.solve();
    r.coupling = solver.coupling();
    for (const auto& e : r.coupling) r.w1 += e.mass * dist_l2(mu.points[e.i], nu.points[e.j]);
    return r;
}

double coupling_marginal_error(const TransportReport& report, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    Vec row(mu.size(), 0.0), col(nu.size(), 0.0);
    for (const auto& e : report.coupling) {
        row[e.i] += e.mass;
        col[e.j] += e.mass;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) worst = std::max(worst, std::abs(row[i] - mu.weights[i]));
    for (std::size_t j = 0; j < col.size(); ++j) worst = std::max(worst, std::abs(col[j] - nu.weights[j]));
    return worst;
}

Sampler uniform_sampler(std::size_t dim) {
    return [dim](std::size_t count, Rng& rng) {
        std::vector<Vec> pts(count, Vec(dim));
        for (auto& p : pts) {
            for (auto& v : p) v = rng.uniform();
        }
        return pts;
    };
}

Sampler stratified_sampler(std::size_t dim) {
    return [dim](std::size_t count, Rng& rng) {
        std::size_t k = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(count), 1.0 / dim) + 1e-9));
        std::size_t cells = 1;
        for (std::size_t i = 0; i < dim; ++i) cells *= k;
        while (cells > count) {
            --k;
            cells = 1;
            for (std::size_t i = 0; i < dim; ++i) cells *= k;
        }
        std::vector<Vec> pts;
        pts.reserve(count);
        for (std::size_t c = 0; c < cells; ++c) {
            Vec p(dim);
            std::size_t rest = c;
            for (std::size_t i = dim; i-- > 0;) {
                p[i] = (static_cast<double>(rest % k) + rng.uniform()) / static_cast<double>(k);
                rest /= k;
            }
            pts.push_back(std::move(p));
        }
        while (pts.size() < count) {
            Vec p(dim);
            for (auto& v : p) v = rng.uniform();
            pts.push_back(std::move(p));
        }
        return pts;
    };
}

namespace {

double quantile(Vec v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace

ConcentrationResult concentration_experiment(const PointMap& gen, std::size_t dim, const Sampler& target,
                                             const Sampler& noise, const std::vector<std::size_t>& N_list,
                                             std::size_t trials, double delta, std::uint64_t seed,
                                             const ConcentrationOptions& options) {
    if (dim == 0) throw ParameterError("concentration: dimension must be positive");
    if (trials == 0) throw ParameterError("concentration: trials must be >= 1");
    if (N_list.empty()) throw ParameterError("concentration: empty N list");
    for (std::size_t k = 0; k < N_list.size(); ++k) {
        if (N_list[k] == 0) throw ParameterError("concentration: N must be positive");
        if (k > 0 && N_list[k] <= N_list[k - 1]) throw ParameterError("concentration: N list must increase");
    }
    if (!(delta >= 0.0)) throw ParameterError("concentration: delta must be >= 0");
    if (options.proxy_size == 0) throw ParameterError("concentration: proxy size must be positive");
    if (!(options.lipschitz > 0.0)) throw ParameterError("concentration: Lipschitz constant must be positive");

    Rng proxy_rng(mix_seed(seed, 0xA11CE));
    const EmpiricalMeasure proxy = uniform_measure(target(options.proxy_size, proxy_rng));
    if (proxy.dim() != dim) throw DimensionError("concentration: target sampler dimension");

    ConcentrationResult result;
    result.constant_verified = false;
    if (options.estimate_proxy_error) {
        Rng other_rng(mix_seed(seed, 0xB0B));
        result.proxy_error = w1_exact(proxy, uniform_measure(target(options.proxy_size, other_rng))).w1;
    }

    for (std::size_t N : N_list) {
        BoundTerms terms{options.lipschitz, N, dim, delta, options.epsilon, options.constant_C, false};
        Vec w(trials);
        parallel_for(trials, [&](std::size_t t) {
            Rng rng(mix_seed(seed, N, t + 1));
            const EmpiricalMeasure sample = uniform_measure(noise(N, rng));
            w[t] = w1_exact(proxy, pushforward(gen, sample)).w1;
        });
        ConcentrationSummary s{N, quantile(w, 0.5), 0.0, quantile(w, 0.9), terms.rhs(), terms.probability_lhs(),
                               terms.vacuous(), 0.0};
        std::size_t within = 0;
        for (std::size_t t = 0; t < trials; ++t) {
            result.rows.push_back({N, t, w[t], terms.rhs(), terms.probability_lhs()});
            s.mean += w[t] / static_cast<double>(trials);
            within += w[t] <= terms.rhs() ? 1 : 0;
        }
        s.fraction_within_bound = static_cast<double>(within) / static_cast<double>(trials);
        result.summary.push_back(s);
    }
    result.median_strictly_decreasing = true;
    for (std::size_t k = 1; k < result.summary.size(); ++k) {
        if (!(result.summary[k].median < result.summary[k - 1].median)) result.median_strictly_decreasing = false;
    }
    return result;
}

EmpiricalMeasure read_measure_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ParameterError("cannot open measure file " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw ParameterError("measure CSV: missing header");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cell.erase(0, cell.find_first_not_of(" \t\r"));
            cell.erase(cell.find_last_not_of(" \t\r") + 1);
            header.push_back(cell);
        }
    }
    const bool weighted = !header.empty() && header.back() == "weight";
    const std::size_t d = header.size() - (weighted ? 1 : 0);
    if (d == 0) throw ParameterError("measure CSV: no coordinate columns");
    std::vector<Vec> pts;
    Vec weights;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::stringstream ss(line);
        std::string cell;
        Vec row;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw ParameterError("measure CSV line " + std::to_string(line_no) + ": not a number");
            }
        }
        if (row.size() != header.size()) {
            throw ParameterError("measure CSV line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(header.size()) + " columns");
        }
        if (weighted) {
            weights.push_back(row.back());
            row.pop_back();
        }
        pts.push_back(std::move(row));
    }
    if (pts.empty()) throw ParameterError("measure CSV: no rows");
    if (!weighted) return uniform_measure(std::move(pts));
    return weighted_measure(std::move(pts), std::move(weights));
}

void write_measure_csv(const std::filesystem::path& path, const EmpiricalMeasure& mu) {
    mu.validate();
    std::ofstream os(path);
    if (!os) throw ParameterError("cannot open " + path.string() + " for writing");
    for (std::size_t k = 0; k < mu.dim(); ++k) os << 'x' << k << ',';
    os << "weight\n";
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (double v : mu.points[i]) os << format_double(v) << ',';
        os << format_double(mu.weights[i]) << '\n';
    }
}

} // namespace ifg
