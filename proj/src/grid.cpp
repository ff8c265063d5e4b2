#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "ifg/fields.hpp"

namespace ifg {

namespace {

constexpr std::size_t kMaxGridDim = 12;

void put_u64(std::ostream& os, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    os.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char bytes[8];
    is.read(reinterpret_cast<char*>(bytes), 8);
    if (!is) throw ParameterError("grid binary: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

std::filesystem::path sidecar_path(const std::filesystem::path& p) {
    auto s = p;
    s.replace_extension(".json");
    return s;
}

} // namespace

GridInterpolant::GridInterpolant(std::vector<std::size_t> counts, Vec values)
    : counts_(std::move(counts)), values_(std::move(values)) {
    if (counts_.empty()) throw ParameterError("GridInterpolant: dimension must be positive");
    if (counts_.size() > kMaxGridDim) throw ParameterError("GridInterpolant: dimension too large");
    for (auto c : counts_) {
        if (c == 0) throw ParameterError("GridInterpolant: subdivision count must be positive");
    }
    const std::size_t d = counts_.size();
    strides_.assign(d, 1);
    for (std::size_t i = d - 1; i-- > 0;) strides_[i] = strides_[i + 1] * (counts_[i + 1] + 1);
    vertex_count_ = strides_[0] * (counts_[0] + 1);
    if (values_.size() != vertex_count_ * d) {
        throw DimensionError("GridInterpolant: expected " + std::to_string(vertex_count_ * d) + " values, got " +
                             std::to_string(values_.size()));
    }
    if (!all_finite(values_)) throw NumericError("GridInterpolant: non-finite vertex value");
}

GridInterpolant GridInterpolant::sample(const Sampler& f, std::vector<std::size_t> counts) {
    const std::size_t d = counts.size();
    std::size_t total = 1;
    for (auto c : counts) total *= (c + 1);
    Vec values(total * d);
    // Placeholder object only to reuse vertex_point().
    GridInterpolant shape(counts, Vec(total * d, 0.0));
    parallel_for(total, [&](std::size_t k) {
        const Vec p = shape.vertex_point(k);
        f(p, std::span<double>(values.data() + k * d, d));
    });
    return GridInterpolant(std::move(counts), std::move(values));
}

bool GridInterpolant::isotropic() const {
    return std::all_of(counts_.begin(), counts_.end(), [&](std::size_t c) { return c == counts_.front(); });
}

std::size_t GridInterpolant::n() const { return *std::max_element(counts_.begin(), counts_.end()); }

Vec GridInterpolant::vertex_point(std::size_t flat) const {
    Vec p(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        const std::size_t idx = (flat / strides_[i]) % (counts_[i] + 1);
        p[i] = static_cast<double>(idx) / static_cast<double>(counts_[i]);
    }
    return p;
}

std::size_t GridInterpolant::flat_index(std::span<const std::ptrdiff_t> idx) const {
    std::size_t f = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) f += static_cast<std::size_t>(idx[i]) * strides_[i];
    return f;
}

void GridInterpolant::eval(std::span<const double> x, std::span<double> out) const {
    const std::size_t d = dim();
    if (x.size() != d || out.size() != d) throw DimensionError("GridInterpolant::eval: dimension mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    std::array<std::ptrdiff_t, kMaxGridDim> idx{};
    std::array<double, kMaxGridDim> frac{};
    std::array<std::size_t, kMaxGridDim> order{};
    for (std::size_t i = 0; i < d; ++i) {
        const double u = static_cast<double>(counts_[i]) * x[i];
        const double c = std::floor(u);
        if (!(c >= -1.0 && c <= static_cast<double>(counts_[i]))) return;
        idx[i] = static_cast<std::ptrdiff_t>(c);
        frac[i] = u - c;
        order[i] = i;
    }
    // Stable insertion sort: descending fraction, ties by axis index.
    for (std::size_t i = 1; i < d; ++i) {
        const std::size_t key = order[i];
        std::size_t j = i;
        while (j > 0 && frac[order[j - 1]] < frac[key]) {
            order[j] = order[j - 1];
            --j;
        }
        order[j] = key;
    }
    auto accumulate = [&](double weight) {
        if (weight == 0.0) return;
        for (std::size_t i = 0; i < d; ++i) {
            if (idx[i] < 0 || idx[i] > static_cast<std::ptrdiff_t>(counts_[i])) return;
        }
        const double* v = values_.data() + flat_index(std::span<const std::ptrdiff_t>(idx.data(), d)) * d;
        for (std::size_t j = 0; j < d; ++j) out[j] += weight * v[j];
    };
    accumulate(1.0 - frac[order[0]]);
    for (std::size_t k = 0; k < d; ++k) {
        idx[order[k]] += 1;
        accumulate(k + 1 < d ? frac[order[k]] - frac[order[k + 1]] : frac[order[k]]);
    }
}

Vec GridInterpolant::operator()(std::span<const double> x) const {
    Vec out(dim());
    eval(x, out);
    return out;
}

double GridInterpolant::lipschitz_linf() const {
    const std::size_t d = dim();
    std::vector<std::ptrdiff_t> base(d, -1);
    std::vector<std::ptrdiff_t> v(d);
    std::vector<std::size_t> perm(d);
    Vec prev(d), cur(d), grad(d * d);
    const Vec zeros(d, 0.0);
    auto value = [&](const std::vector<std::ptrdiff_t>& at) -> const double* {
        for (std::size_t i = 0; i < d; ++i) {
            if (at[i] < 0 || at[i] > static_cast<std::ptrdiff_t>(counts_[i])) return zeros.data();
        }
        return values_.data() + flat_index(at) * d;
    };
    double best = 0.0;
    while (true) {
        bool any_nonzero = false;
        for (std::size_t corner = 0; corner < (std::size_t{1} << d) && !any_nonzero; ++corner) {
            for (std::size_t i = 0; i < d; ++i) v[i] = base[i] + static_cast<std::ptrdiff_t>((corner >> i) & 1U);
            const double* p = value(v);
            for (std::size_t j = 0; j < d; ++j) any_nonzero = any_nonzero || p[j] != 0.0;
        }
        if (any_nonzero) {
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            do {
                v = base;
                const double* p = value(v);
                std::copy(p, p + d, prev.begin());
                for (std::size_t k = 0; k < d; ++k) {
                    const std::size_t axis = perm[k];
                    v[axis] += 1;
                    const double* c = value(v);
                    for (std::size_t j = 0; j < d; ++j) {
                        grad[axis * d + j] = static_cast<double>(counts_[axis]) * (c[j] - prev[j]);
                        prev[j] = c[j];
                    }
                }
                for (std::size_t j = 0; j < d; ++j) {
                    double s = 0.0;
                    for (std::size_t axis = 0; axis < d; ++axis) s += std::abs(grad[axis * d + j]);
                    best = std::max(best, s);
                }
            } while (std::next_permutation(perm.begin(), perm.end()));
        }
        std::size_t i = d;
        while (i-- > 0) {
            if (++base[i] <= static_cast<std::ptrdiff_t>(counts_[i])) break;
            base[i] = -1;
        }
        if (i == static_cast<std::size_t>(-1)) break;
    }
    return best;
}

bool GridInterpolant::boundary_is_zero() const {
    const std::size_t d = dim();
    for (std::size_t k = 0; k < vertex_count_; ++k) {
        bool on_boundary = false;
        for (std::size_t i = 0; i < d; ++i) {
            const std::size_t idx = (k / strides_[i]) % (counts_[i] + 1);
            on_boundary = on_boundary || idx == 0 || idx == counts_[i];
        }
        if (!on_boundary) continue;
        for (std::size_t j = 0; j < d; ++j) {
            if (values_[k * d + j] != 0.0) return false;
        }
    }
    return true;
}

Box GridInterpolant::support() const {
    if (boundary_is_zero()) return Box::unit(dim());
    Box b = Box::unit(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        const double h = 1.0 / static_cast<double>(counts_[i]);
        b.lo[i] = -h;
        b.hi[i] = 1.0 + h;
    }
    return b;
}

double GridInterpolant::max_abs_value() const { return norm_inf(values_); }

MLP GridInterpolant::to_mlp() const {
    const std::size_t d = dim();
    const std::size_t nv = vertex_count_;

    // Linear combination of the previous layer's (post-activation) units.
    using Expr = std::vector<std::pair<std::size_t, double>>;

    std::vector<Layer::Entry> entries;
    Vec bias(2 * d * nv);
    std::vector<std::vector<Expr>> plus(nv), minus(nv);
    for (std::size_t k = 0; k < nv; ++k) {
        const Vec p = vertex_point(k);
        for (std::size_t i = 0; i < d; ++i) {
            const double n = static_cast<double>(counts_[i]);
            const double vi = std::round(p[i] * n);
            const std::size_t up = 2 * d * k + i;
            const std::size_t down = 2 * d * k + d + i;
            entries.push_back({up, i, n});
            bias[up] = -vi;
            entries.push_back({down, i, -n});
            bias[down] = vi;
            plus[k].push_back({{up, 1.0}});
            minus[k].push_back({{down, 1.0}});
        }
    }
    std::vector<Layer> layers;
    layers.push_back(Layer::from_entries(2 * d * nv, d, std::move(entries), std::move(bias)));

    // Max-tree over nonnegative values: max(a, b) = relu(a - b) + relu(b).
    while (plus.front().size() > 1) {
        entries.clear();
        bias.clear();
        std::size_t units = 0;
        auto add_unit = [&](const Expr& pos, const Expr* neg) {
            for (const auto& [c, w] : pos) entries.push_back({units, c, w});
            if (neg) {
                for (const auto& [c, w] : *neg) entries.push_back({units, c, -w});
            }
            bias.push_back(0.0);
            return units++;
        };
        auto reduce = [&](std::vector<Expr>& list) {
            std::vector<Expr> next;
            for (std::size_t i = 0; i + 1 < list.size(); i += 2) {
                const std::size_t a = add_unit(list[i], &list[i + 1]);
                const std::size_t b = add_unit(list[i + 1], nullptr);
                next.push_back({{a, 1.0}, {b, 1.0}});
            }
            if (list.size() % 2 == 1) next.push_back({{add_unit(list.back(), nullptr), 1.0}});
            list = std::move(next);
        };
        for (std::size_t k = 0; k < nv; ++k) {
            reduce(plus[k]);
            reduce(minus[k]);
        }
        layers.push_back(Layer::from_entries(units, layers.back().rows(), std::move(entries), std::move(bias)));
        entries = {};
        bias = {};
    }

    entries.clear();
    Vec hat_bias(nv, 1.0);
    for (std::size_t k = 0; k < nv; ++k) {
        for (const auto& [c, w] : plus[k].front()) entries.push_back({k, c, -w});
        for (const auto& [c, w] : minus[k].front()) entries.push_back({k, c, -w});
    }
    layers.push_back(Layer::from_entries(nv, layers.back().rows(), std::move(entries), std::move(hat_bias)));

    entries.clear();
    for (std::size_t k = 0; k < nv; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            const double v = values_[k * d + j];
            if (v != 0.0) entries.push_back({j, k, v});
        }
    }
    layers.push_back(Layer::from_entries(d, nv, std::move(entries), Vec(d, 0.0)));
    return MLP(std::move(layers));
}

void GridInterpolant::write_binary(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParameterError("cannot open " + path.string() + " for writing");
    put_u64(os, dim());
    put_u64(os, n());
    for (double v : values_) put_u64(os, std::bit_cast<std::uint64_t>(v));
    std::ofstream side(sidecar_path(path));
    side << sidecar().dump(2) << '\n';
}

GridInterpolant GridInterpolant::read_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParameterError("cannot open grid file " + path.string());
    const auto d = static_cast<std::size_t>(get_u64(is));
    const auto n = static_cast<std::size_t>(get_u64(is));
    if (d == 0 || d > kMaxGridDim || n == 0) throw ParameterError("grid binary: invalid header");
    std::vector<std::size_t> counts(d, n);
    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        std::ifstream js(side);
        const auto meta = nlohmann::json::parse(js, nullptr, false);
        if (meta.is_discarded()) throw ParameterError("grid sidecar: malformed JSON");
        if (meta.contains("axis_counts")) counts = meta["axis_counts"].get<std::vector<std::size_t>>();
        if (counts.size() != d) throw ParameterError("grid sidecar: axis_counts length disagrees with header");
    }
    std::size_t total = d;
    for (auto c : counts) total *= (c + 1);
    Vec values(total);
    for (auto& v : values) v = std::bit_cast<double>(get_u64(is));
    is.peek();
    if (!is.eof()) throw ParameterError("grid binary: trailing bytes after payload");
    return GridInterpolant(std::move(counts), std::move(values));
}

nlohmann::json GridInterpolant::sidecar() const {
    return {{"format", "ifg-grid/1"},
            {"dim", dim()},
            {"n", n()},
            {"axis_counts", counts_},
            {"vertex_order", "lexicographic, first axis slowest, components contiguous"},
            {"lipschitz_linf", lipschitz_linf()},
            {"boundary_zero", boundary_is_zero()}};
}

} // namespace ifg
