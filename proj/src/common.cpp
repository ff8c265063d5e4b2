#include "ifg/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace ifg {

bool Box::contains(std::span<const double> x) const {
    if (x.size() != lo.size()) throw DimensionError("Box::contains: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    }
    return true;
}

bool Box::contains(const Box& other) const {
    if (other.dim() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i) {
        if (other.lo[i] < lo[i] || other.hi[i] > hi[i]) return false;
    }
    return true;
}

std::optional<Box> box_union(const std::optional<Box>& a, const std::optional<Box>& b) {
    if (!a || !b) return std::nullopt;
    if (a->dim() != b->dim()) throw DimensionError("box_union: dimension mismatch");
    Box out = *a;
    for (std::size_t i = 0; i < out.dim(); ++i) {
        out.lo[i] = std::min(out.lo[i], b->lo[i]);
        out.hi[i] = std::max(out.hi[i], b->hi[i]);
    }
    return out;
}

double norm_inf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double dist_inf(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dist_inf: dimension mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double dist_l2(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dist_l2: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ a) ^ b);
}

std::vector<Vec> grid_points(const Box& box, std::size_t per_axis) {
    if (per_axis == 0) throw ParameterError("grid_points: per_axis must be positive");
    const std::size_t d = box.dim();
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= per_axis;
    std::vector<Vec> pts;
    pts.reserve(total);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t k = 0; k < total; ++k) {
        Vec p(d);
        for (std::size_t i = 0; i < d; ++i) {
            const double t = per_axis == 1 ? 0.5 : static_cast<double>(idx[i]) / static_cast<double>(per_axis - 1);
            p[i] = box.lo[i] + t * (box.hi[i] - box.lo[i]);
        }
        pts.push_back(std::move(p));
        for (std::size_t i = d; i-- > 0;) {
            if (++idx[i] < per_axis) break;
            idx[i] = 0;
        }
    }
    return pts;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace ifg
