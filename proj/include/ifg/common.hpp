#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ifg {

/// Shape or length disagreement between operands.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A construction parameter outside its admissible range.
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Non-finite or otherwise unusable numerical state.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vec = std::vector<double>;

/// Axis-aligned closed box.
struct Box {
    Vec lo;
    Vec hi;

    static Box unit(std::size_t dim) { return {Vec(dim, 0.0), Vec(dim, 1.0)}; }
    static Box cube(std::size_t dim, double lo, double hi) { return {Vec(dim, lo), Vec(dim, hi)}; }

    std::size_t dim() const { return lo.size(); }
    bool contains(std::span<const double> x) const;
    bool contains(const Box& other) const;
};

/// Bounding box of the union; nullopt (unbounded) absorbs.
std::optional<Box> box_union(const std::optional<Box>& a, const std::optional<Box>& b);

double norm_inf(std::span<const double> v);
double dist_inf(std::span<const double> a, std::span<const double> b);
double dist_l2(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0);

/// Portable RNG: the engine is fully specified by the standard and the
/// uniform conversion is done by hand, so streams are identical across
/// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t next() { return engine_(); }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

private:
    std::mt19937_64 engine_;
};

/// Tensor-product grid of points per axis, lexicographic (first axis slowest).
std::vector<Vec> grid_points(const Box& box, std::size_t per_axis);

/// Runs f(i) for i in [0, n). Each index writes only its own output slot,
/// so results do not depend on how the range is partitioned.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    workers = std::min(workers, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

/// Shortest round-trip decimal representation.
std::string format_double(double v);

} // namespace ifg
