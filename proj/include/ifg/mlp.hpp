#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "ifg/common.hpp"

namespace ifg {

enum class Norm { linf, l2 };

/// Affine map y = W x + b with W stored in compressed sparse rows.
/// Exact zeros are never stored.
class Layer {
public:
    struct Entry {
        std::size_t row;
        std::size_t col;
        double value;
    };

    Layer() = default;
    Layer(std::size_t rows, std::size_t cols);

    static Layer from_dense(std::size_t rows, std::size_t cols, std::span<const double> weights,
                            std::span<const double> bias);
    /// Duplicate (row, col) entries are summed.
    static Layer from_entries(std::size_t rows, std::size_t cols, std::vector<Entry> entries, Vec bias);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }
    const Vec& bias() const { return bias_; }

    double weight(std::size_t r, std::size_t c) const;
    std::span<const std::uint32_t> row_cols(std::size_t r) const {
        return {cols_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
    }
    std::span<const double> row_values(std::size_t r) const {
        return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
    }

    /// Row-major dense copy of W.
    Vec dense() const;
    void apply(std::span<const double> in, std::span<double> out) const;

    double norm_inf() const;
    /// Spectral norm (exact SVD for small layers, Frobenius / Schur bound otherwise).
    double norm_l2_upper() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::uint32_t> cols_idx_;
    Vec values_;
    Vec bias_;
};

using Activation = double (*)(double);

/// Feed-forward network: activation after every layer except the last,
/// which is affine only. Depth counts hidden layers plus the output layer.
class MLP {
public:
    MLP() = default;
    explicit MLP(std::vector<Layer> layers);

    static MLP identity(std::size_t dim);
    static MLP affine(std::size_t rows, std::size_t cols, std::span<const double> weights,
                      std::span<const double> bias);

    std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().cols(); }
    std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().rows(); }
    std::size_t depth() const { return layers_.size(); }
    /// Widest hidden layer; the output dimension when there are no hidden layers.
    std::size_t width() const;
    /// Nonzero weights plus nonzero biases.
    std::size_t nonzeros() const;
    const std::vector<Layer>& layers() const { return layers_; }

    Vec eval(std::span<const double> x, Activation act = relu) const;
    void eval_into(std::span<const double> x, std::span<double> out, Activation act = relu) const;

private:
    std::vector<Layer> layers_;
};

inline Vec eval(const MLP& mlp, std::span<const double> x) { return mlp.eval(x); }

struct BumpSpec {
    double delta = 0.5;
    std::size_t dim = 1;

    void validate() const;
};

/// Exact ReLU cutoff b(x) = relu(2 relu(x - δ/4) - relu(x - δ/2) - c relu(x - (1 - δ/2)))
/// with c = (4 - δ)/δ, applied coordinatewise. b vanishes outside
/// [δ/4, 1 - δ/4], is the identity on [δ/2, 1 - δ/2] and is continuous.
MLP build_bump(const BumpSpec& spec);

/// Global Lipschitz constant of the scalar bump: max(2, 4/δ - 2).
double bump_lipschitz(double delta);

/// Single network equal to outer(inner(x)); inner's affine output layer is
/// merged into outer's first layer, so depth = depth(outer) + depth(inner) - 1.
MLP compose(const MLP& outer, const MLP& inner);

/// Appends ReLU-safe identity layers (relu(y) - relu(-y)) until the network
/// has the requested depth. The function computed is unchanged.
MLP pad_to_depth(const MLP& mlp, std::size_t depth);

/// Block-diagonal stacking: input and output are the concatenations of the
/// parts' inputs and outputs (disjoint wiring). Shallower parts are padded.
MLP parallelize(std::span<const MLP> parts);

/// Product of per-layer operator norms; an upper bound on the Lipschitz
/// constant for any 1-Lipschitz activation.
double lipschitz_upper_bound(const MLP& mlp, Norm norm = Norm::linf);

nlohmann::json to_json(const MLP& mlp);
MLP mlp_from_json(const nlohmann::json& doc);

} // namespace ifg
