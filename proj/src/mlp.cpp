#include "ifg/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace ifg {

namespace {

// Above this many dense entries the spectral norm is bounded instead of computed.
constexpr std::size_t kExactSvdLimit = 256 * 256;

} // namespace

Layer::Layer(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0), bias_(rows, 0.0) {}

Layer Layer::from_dense(std::size_t rows, std::size_t cols, std::span<const double> weights,
                        std::span<const double> bias) {
    if (weights.size() != rows * cols) throw DimensionError("Layer::from_dense: weight count mismatch");
    if (bias.size() != rows) throw DimensionError("Layer::from_dense: bias length mismatch");
    std::vector<Entry> entries;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double w = weights[r * cols + c];
            if (w != 0.0) entries.push_back({r, c, w});
        }
    }
    return from_entries(rows, cols, std::move(entries), Vec(bias.begin(), bias.end()));
}

Layer Layer::from_entries(std::size_t rows, std::size_t cols, std::vector<Entry> entries, Vec bias) {
    if (bias.size() != rows) throw DimensionError("Layer::from_entries: bias length mismatch");
    if (cols > std::numeric_limits<std::uint32_t>::max()) throw DimensionError("Layer: too many columns");
    for (const auto& e : entries) {
        if (e.row >= rows || e.col >= cols) throw DimensionError("Layer::from_entries: entry out of range");
        if (!std::isfinite(e.value)) throw NumericError("Layer::from_entries: non-finite weight");
    }
    for (double b : bias) {
        if (!std::isfinite(b)) throw NumericError("Layer::from_entries: non-finite bias");
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    Layer out(rows, cols);
    out.bias_ = std::move(bias);
    std::size_t i = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        while (i < entries.size() && entries[i].row == r) {
            const std::size_t c = entries[i].col;
            double v = 0.0;
            while (i < entries.size() && entries[i].row == r && entries[i].col == c) v += entries[i++].value;
            if (v != 0.0) {
                out.cols_idx_.push_back(static_cast<std::uint32_t>(c));
                out.values_.push_back(v);
            }
        }
        out.row_ptr_[r + 1] = out.values_.size();
    }
    return out;
}

double Layer::weight(std::size_t r, std::size_t c) const {
    const auto cs = row_cols(r);
    const auto vs = row_values(r);
    auto it = std::lower_bound(cs.begin(), cs.end(), static_cast<std::uint32_t>(c));
    if (it == cs.end() || *it != c) return 0.0;
    return vs[static_cast<std::size_t>(it - cs.begin())];
}

Vec Layer::dense() const {
    Vec w(rows_ * cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        const auto cs = row_cols(r);
        const auto vs = row_values(r);
        for (std::size_t k = 0; k < cs.size(); ++k) w[r * cols_ + cs[k]] = vs[k];
    }
    return w;
}

void Layer::apply(std::span<const double> in, std::span<double> out) const {
    for (std::size_t r = 0; r < rows_; ++r) {
        double acc = bias_[r];
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += values_[k] * in[cols_idx_[k]];
        out[r] = acc;
    }
}

double Layer::norm_inf() const {
    double m = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (double v : row_values(r)) s += std::abs(v);
        m = std::max(m, s);
    }
    return m;
}

double Layer::norm_l2_upper() const {
    if (rows_ * cols_ <= kExactSvdLimit) {
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
        for (std::size_t r = 0; r < rows_; ++r) {
            const auto cs = row_cols(r);
            const auto vs = row_values(r);
            for (std::size_t k = 0; k < cs.size(); ++k) w(static_cast<Eigen::Index>(r), cs[k]) = vs[k];
        }
        if (w.size() == 0) return 0.0;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
        // Relative slack absorbs the SVD's rounding so the value stays an upper bound.
        return svd.singularValues()(0) * (1.0 + 1e-12);
    }
    double frob = 0.0;
    Vec col_sums(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        const auto cs = row_cols(r);
        const auto vs = row_values(r);
        for (std::size_t k = 0; k < cs.size(); ++k) {
            frob += vs[k] * vs[k];
            col_sums[cs[k]] += std::abs(vs[k]);
        }
    }
    const double norm1 = col_sums.empty() ? 0.0 : *std::max_element(col_sums.begin(), col_sums.end());
    return std::min(std::sqrt(frob), std::sqrt(norm1 * norm_inf()));
}

MLP::MLP(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DimensionError("MLP: at least one layer is required");
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        if (layers_[l].cols() != layers_[l - 1].rows()) {
            throw DimensionError("MLP: layer " + std::to_string(l) + " expects " +
                                 std::to_string(layers_[l].cols()) + " inputs but previous layer has " +
                                 std::to_string(layers_[l - 1].rows()) + " outputs");
        }
    }
}

MLP MLP::identity(std::size_t dim) {
    std::vector<Layer::Entry> e;
    for (std::size_t i = 0; i < dim; ++i) e.push_back({i, i, 1.0});
    return MLP({Layer::from_entries(dim, dim, std::move(e), Vec(dim, 0.0))});
}

MLP MLP::affine(std::size_t rows, std::size_t cols, std::span<const double> weights, std::span<const double> bias) {
    return MLP({Layer::from_dense(rows, cols, weights, bias)});
}

std::size_t MLP::width() const {
    if (layers_.size() == 1) return output_dim();
    std::size_t w = 0;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) w = std::max(w, layers_[l].rows());
    return w;
}

std::size_t MLP::nonzeros() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
        n += layer.nnz();
        n += static_cast<std::size_t>(std::count_if(layer.bias().begin(), layer.bias().end(),
                                                    [](double b) { return b != 0.0; }));
    }
    return n;
}

Vec MLP::eval(std::span<const double> x, Activation act) const {
    Vec out(output_dim());
    eval_into(x, out, act);
    return out;
}

void MLP::eval_into(std::span<const double> x, std::span<double> out, Activation act) const {
    if (x.size() != input_dim()) {
        throw DimensionError("MLP::eval: expected input of size " + std::to_string(input_dim()) + ", got " +
                             std::to_string(x.size()));
    }
    if (out.size() != output_dim()) throw DimensionError("MLP::eval: output buffer size mismatch");
    thread_local Vec a;
    thread_local Vec b;
    std::span<const double> cur = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        if (l + 1 == layers_.size()) {
            layer.apply(cur, out);
            break;
        }
        Vec& dst = (l % 2 == 0) ? a : b;
        dst.resize(layer.rows());
        layer.apply(cur, dst);
        if (act == &relu) {
            for (double& v : dst) v = v > 0.0 ? v : 0.0;
        } else {
            for (double& v : dst) v = act(v);
        }
        cur = dst;
    }
}

void BumpSpec::validate() const {
    if (!(delta > 0.0 && delta < 2.0)) throw ParameterError("BumpSpec: delta must lie in (0, 2)");
    if (dim == 0) throw ParameterError("BumpSpec: dim must be positive");
}

MLP build_bump(const BumpSpec& spec) {
    spec.validate();
    const double delta = spec.delta;
    const double drop = (4.0 - delta) / delta;
    const std::size_t d = spec.dim;
    std::vector<Layer::Entry> first, second, out;
    Vec first_bias(3 * d), second_bias(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        first.push_back({3 * i, i, 1.0});
        first.push_back({3 * i + 1, i, 1.0});
        first.push_back({3 * i + 2, i, 1.0});
        first_bias[3 * i] = -delta / 4.0;
        first_bias[3 * i + 1] = -delta / 2.0;
        first_bias[3 * i + 2] = -(1.0 - delta / 2.0);
        second.push_back({i, 3 * i, 2.0});
        second.push_back({i, 3 * i + 1, -1.0});
        second.push_back({i, 3 * i + 2, -drop});
        out.push_back({i, i, 1.0});
    }
    return MLP({Layer::from_entries(3 * d, d, std::move(first), std::move(first_bias)),
                Layer::from_entries(d, 3 * d, std::move(second), std::move(second_bias)),
                Layer::from_entries(d, d, std::move(out), Vec(d, 0.0))});
}

double bump_lipschitz(double delta) {
    BumpSpec{delta, 1}.validate();
    return std::max(2.0, 4.0 / delta - 2.0);
}

MLP compose(const MLP& outer, const MLP& inner) {
    if (inner.output_dim() != outer.input_dim()) {
        throw DimensionError("compose: inner output " + std::to_string(inner.output_dim()) +
                             " does not match outer input " + std::to_string(outer.input_dim()));
    }
    const Layer& last = inner.layers().back();
    const Layer& first = outer.layers().front();

    // merged = first ∘ last: W = W_f W_l, b = W_f b_l + b_f
    std::vector<Layer::Entry> entries;
    Vec bias(first.rows());
    Vec acc(last.cols(), 0.0);
    std::vector<char> touched(last.cols(), 0);
    std::vector<std::size_t> touched_list;
    for (std::size_t r = 0; r < first.rows(); ++r) {
        double b = first.bias()[r];
        const auto fc = first.row_cols(r);
        const auto fv = first.row_values(r);
        for (std::size_t k = 0; k < fc.size(); ++k) {
            const std::size_t mid = fc[k];
            b += fv[k] * last.bias()[mid];
            const auto lc = last.row_cols(mid);
            const auto lv = last.row_values(mid);
            for (std::size_t j = 0; j < lc.size(); ++j) {
                if (!touched[lc[j]]) {
                    touched[lc[j]] = 1;
                    touched_list.push_back(lc[j]);
                }
                acc[lc[j]] += fv[k] * lv[j];
            }
        }
        std::sort(touched_list.begin(), touched_list.end());
        for (std::size_t c : touched_list) {
            if (acc[c] != 0.0) entries.push_back({r, c, acc[c]});
            acc[c] = 0.0;
            touched[c] = 0;
        }
        touched_list.clear();
        bias[r] = b;
    }

    std::vector<Layer> layers(inner.layers().begin(), inner.layers().end() - 1);
    layers.push_back(Layer::from_entries(first.rows(), last.cols(), std::move(entries), std::move(bias)));
    layers.insert(layers.end(), outer.layers().begin() + 1, outer.layers().end());
    return MLP(std::move(layers));
}

MLP pad_to_depth(const MLP& mlp, std::size_t depth) {
    if (depth < mlp.depth()) throw ParameterError("pad_to_depth: target depth is smaller than current depth");
    std::vector<Layer> layers = mlp.layers();
    while (layers.size() < depth) {
        const Layer last = layers.back();
        const std::size_t m = last.rows();
        std::vector<Layer::Entry> split;
        Vec split_bias(2 * m);
        for (std::size_t r = 0; r < m; ++r) {
            const auto cs = last.row_cols(r);
            const auto vs = last.row_values(r);
            for (std::size_t k = 0; k < cs.size(); ++k) {
                split.push_back({r, cs[k], vs[k]});
                split.push_back({m + r, cs[k], -vs[k]});
            }
            split_bias[r] = last.bias()[r];
            split_bias[m + r] = -last.bias()[r];
        }
        std::vector<Layer::Entry> merge;
        for (std::size_t r = 0; r < m; ++r) {
            merge.push_back({r, r, 1.0});
            merge.push_back({r, m + r, -1.0});
        }
        layers.back() = Layer::from_entries(2 * m, last.cols(), std::move(split), std::move(split_bias));
        layers.push_back(Layer::from_entries(m, 2 * m, std::move(merge), Vec(m, 0.0)));
    }
    return MLP(std::move(layers));
}

MLP parallelize(std::span<const MLP> parts) {
    if (parts.empty()) throw ParameterError("parallelize: empty list of parts");
    const std::size_t in = parts.front().input_dim();
    std::size_t depth = 0;
    for (const auto& p : parts) {
        if (p.input_dim() != in) throw DimensionError("parallelize: parts have unequal input dimensions");
        depth = std::max(depth, p.depth());
    }
    std::vector<MLP> padded;
    padded.reserve(parts.size());
    for (const auto& p : parts) padded.push_back(pad_to_depth(p, depth));

    std::vector<Layer> layers;
    for (std::size_t l = 0; l < depth; ++l) {
        std::size_t rows = 0, cols = 0;
        for (const auto& p : padded) {
            rows += p.layers()[l].rows();
            cols += p.layers()[l].cols();
        }
        std::vector<Layer::Entry> entries;
        Vec bias;
        bias.reserve(rows);
        std::size_t r0 = 0, c0 = 0;
        for (const auto& p : padded) {
            const Layer& layer = p.layers()[l];
            for (std::size_t r = 0; r < layer.rows(); ++r) {
                const auto cs = layer.row_cols(r);
                const auto vs = layer.row_values(r);
                for (std::size_t k = 0; k < cs.size(); ++k) entries.push_back({r0 + r, c0 + cs[k], vs[k]});
            }
            bias.insert(bias.end(), layer.bias().begin(), layer.bias().end());
            r0 += layer.rows();
            c0 += layer.cols();
        }
        layers.push_back(Layer::from_entries(rows, cols, std::move(entries), std::move(bias)));
    }
    return MLP(std::move(layers));
}

double lipschitz_upper_bound(const MLP& mlp, Norm norm) {
    double p = 1.0;
    for (const auto& layer : mlp.layers()) p *= (norm == Norm::linf) ? layer.norm_inf() : layer.norm_l2_upper();
    return p;
}

nlohmann::json to_json(const MLP& mlp) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : mlp.layers()) {
        layers.push_back({{"rows", layer.rows()},
                          {"cols", layer.cols()},
                          {"weights", layer.dense()},
                          {"bias", layer.bias()}});
    }
    return {{"input_dim", mlp.input_dim()}, {"output_dim", mlp.output_dim()}, {"layers", std::move(layers)}};
}

MLP mlp_from_json(const nlohmann::json& doc) {
    try {
        std::vector<Layer> layers;
        for (const auto& l : doc.at("layers")) {
            const auto rows = l.at("rows").get<std::size_t>();
            const auto cols = l.at("cols").get<std::size_t>();
            const auto w = l.at("weights").get<Vec>();
            const auto b = l.at("bias").get<Vec>();
            layers.push_back(Layer::from_dense(rows, cols, w, b));
        }
        MLP mlp(std::move(layers));
        if (mlp.input_dim() != doc.at("input_dim").get<std::size_t>() ||
            mlp.output_dim() != doc.at("output_dim").get<std::size_t>()) {
            throw DimensionError("mlp_from_json: declared dimensions disagree with layers");
        }
        return mlp;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("mlp_from_json: ") + e.what());
    }
}

} // namespace ifg
