#include <cmath>
#include <string>

#include "ifg/fields.hpp"

namespace ifg {

Modulus Modulus::lipschitz(Vec constants) {
    if (constants.empty()) throw ParameterError("Modulus: empty constant vector");
    for (double c : constants) {
        if (!(c >= 0.0) || !std::isfinite(c)) throw ParameterError("Modulus: Lipschitz constants must be finite and >= 0");
    }
    Modulus m;
    m.kind_ = Kind::lipschitz;
    m.constants_ = std::move(constants);
    return m;
}

Modulus Modulus::holder(Vec constants, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("Modulus: Holder exponent must lie in (0, 1]");
    Modulus m = lipschitz(std::move(constants));
    m.kind_ = Kind::holder;
    m.alpha_ = alpha;
    return m;
}

Modulus Modulus::smooth_rate(int s, std::size_t domain_dim, Vec cs_norms) {
    if (s < 1) throw ParameterError("Modulus: smoothness must be >= 1");
    if (domain_dim == 0) throw ParameterError("Modulus: domain dimension must be positive");
    Modulus m = lipschitz(std::move(cs_norms));
    m.kind_ = Kind::smooth_rate;
    m.smoothness_ = s;
    m.domain_dim_ = domain_dim;
    return m;
}

Vec Modulus::eval(double t) const {
    if (!(t >= 0.0)) throw ParameterError("Modulus: argument must be >= 0, got " + format_double(t));
    Vec out(constants_.size());
    switch (kind_) {
    case Kind::lipschitz:
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = constants_[j] * t;
        break;
    case Kind::holder:
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = t == 0.0 ? 0.0 : constants_[j] * std::pow(t, alpha_);
        break;
    case Kind::smooth_rate: {
        if (t < 1.0) throw ParameterError("Modulus: smooth rate needs N*L >= 1");
        const double s = smoothness_;
        const double d = static_cast<double>(domain_dim_);
        const double scale = 85.0 * std::pow(s + 1.0, d) * std::pow(8.0, s) * std::pow(t, -2.0 * s / d);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = scale * constants_[j];
        break;
    }
    }
    return out;
}

Vec modulus_bound_eval(const Modulus& modulus, double t) { return modulus.eval(t); }

nlohmann::json Modulus::to_json() const {
    nlohmann::json j;
    switch (kind_) {
    case Kind::lipschitz:
        j["kind"] = "lipschitz";
        break;
    case Kind::holder:
        j["kind"] = "holder";
        j["alpha"] = alpha_;
        break;
    case Kind::smooth_rate:
        j["kind"] = "smooth_rate";
        j["s"] = smoothness_;
        j["domain_dim"] = domain_dim_;
        break;
    }
    j["constants"] = constants_;
    return j;
}

Modulus Modulus::from_json(const nlohmann::json& doc) {
    try {
        const std::string kind = doc.at("kind").get<std::string>();
        Vec c = doc.at("constants").get<Vec>();
        if (kind == "lipschitz") return lipschitz(std::move(c));
        if (kind == "holder") return holder(std::move(c), doc.at("alpha").get<double>());
        if (kind == "smooth_rate") {
            return smooth_rate(doc.at("s").get<int>(), doc.at("domain_dim").get<std::size_t>(), std::move(c));
        }
        throw ParameterError("Modulus: unknown kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("Modulus: malformed JSON: ") + e.what());
    }
}

} // namespace ifg
