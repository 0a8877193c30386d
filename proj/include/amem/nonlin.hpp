#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace amem {

enum class NonlinKind {
    relu,
    leaky_relu, // slope parameter
    selu,
    swish,
    cosid,    // cos z - z
    sinusoid, // z + sin(10 z)/5
    sigmoid,
    exp2,  // e^{2z}
    power, // z^m, exponent parameter
    identity,
};

// Elementwise activation. phi and dphi are evaluable at every real; the
// derivative of the piecewise kinds at the kink is pinned to the left value
// so evaluation is deterministic.
struct Nonlin {
    NonlinKind kind = NonlinKind::identity;
    double param = 0.0; // leaky_relu slope / power exponent

    static constexpr double kLeakySlope = 0.01;
    static constexpr double kSeluAlpha = 1.6732632423543772;
    static constexpr double kSeluLambda = 1.0507009873554805;

    static Nonlin make(NonlinKind k, double param = 0.0) {
        Nonlin n;
        n.kind = k;
        if (k == NonlinKind::leaky_relu && param == 0.0) param = kLeakySlope;
        n.param = param;
        return n;
    }

    double phi(double z) const {
        switch (kind) {
        case NonlinKind::relu: return z > 0 ? z : 0.0;
        case NonlinKind::leaky_relu: return z > 0 ? z : param * z;
        case NonlinKind::selu:
            return z > 0 ? kSeluLambda * z : kSeluLambda * kSeluAlpha * std::expm1(z);
        case NonlinKind::swish: return z / (1.0 + std::exp(-z));
        case NonlinKind::cosid: return std::cos(z) - z;
        case NonlinKind::sinusoid: return z + std::sin(10.0 * z) / 5.0;
        case NonlinKind::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case NonlinKind::exp2: return std::exp(2.0 * z);
        case NonlinKind::power: return std::pow(z, param);
        case NonlinKind::identity: return z;
        }
        throw std::logic_error("nonlin: unknown kind");
    }

    double dphi(double z) const {
        switch (kind) {
        case NonlinKind::relu: return z > 0 ? 1.0 : 0.0;
        case NonlinKind::leaky_relu: return z > 0 ? 1.0 : param;
        case NonlinKind::selu:
            return z > 0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(z);
        case NonlinKind::swish: {
            double s = 1.0 / (1.0 + std::exp(-z));
            return s + z * s * (1.0 - s);
        }
        case NonlinKind::cosid: return -std::sin(z) - 1.0;
        case NonlinKind::sinusoid: return 1.0 + 2.0 * std::cos(10.0 * z);
        case NonlinKind::sigmoid: {
            double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
        case NonlinKind::exp2: return 2.0 * std::exp(2.0 * z);
        case NonlinKind::power: return param * std::pow(z, param - 1.0);
        case NonlinKind::identity: return 1.0;
        }
        throw std::logic_error("nonlin: unknown kind");
    }

    // true when phi is C^1 everywhere, the differentiability the gradient-flow
    // analysis assumes (phi/phi' finite on the interval of interest is checked
    // at solve time along the actual path)
    bool smooth() const {
        return kind != NonlinKind::relu && kind != NonlinKind::leaky_relu;
    }

    std::string name() const {
        switch (kind) {
        case NonlinKind::relu: return "relu";
        case NonlinKind::leaky_relu: return "leaky_relu";
        case NonlinKind::selu: return "selu";
        case NonlinKind::swish: return "swish";
        case NonlinKind::cosid: return "cosid";
        case NonlinKind::sinusoid: return "sinusoid";
        case NonlinKind::sigmoid: return "sigmoid";
        case NonlinKind::exp2: return "exp2";
        case NonlinKind::power: return "power";
        case NonlinKind::identity: return "identity";
        }
        return "?";
    }

    static Nonlin parse(const std::string& spec) {
        auto colon = spec.find(':');
        std::string name = spec.substr(0, colon);
        double param = colon == std::string::npos ? 0.0 : std::stod(spec.substr(colon + 1));
        if (name == "relu") return make(NonlinKind::relu);
        if (name == "leaky_relu") return make(NonlinKind::leaky_relu, param);
        if (name == "selu") return make(NonlinKind::selu);
        if (name == "swish") return make(NonlinKind::swish);
        if (name == "cosid") return make(NonlinKind::cosid);
        if (name == "sinusoid") return make(NonlinKind::sinusoid);
        if (name == "sigmoid") return make(NonlinKind::sigmoid);
        if (name == "exp2") return make(NonlinKind::exp2);
        if (name == "power") return make(NonlinKind::power, param == 0.0 ? 2.0 : param);
        if (name == "identity") return make(NonlinKind::identity);
        throw std::invalid_argument("unknown nonlinearity: " + spec);
    }
};

} // namespace amem
