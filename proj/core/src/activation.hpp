#pragma once

#include <cmath>

#include "xvapinn/network.hpp"

namespace xvapinn::detail {

struct ActivationDerivs {
    double value;
    double d1;
    double d2;
    double d3;
};

inline ActivationDerivs activate(Activation a, double x) {
    switch (a) {
        case Activation::Tanh: {
            const double s = std::tanh(x);
            const double d1 = 1.0 - s * s;
            return {s, d1, -2.0 * s * d1, -2.0 * d1 * (d1 - 2.0 * s * s)};
        }
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            const double d1 = s * (1.0 - s);
            const double d2 = d1 * (1.0 - 2.0 * s);
            return {s, d1, d2, d2 * (1.0 - 2.0 * s) - 2.0 * d1 * d1};
        }
        case Activation::Identity: return {x, 1.0, 0.0, 0.0};
    }
    return {x, 1.0, 0.0, 0.0};
}

}  // namespace xvapinn::detail
