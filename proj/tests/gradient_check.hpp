#pragma once

// Central finite-difference check of backward(); shared by the unit tests
// and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "deepbasket/neural_net.hpp"

namespace testing {

struct GradientCheck {
    double worst_relative = 0.0;  // over entries with magnitude >= kAbsoluteFloor
    double worst_absolute = 0.0;  // over the remaining entries
    std::size_t entries = 0;
    bool passed = false;

    static constexpr double kStep = 1e-5;
    static constexpr double kTolerance = 1e-4;
    static constexpr double kAbsoluteFloor = 1e-8;
};

inline long double oracle_activation(deepbasket::Activation a, long double z) {
    using deepbasket::Activation;
    switch (a) {
        case Activation::ReLU: return z > 0 ? z : 0.0L;
        case Activation::LeakyReLU: return z > 0 ? z : 0.01L * z;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Sigmoid: return 1.0L / (1.0L + std::exp(-z));
        case Activation::Linear: return z;
    }
    return z;
}

// Loss evaluated by a separate, naive forward pass in extended precision, so
// the difference quotient is not swamped by double rounding.
inline long double oracle_loss(const deepbasket::Mlp& m, const deepbasket::InputBatch& x, const Eigen::VectorXd& y,
                               deepbasket::LossKind kind) {
    const auto& norm = m.normalization();
    long double total = 0.0L;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        std::vector<long double> a(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            a[static_cast<std::size_t>(j)] =
                (static_cast<long double>(x(r, j)) - norm.input_shift(j)) / static_cast<long double>(norm.input_scale(j));
        }
        for (std::size_t l = 0; l < m.layers().size(); ++l) {
            const auto& layer = m.layers()[l];
            const bool last = l + 1 == m.layers().size();
            std::vector<long double> next(static_cast<std::size_t>(layer.weights.rows()));
            for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
                long double z = layer.bias(i);
                for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
                    z += static_cast<long double>(layer.weights(i, j)) * a[static_cast<std::size_t>(j)];
                }
                next[static_cast<std::size_t>(i)] = last ? z : oracle_activation(m.hidden_activation(), z);
            }
            a = std::move(next);
        }
        const long double pred = static_cast<long double>(norm.output_scale) * a[0] + norm.output_shift;
        const long double d = pred - static_cast<long double>(y(r));
        total += kind == deepbasket::LossKind::MSE ? d * d : std::abs(d);
    }
    return total / static_cast<long double>(x.rows());
}

inline GradientCheck check_gradients(deepbasket::Mlp model, const deepbasket::InputBatch& x, const Eigen::VectorXd& y,
                                     deepbasket::LossKind kind = deepbasket::LossKind::MSE) {
    using namespace deepbasket;
    const ForwardCache cache = forward(model, x, 1);
    const Gradients g = backward(model, cache, y, kind, 1);
    GradientCheck out;
    auto compare = [&](double analytic, double& param) {
        const double saved = param;
        const double plus = saved + GradientCheck::kStep;
        const double minus = saved - GradientCheck::kStep;
        param = plus;
        const long double up = oracle_loss(model, x, y, kind);
        param = minus;
        const long double down = oracle_loss(model, x, y, kind);
        param = saved;
        const auto numeric = static_cast<double>((up - down) / (static_cast<long double>(plus) - minus));
        const double scale = std::max(std::abs(analytic), std::abs(numeric));
        if (scale < GradientCheck::kAbsoluteFloor) {
            out.worst_absolute = std::max(out.worst_absolute, std::abs(analytic - numeric));
        } else {
            out.worst_relative = std::max(out.worst_relative, std::abs(analytic - numeric) / scale);
        }
        ++out.entries;
    };
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        auto& layer = model.layers()[l];
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) compare(g.weights[l](i, j), layer.weights(i, j));
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) compare(g.biases[l](i), layer.bias(i));
    }
    out.passed = out.worst_relative <= GradientCheck::kTolerance && out.worst_absolute <= GradientCheck::kAbsoluteFloor;
    return out;
}

// Random model/batch pair for case `index`: cycles through the four hidden
// activations and depths 1..6, with a non-trivial normalisation.
struct GradientCase {
    deepbasket::Mlp model;
    deepbasket::InputBatch x;
    Eigen::VectorXd y;
};

inline GradientCase make_gradient_case(int index) {
    using namespace deepbasket;
    static constexpr Activation kActs[] = {Activation::ReLU, Activation::LeakyReLU, Activation::Tanh,
                                           Activation::Sigmoid};
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(index));
    std::uniform_int_distribution<int> width(2, 7);
    const int depth = 1 + index % 6;
    const int in = width(rng);
    std::vector<int> dims{in};
    for (int d = 0; d < depth; ++d) dims.push_back(width(rng));
    dims.push_back(1);
    Mlp model = initialize(dims, kActs[index % 4], static_cast<std::uint64_t>(index));
    std::normal_distribution<double> n01(0.0, 1.0);
    for (auto& layer : model.layers()) {
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.1 * n01(rng);
    }
    auto& norm = model.normalization();
    for (Eigen::Index j = 0; j < in; ++j) {
        norm.input_shift(j) = n01(rng);
        norm.input_scale(j) = 0.5 + std::abs(n01(rng));
    }
    norm.output_shift = 2.0 * n01(rng);
    norm.output_scale = 0.5 + std::abs(n01(rng));
    const int batch = 3 + index % 5;
    GradientCase c{std::move(model), InputBatch(batch, in), Eigen::VectorXd(batch)};
    for (Eigen::Index r = 0; r < batch; ++r) {
        for (Eigen::Index j = 0; j < in; ++j) c.x(r, j) = n01(rng);
        c.y(r) = n01(rng);
    }
    return c;
}

}  // namespace testing
