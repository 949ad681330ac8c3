#pragma once

#include <cstdint>
#include <vector>

#include "deepbasket/neural_net.hpp"

namespace deepbasket {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
    bool operator==(const AdamConfig&) const = default;
};

// First/second moment accumulators mirroring the model's parameter shapes.
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<Eigen::MatrixXd> m_weights;
    std::vector<Eigen::MatrixXd> v_weights;
    std::vector<Eigen::VectorXd> m_biases;
    std::vector<Eigen::VectorXd> v_biases;

    static AdamState for_model(const Mlp& model, AdamConfig config = {});
    bool matches(const Mlp& model) const;
};

// One bias-corrected Adam update:
//   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
// Throws NumericalError (naming `iteration`) if any gradient is non-finite;
// the model is left untouched in that case.
void adam_step(Mlp& model, const Gradients& grads, AdamState& state, std::uint64_t iteration = 0);

}  // namespace deepbasket
