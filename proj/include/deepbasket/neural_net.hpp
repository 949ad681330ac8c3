#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "deepbasket/types.hpp"

namespace deepbasket {

enum class Activation : std::uint32_t { ReLU = 0, LeakyReLU = 1, Tanh = 2, Sigmoid = 3, Linear = 4 };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

namespace act {

inline double relu(double z) noexcept { return z > 0.0 ? z : 0.0; }
inline double leaky_relu(double z) noexcept { return z > 0.0 ? z : 0.01 * z; }
double tanh(double z) noexcept;
double sigmoid(double z) noexcept;

// Derivatives with respect to z. relu'(0) == 0.
inline double relu_derivative(double z) noexcept { return z > 0.0 ? 1.0 : 0.0; }
inline double leaky_relu_derivative(double z) noexcept { return z > 0.0 ? 1.0 : 0.01; }
double tanh_derivative(double z) noexcept;
double sigmoid_derivative(double z) noexcept;

double apply(Activation a, double z) noexcept;
double derivative(Activation a, double z) noexcept;

}  // namespace act

enum class LossKind : std::uint32_t { MSE = 0, L1 = 1 };

std::string_view to_string(LossKind k) noexcept;
LossKind parse_loss(std::string_view name);

// Mean loss over the batch: (1/m) sum (p - y)^2, or (1/m) sum |p - y|.
double loss(std::span<const double> predictions, std::span<const double> labels, LossKind kind = LossKind::MSE);

// d loss_i / d prediction_i for one sample (no 1/m factor).
double loss_derivative(double prediction, double label, LossKind kind) noexcept;

struct DenseLayer {
    Eigen::MatrixXd weights;  // n_l x n_{l-1}
    Eigen::VectorXd bias;     // n_l
};

// Affine maps wrapped around the network: inputs are standardised before the
// first layer and the raw output z is reported as output_scale * z + output_shift.
struct Normalization {
    Eigen::VectorXd input_shift;
    Eigen::VectorXd input_scale;
    double output_shift = 0.0;
    double output_scale = 1.0;

    static Normalization identity(int input_width);
    // Column mean/sd of `inputs` and mean/sd of `labels`; zero sd maps to 1.
    static Normalization fit(const Eigen::Ref<const InputBatch>& inputs, std::span<const double> labels);

    bool operator==(const Normalization&) const = default;
};

// Fully connected feed-forward network with a shared hidden activation and a
// linear output layer of width 1.
class Mlp {
public:
    Mlp(std::vector<int> layer_dims, Activation hidden);

    const std::vector<int>& layer_dims() const noexcept { return dims_; }
    int input_width() const noexcept { return dims_.front(); }
    // Number of weight layers (hidden layers + output layer).
    int depth() const noexcept { return static_cast<int>(layers_.size()); }
    Activation hidden_activation() const noexcept { return hidden_; }

    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    Normalization& normalization() noexcept { return norm_; }
    const Normalization& normalization() const noexcept { return norm_; }

    // Bumped by every optimiser step; forward caches remember the revision
    // they were computed at.
    std::uint64_t revision() const noexcept { return revision_; }
    void touch() noexcept { ++revision_; }

    std::size_t parameter_count() const noexcept;
    bool all_finite() const;
    std::vector<double> layer_norms() const;

    bool same_parameters(const Mlp& other) const;

private:
    std::vector<int> dims_;
    Activation hidden_;
    std::vector<DenseLayer> layers_;
    Normalization norm_;
    std::uint64_t revision_ = 0;
};

// He initialisation: W ~ N(0, 2 / fan_in), b = 0, identity normalisation.
Mlp initialize(std::vector<int> layer_dims, Activation hidden, std::uint64_t seed);

// [input, hidden x depth, 1]
std::vector<int> make_layer_dims(int input_width, int hidden_width, int hidden_layers);

struct ForwardCache {
    std::vector<int> layer_dims;
    std::uint64_t revision = 0;
    // activations[l] = a^[l] for l = 0..L-1 (a^[0] is the normalised input),
    // pre_activations[l-1] = Z^[l] for l = 1..L. Columns are samples.
    std::vector<Eigen::MatrixXd> activations;
    std::vector<Eigen::MatrixXd> pre_activations;
    Eigen::VectorXd output;

    Eigen::Index batch_size() const noexcept { return output.size(); }
};

// Columns of the batch are processed in fixed chunks, so results are
// bit-identical for any worker count. workers == 0 uses the OpenMP default.
ForwardCache forward(const Mlp& model, const Eigen::Ref<const InputBatch>& batch, int workers = 0);

// Outputs only; keeps two activation buffers per chunk instead of the cache.
Eigen::VectorXd predict(const Mlp& model, const Eigen::Ref<const InputBatch>& batch, int workers = 0);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static Gradients zeros_like(const Mlp& model);
    bool all_finite() const;
};

// Exact gradients of the mean batch loss with respect to every weight and bias.
Gradients backward(const Mlp& model, const ForwardCache& cache, const Eigen::Ref<const Eigen::VectorXd>& labels,
                   LossKind kind = LossKind::MSE, int workers = 0);

// Serial per-sample reference versions of forward/backward, kept for testing
// the chunked kernels.
Eigen::VectorXd forward_reference(const Mlp& model, const Eigen::Ref<const InputBatch>& batch);
Gradients backward_reference(const Mlp& model, const Eigen::Ref<const InputBatch>& batch,
                             const Eigen::Ref<const Eigen::VectorXd>& labels, LossKind kind = LossKind::MSE);

// Single-precision copy of a trained model for the inference benchmark.
class MlpF32 {
public:
    explicit MlpF32(const Mlp& model);

    Eigen::VectorXf predict(const Eigen::Ref<const InputBatchF>& batch, int workers = 0) const;
    int input_width() const noexcept { return input_width_; }

private:
    int input_width_;
    Activation hidden_;
    std::vector<Eigen::MatrixXf> weights_;
    std::vector<Eigen::VectorXf> biases_;
    Eigen::VectorXf input_shift_;
    Eigen::VectorXf input_inv_scale_;
    float output_shift_;
    float output_scale_;
};

inline constexpr Eigen::Index kColumnsPerChunk = 512;

}  // namespace deepbasket
