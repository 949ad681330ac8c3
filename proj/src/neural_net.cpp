#include "deepbasket/neural_net.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "deepbasket/errors.hpp"
#include "deepbasket/random.hpp"

namespace deepbasket {

namespace {

int resolve_threads(int workers) { return workers > 0 ? workers : omp_get_max_threads(); }

template <typename Derived>
void activate_inplace(Activation a, Eigen::DenseBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    auto arr = m.derived().array();
    switch (a) {
        case Activation::ReLU:
            arr = arr.max(Scalar(0));
            break;
        case Activation::LeakyReLU:
            arr = arr.max(Scalar(0.01) * arr);
            break;
        case Activation::Tanh:
            arr = arr.unaryExpr([](Scalar z) { return std::tanh(z); });
            break;
        case Activation::Sigmoid:
            arr = arr.unaryExpr([](Scalar z) { return static_cast<Scalar>(act::sigmoid(static_cast<double>(z))); });
            break;
        case Activation::Linear:
            break;
    }
}

// Multiplies `grad` element-wise by g'(z).
void scale_by_derivative(Activation a, const Eigen::Ref<const Eigen::MatrixXd>& z, Eigen::Ref<Eigen::MatrixXd> grad) {
    switch (a) {
        case Activation::ReLU:
            grad.array() *= (z.array() > 0.0).cast<double>();
            break;
        case Activation::LeakyReLU:
            grad.array() *= (z.array() > 0.0).select(Eigen::ArrayXXd::Ones(z.rows(), z.cols()), 0.01);
            break;
        case Activation::Tanh:
        case Activation::Sigmoid:
            grad.array() *= z.array().unaryExpr([a](double v) { return act::derivative(a, v); });
            break;
        case Activation::Linear:
            break;
    }
}

void check_batch(const Mlp& model, Eigen::Index cols) {
    if (cols != model.input_width()) {
        throw ShapeError("layer 1: batch has " + std::to_string(cols) + " columns, model expects " +
                         std::to_string(model.input_width()));
    }
}

Eigen::Index chunk_count(Eigen::Index m) { return (m + kColumnsPerChunk - 1) / kColumnsPerChunk; }

}  // namespace

std::string_view to_string(Activation a) noexcept {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::LeakyReLU: return "leaky_relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Linear: return "linear";
    }
    return "unknown";
}

Activation parse_activation(std::string_view name) {
    for (Activation a : {Activation::ReLU, Activation::LeakyReLU, Activation::Tanh, Activation::Sigmoid,
                         Activation::Linear}) {
        if (to_string(a) == name) return a;
    }
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

namespace act {

double tanh(double z) noexcept { return std::tanh(z); }

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double tanh_derivative(double z) noexcept {
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

double sigmoid_derivative(double z) noexcept {
    const double s = sigmoid(z);
    return s * (1.0 - s);
}

double apply(Activation a, double z) noexcept {
    switch (a) {
        case Activation::ReLU: return relu(z);
        case Activation::LeakyReLU: return leaky_relu(z);
        case Activation::Tanh: return tanh(z);
        case Activation::Sigmoid: return sigmoid(z);
        case Activation::Linear: return z;
    }
    return z;
}

double derivative(Activation a, double z) noexcept {
    switch (a) {
        case Activation::ReLU: return relu_derivative(z);
        case Activation::LeakyReLU: return leaky_relu_derivative(z);
        case Activation::Tanh: return tanh_derivative(z);
        case Activation::Sigmoid: return sigmoid_derivative(z);
        case Activation::Linear: return 1.0;
    }
    return 1.0;
}

}  // namespace act

std::string_view to_string(LossKind k) noexcept { return k == LossKind::MSE ? "mse" : "l1"; }

LossKind parse_loss(std::string_view name) {
    if (name == "mse" || name == "l2") return LossKind::MSE;
    if (name == "l1" || name == "mae") return LossKind::L1;
    throw ConfigError("unknown loss '" + std::string(name) + "'");
}

double loss(std::span<const double> predictions, std::span<const double> labels, LossKind kind) {
    if (predictions.empty()) throw DomainError("loss: empty batch");
    if (predictions.size() != labels.size()) {
        throw ShapeError("loss: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - labels[i];
        acc += kind == LossKind::MSE ? d * d : std::abs(d);
    }
    return acc / static_cast<double>(predictions.size());
}

double loss_derivative(double prediction, double label, LossKind kind) noexcept {
    const double d = prediction - label;
    if (kind == LossKind::MSE) return 2.0 * d;
    return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
}

Normalization Normalization::identity(int input_width) {
    Normalization n;
    n.input_shift = Eigen::VectorXd::Zero(input_width);
    n.input_scale = Eigen::VectorXd::Ones(input_width);
    return n;
}

Normalization Normalization::fit(const Eigen::Ref<const InputBatch>& inputs, std::span<const double> labels) {
    if (inputs.rows() < 1) throw DomainError("Normalization::fit: empty input set");
    if (static_cast<std::size_t>(inputs.rows()) != labels.size()) throw ShapeError("Normalization::fit: label count");
    const auto m = static_cast<double>(inputs.rows());
    Normalization n;
    n.input_shift = inputs.colwise().mean().transpose();
    n.input_scale.resize(inputs.cols());
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
        const double var = (inputs.col(j).array() - n.input_shift(j)).square().sum() / m;
        n.input_scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    double mean = 0.0;
    for (double y : labels) mean += y;
    mean /= m;
    double var = 0.0;
    for (double y : labels) var += (y - mean) * (y - mean);
    var /= m;
    n.output_shift = mean;
    n.output_scale = var > 0.0 ? std::sqrt(var) : 1.0;
    return n;
}

Mlp::Mlp(std::vector<int> layer_dims, Activation hidden) : dims_(std::move(layer_dims)), hidden_(hidden) {
    if (dims_.size() < 2) throw ShapeError("layer_dims needs at least an input and an output size");
    for (std::size_t l = 0; l < dims_.size(); ++l) {
        if (dims_[l] < 1) throw ShapeError("layer " + std::to_string(l) + " has non-positive width");
    }
    if (dims_.back() != 1) throw ShapeError("output layer must have width 1");
    layers_.resize(dims_.size() - 1);
    for (std::size_t l = 1; l < dims_.size(); ++l) {
        layers_[l - 1].weights = Eigen::MatrixXd::Zero(dims_[l], dims_[l - 1]);
        layers_[l - 1].bias = Eigen::VectorXd::Zero(dims_[l]);
    }
    norm_ = Normalization::identity(dims_.front());
}

std::size_t Mlp::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

bool Mlp::all_finite() const {
    return std::all_of(layers_.begin(), layers_.end(),
                       [](const DenseLayer& l) { return l.weights.allFinite() && l.bias.allFinite(); });
}

std::vector<double> Mlp::layer_norms() const {
    std::vector<double> out;
    for (const auto& l : layers_) out.push_back(std::sqrt(l.weights.squaredNorm() + l.bias.squaredNorm()));
    return out;
}

bool Mlp::same_parameters(const Mlp& other) const {
    if (dims_ != other.dims_ || hidden_ != other.hidden_ || !(norm_ == other.norm_)) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].weights != other.layers_[l].weights || layers_[l].bias != other.layers_[l].bias) return false;
    }
    return true;
}

std::vector<int> make_layer_dims(int input_width, int hidden_width, int hidden_layers) {
    std::vector<int> dims{input_width};
    for (int i = 0; i < hidden_layers; ++i) dims.push_back(hidden_width);
    dims.push_back(1);
    return dims;
}

Mlp initialize(std::vector<int> layer_dims, Activation hidden, std::uint64_t seed) {
    Mlp model(std::move(layer_dims), hidden);
    for (int l = 0; l < model.depth(); ++l) {
        auto& layer = model.layers()[static_cast<std::size_t>(l)];
        const double fan_in = static_cast<double>(layer.weights.cols());
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(l), 11));
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
            for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) layer.weights(i, j) = dist(rng);
        }
        layer.bias.setZero();
    }
    return model;
}

ForwardCache forward(const Mlp& model, const Eigen::Ref<const InputBatch>& batch, int workers) {
    check_batch(model, batch.cols());
    const Eigen::Index m = batch.rows();
    const int depth = model.depth();
    const auto& norm = model.normalization();

    ForwardCache cache;
    cache.layer_dims = model.layer_dims();
    cache.revision = model.revision();
    cache.activations.resize(static_cast<std::size_t>(depth));
    cache.pre_activations.resize(static_cast<std::size_t>(depth));
    for (int l = 0; l < depth; ++l) {
        cache.activations[static_cast<std::size_t>(l)].resize(model.layer_dims()[static_cast<std::size_t>(l)], m);
        cache.pre_activations[static_cast<std::size_t>(l)].resize(model.layer_dims()[static_cast<std::size_t>(l + 1)], m);
    }
    cache.output.resize(m);

    const Eigen::Index chunks = chunk_count(m);
    const int threads = resolve_threads(workers);
    const Eigen::VectorXd inv_scale = norm.input_scale.cwiseInverse();
#pragma omp parallel for schedule(static, 1) num_threads(threads) if (threads > 1 && chunks > 1)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        const Eigen::Index c0 = c * kColumnsPerChunk;
        const Eigen::Index w = std::min(kColumnsPerChunk, m - c0);
        auto a0 = cache.activations[0].middleCols(c0, w);
        a0 = ((batch.middleRows(c0, w).transpose().colwise() - norm.input_shift).array().colwise() *
              inv_scale.array())
                 .matrix();
        for (int l = 0; l < depth; ++l) {
            const auto& layer = model.layers()[static_cast<std::size_t>(l)];
            auto z = cache.pre_activations[static_cast<std::size_t>(l)].middleCols(c0, w);
            z.noalias() = layer.weights * cache.activations[static_cast<std::size_t>(l)].middleCols(c0, w);
            z.colwise() += layer.bias;
            if (l + 1 < depth) {
                auto a = cache.activations[static_cast<std::size_t>(l + 1)].middleCols(c0, w);
                a = z;
                activate_inplace(model.hidden_activation(), a);
            }
        }
        cache.output.segment(c0, w) =
            (cache.pre_activations.back().middleCols(c0, w).row(0).transpose().array() * norm.output_scale +
             norm.output_shift)
                .matrix();
    }
    return cache;
}

Eigen::VectorXd predict(const Mlp& model, const Eigen::Ref<const InputBatch>& batch, int workers) {
    check_batch(model, batch.cols());
    const Eigen::Index m = batch.rows();
    const auto& norm = model.normalization();
    Eigen::VectorXd out(m);
    const Eigen::Index chunks = chunk_count(m);
    const int threads = resolve_threads(workers);
    const Eigen::VectorXd inv_scale = norm.input_scale.cwiseInverse();
#pragma omp parallel for schedule(static, 1) num_threads(threads) if (threads > 1 && chunks > 1)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        const Eigen::Index c0 = c * kColumnsPerChunk;
        const Eigen::Index w = std::min(kColumnsPerChunk, m - c0);
        Eigen::MatrixXd a = ((batch.middleRows(c0, w).transpose().colwise() - norm.input_shift).array().colwise() *
                             inv_scale.array())
                                .matrix();
        Eigen::MatrixXd z;
        for (int l = 0; l < model.depth(); ++l) {
            const auto& layer = model.layers()[static_cast<std::size_t>(l)];
            z.noalias() = layer.weights * a;
            z.colwise() += layer.bias;
            if (l + 1 < model.depth()) {
                activate_inplace(model.hidden_activation(), z);
                a.swap(z);
            }
        }
        out.segment(c0, w) = (z.row(0).transpose().array() * norm.output_scale + norm.output_shift).matrix();
    }
    return out;
}

Gradients Gradients::zeros_like(const Mlp& model) {
    Gradients g;
    for (const auto& l : model.layers()) {
        g.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return g;
}

bool Gradients::all_finite() const {
    return std::all_of(weights.begin(), weights.end(), [](const auto& w) { return w.allFinite(); }) &&
           std::all_of(biases.begin(), biases.end(), [](const auto& b) { return b.allFinite(); });
}

Gradients backward(const Mlp& model, const ForwardCache& cache, const Eigen::Ref<const Eigen::VectorXd>& labels,
                   LossKind kind, int workers) {
    if (cache.layer_dims != model.layer_dims()) throw ContractError("backward: cache was built for another geometry");
    if (cache.revision != model.revision()) {
        throw ContractError("backward: stale cache (model revision " + std::to_string(model.revision()) +
                            ", cache revision " + std::to_string(cache.revision) + ")");
    }
    const Eigen::Index m = cache.batch_size();
    if (labels.size() != m) {
        throw ContractError("backward: " + std::to_string(labels.size()) + " labels for a batch of " +
                            std::to_string(m));
    }
    if (m < 1) throw DomainError("backward: empty batch");

    const int depth = model.depth();
    const int threads = resolve_threads(workers);
    const double inv_m = 1.0 / static_cast<double>(m);
    const double out_scale = model.normalization().output_scale;
    Gradients g = Gradients::zeros_like(model);

    // dZ for the linear output layer.
    Eigen::MatrixXd dz(1, m);
    for (Eigen::Index j = 0; j < m; ++j) dz(0, j) = loss_derivative(cache.output(j), labels(j), kind) * out_scale;

    constexpr Eigen::Index kRowsPerBlock = 64;
    const Eigen::Index col_chunks = chunk_count(m);
    for (int l = depth; l >= 1; --l) {
        const auto li = static_cast<std::size_t>(l - 1);
        const Eigen::MatrixXd& a_prev = cache.activations[li];
        const Eigen::Index rows = dz.rows();
        const Eigen::Index row_blocks = (rows + kRowsPerBlock - 1) / kRowsPerBlock;
#pragma omp parallel for schedule(static, 1) num_threads(threads) if (threads > 1 && row_blocks > 1)
        for (Eigen::Index rb = 0; rb < row_blocks; ++rb) {
            const Eigen::Index r0 = rb * kRowsPerBlock;
            const Eigen::Index rn = std::min(kRowsPerBlock, rows - r0);
            g.weights[li].middleRows(r0, rn).noalias() = dz.middleRows(r0, rn) * a_prev.transpose();
            g.weights[li].middleRows(r0, rn) *= inv_m;
            g.biases[li].segment(r0, rn) = dz.middleRows(r0, rn).rowwise().sum() * inv_m;
        }
        if (l == 1) break;

        const Eigen::MatrixXd& w = model.layers()[li].weights;
        Eigen::MatrixXd dz_prev(w.cols(), m);
#pragma omp parallel for schedule(static, 1) num_threads(threads) if (threads > 1 && col_chunks > 1)
        for (Eigen::Index c = 0; c < col_chunks; ++c) {
            const Eigen::Index c0 = c * kColumnsPerChunk;
            const Eigen::Index cw = std::min(kColumnsPerChunk, m - c0);
            dz_prev.middleCols(c0, cw).noalias() = w.transpose() * dz.middleCols(c0, cw);
            scale_by_derivative(model.hidden_activation(), cache.pre_activations[li - 1].middleCols(c0, cw),
                                dz_prev.middleCols(c0, cw));
        }
        dz.swap(dz_prev);
    }
    return g;
}

Eigen::VectorXd forward_reference(const Mlp& model, const Eigen::Ref<const InputBatch>& batch) {
    check_batch(model, batch.cols());
    const auto& norm = model.normalization();
    Eigen::VectorXd out(batch.rows());
    for (Eigen::Index s = 0; s < batch.rows(); ++s) {
        std::vector<double> a(static_cast<std::size_t>(batch.cols()));
        for (Eigen::Index j = 0; j < batch.cols(); ++j) {
            a[static_cast<std::size_t>(j)] = (batch(s, j) - norm.input_shift(j)) / norm.input_scale(j);
        }
        for (int l = 0; l < model.depth(); ++l) {
            const auto& layer = model.layers()[static_cast<std::size_t>(l)];
            std::vector<double> z(static_cast<std::size_t>(layer.weights.rows()));
            for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
                double acc = layer.bias(i);
                for (Eigen::Index k = 0; k < layer.weights.cols(); ++k) acc += layer.weights(i, k) * a[static_cast<std::size_t>(k)];
                z[static_cast<std::size_t>(i)] = l + 1 < model.depth() ? act::apply(model.hidden_activation(), acc) : acc;
            }
            a.swap(z);
        }
        out(s) = a[0] * norm.output_scale + norm.output_shift;
    }
    return out;
}

Gradients backward_reference(const Mlp& model, const Eigen::Ref<const InputBatch>& batch,
                             const Eigen::Ref<const Eigen::VectorXd>& labels, LossKind kind) {
    check_batch(model, batch.cols());
    if (labels.size() != batch.rows()) throw ContractError("backward_reference: label count differs from batch");
    const auto& norm = model.normalization();
    const int depth = model.depth();
    Gradients g = Gradients::zeros_like(model);
    for (Eigen::Index s = 0; s < batch.rows(); ++s) {
        std::vector<std::vector<double>> a(static_cast<std::size_t>(depth));
        std::vector<std::vector<double>> z(static_cast<std::size_t>(depth));
        a[0].resize(static_cast<std::size_t>(batch.cols()));
        for (Eigen::Index j = 0; j < batch.cols(); ++j) {
            a[0][static_cast<std::size_t>(j)] = (batch(s, j) - norm.input_shift(j)) / norm.input_scale(j);
        }
        for (int l = 0; l < depth; ++l) {
            const auto& layer = model.layers()[static_cast<std::size_t>(l)];
            auto& zl = z[static_cast<std::size_t>(l)];
            zl.assign(static_cast<std::size_t>(layer.weights.rows()), 0.0);
            for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
                double acc = layer.bias(i);
                for (Eigen::Index k = 0; k < layer.weights.cols(); ++k) {
                    acc += layer.weights(i, k) * a[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)];
                }
                zl[static_cast<std::size_t>(i)] = acc;
            }
            if (l + 1 < depth) {
                auto& next = a[static_cast<std::size_t>(l + 1)];
                next.resize(zl.size());
                for (std::size_t i = 0; i < zl.size(); ++i) next[i] = act::apply(model.hidden_activation(), zl[i]);
            }
        }
        const double y = z.back()[0] * norm.output_scale + norm.output_shift;
        std::vector<double> dz{loss_derivative(y, labels(s), kind) * norm.output_scale};
        for (int l = depth - 1; l >= 0; --l) {
            const auto li = static_cast<std::size_t>(l);
            const auto& layer = model.layers()[li];
            for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
                g.biases[li](i) += dz[static_cast<std::size_t>(i)];
                for (Eigen::Index k = 0; k < layer.weights.cols(); ++k) {
                    g.weights[li](i, k) += dz[static_cast<std::size_t>(i)] * a[li][static_cast<std::size_t>(k)];
                }
            }
            if (l == 0) break;
            std::vector<double> dprev(static_cast<std::size_t>(layer.weights.cols()), 0.0);
            for (Eigen::Index k = 0; k < layer.weights.cols(); ++k) {
                double acc = 0.0;
                for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) acc += layer.weights(i, k) * dz[static_cast<std::size_t>(i)];
                dprev[static_cast<std::size_t>(k)] =
                    acc * act::derivative(model.hidden_activation(), z[li - 1][static_cast<std::size_t>(k)]);
            }
            dz.swap(dprev);
        }
    }
    const double inv_m = 1.0 / static_cast<double>(batch.rows());
    for (auto& w : g.weights) w *= inv_m;
    for (auto& b : g.biases) b *= inv_m;
    return g;
}

MlpF32::MlpF32(const Mlp& model)
    : input_width_(model.input_width()),
      hidden_(model.hidden_activation()),
      input_shift_(model.normalization().input_shift.cast<float>()),
      input_inv_scale_(model.normalization().input_scale.cwiseInverse().cast<float>()),
      output_shift_(static_cast<float>(model.normalization().output_shift)),
      output_scale_(static_cast<float>(model.normalization().output_scale)) {
    for (const auto& l : model.layers()) {
        weights_.push_back(l.weights.cast<float>());
        biases_.push_back(l.bias.cast<float>());
    }
}

Eigen::VectorXf MlpF32::predict(const Eigen::Ref<const InputBatchF>& batch, int workers) const {
    if (batch.cols() != input_width_) {
        throw ShapeError("layer 1: batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                         std::to_string(input_width_));
    }
    const Eigen::Index m = batch.rows();
    Eigen::VectorXf out(m);
    const Eigen::Index chunks = chunk_count(m);
    const int threads = resolve_threads(workers);
    const auto depth = weights_.size();
#pragma omp parallel for schedule(static, 1) num_threads(threads) if (threads > 1 && chunks > 1)
    for (Eigen::Index c = 0; c < chunks; ++c) {
        const Eigen::Index c0 = c * kColumnsPerChunk;
        const Eigen::Index w = std::min(kColumnsPerChunk, m - c0);
        Eigen::MatrixXf a =
            ((batch.middleRows(c0, w).transpose().colwise() - input_shift_).array().colwise() * input_inv_scale_.array())
                .matrix();
        Eigen::MatrixXf z;
        for (std::size_t l = 0; l < depth; ++l) {
            z.noalias() = weights_[l] * a;
            z.colwise() += biases_[l];
            if (l + 1 < depth) {
                activate_inplace(hidden_, z);
                a.swap(z);
            }
        }
        out.segment(c0, w) = (z.row(0).transpose().array() * output_scale_ + output_shift_).matrix();
    }
    return out;
}

}  // namespace deepbasket
