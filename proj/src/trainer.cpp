#include "deepbasket/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "deepbasket/errors.hpp"

namespace deepbasket {

namespace {

std::string format_record(const EvalRecord& r, bool with_time) {
    char buf[256];
    const int n = std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.17g",
                                static_cast<unsigned long long>(r.iteration), r.train_loss, r.test_loss,
                                r.min_train_loss, r.min_test_loss);
    std::string line(buf, static_cast<std::size_t>(n));
    if (with_time) {
        std::snprintf(buf, sizeof buf, ",%.3f", r.wall_ms);
        line += buf;
    }
    return line;
}

std::string norms_text(const Mlp& model) {
    std::ostringstream os;
    os << "[";
    const auto norms = model.layer_norms();
    for (std::size_t i = 0; i < norms.size(); ++i) os << (i ? ", " : "") << norms[i];
    os << "]";
    return os.str();
}

}  // namespace

void AdamConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("adam: learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ValidationError("adam: betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ValidationError("adam: epsilon must be > 0");
}

AdamState AdamState::for_model(const Mlp& model, AdamConfig config) {
    config.validate();
    AdamState s;
    s.config = config;
    for (const auto& l : model.layers()) {
        s.m_weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        s.v_weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        s.m_biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        s.v_biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return s;
}

bool AdamState::matches(const Mlp& model) const {
    if (m_weights.size() != model.layers().size()) return false;
    for (std::size_t l = 0; l < m_weights.size(); ++l) {
        const auto& layer = model.layers()[l];
        if (m_weights[l].rows() != layer.weights.rows() || m_weights[l].cols() != layer.weights.cols() ||
            v_weights[l].rows() != layer.weights.rows() || v_weights[l].cols() != layer.weights.cols() ||
            m_biases[l].size() != layer.bias.size() || v_biases[l].size() != layer.bias.size()) {
            return false;
        }
    }
    return true;
}

void adam_step(Mlp& model, const Gradients& grads, AdamState& state, std::uint64_t iteration) {
    if (!state.matches(model) || grads.weights.size() != model.layers().size() ||
        grads.biases.size() != model.layers().size()) {
        throw ShapeError("adam_step: gradient/optimiser shapes do not match the model");
    }
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        if (grads.weights[l].rows() != state.m_weights[l].rows() || grads.weights[l].cols() != state.m_weights[l].cols() ||
            grads.biases[l].size() != state.m_biases[l].size()) {
            throw ShapeError("adam_step: gradient shape mismatch in layer " + std::to_string(l + 1));
        }
    }
    if (!grads.all_finite()) {
        throw NumericalError("adam_step: non-finite gradient at iteration " + std::to_string(iteration));
    }

    const AdamConfig& c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);

    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
        param.array() -= c.learning_rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + c.epsilon);
    };
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        auto& layer = model.layers()[l];
        update(layer.weights, state.m_weights[l], state.v_weights[l], grads.weights[l]);
        update(layer.bias, state.m_biases[l], state.v_biases[l], grads.biases[l]);
    }
    model.touch();
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (eval_every < 1) throw ValidationError("train: eval_every must be >= 1");
    if (eval_cap < 1) throw ValidationError("train: eval_cap must be >= 1");
    adam.validate();
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "iteration,train_loss,test_loss,min_train_loss,min_test_loss,wall_ms\n";
    for (const auto& r : records) out << format_record(r, true) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::string TrainReport::deterministic_csv() const {
    std::string s = "iteration,train_loss,test_loss,min_train_loss,min_test_loss\n";
    for (const auto& r : records) s += format_record(r, false) + "\n";
    return s;
}

bool TrainReport::invariants_hold() const {
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].iteration <= records[i - 1].iteration) return false;
        if (records[i].min_train_loss > records[i - 1].min_train_loss) return false;
        if (records[i].min_test_loss > records[i - 1].min_test_loss) return false;
    }
    return true;
}

double dataset_loss(const Mlp& model, const Dataset& data, LossKind kind, std::size_t cap, int workers) {
    const std::size_t n = std::min(cap, data.size());
    if (n == 0) throw DomainError("dataset_loss: empty dataset");
    const auto inputs = data.input_matrix().topRows(static_cast<Eigen::Index>(n));
    const Eigen::VectorXd pred = predict(model, inputs, workers);
    return loss(std::span<const double>(pred.data(), n), std::span<const double>(data.labels().data(), n), kind);
}

TrainResult train(Mlp model, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                  std::optional<AdamState> resume, std::uint64_t start_iteration) {
    cfg.validate();
    if (train_set.empty() || test_set.empty()) throw ValidationError("train: train and test sets must be non-empty");
    if (model.input_width() != train_set.width() || model.input_width() != test_set.width()) {
        throw ShapeError("train: model input width " + std::to_string(model.input_width()) +
                         " does not match dataset width " + std::to_string(train_set.width()));
    }
    AdamState state = resume ? std::move(*resume) : AdamState::for_model(model, cfg.adam);
    if (!state.matches(model)) throw ShapeError("train: optimiser state does not match the model");

    MinibatchStream stream(train_set, cfg.batch_size, cfg.shuffle_seed);
    stream.skip(start_iteration);

    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result{model, model, state, {}};
    result.report.best_test_loss = std::numeric_limits<double>::infinity();
    double min_train = std::numeric_limits<double>::infinity();
    std::uint64_t evals_since_best = 0;
    std::uint64_t it = start_iteration;

    auto evaluate = [&](std::uint64_t iteration) {
        EvalRecord r;
        r.iteration = iteration;
        r.train_loss = dataset_loss(model, train_set, cfg.loss, cfg.eval_cap, cfg.workers);
        r.test_loss = dataset_loss(model, test_set, cfg.loss, cfg.eval_cap, cfg.workers);
        if (!std::isfinite(r.train_loss) || !std::isfinite(r.test_loss)) {
            throw NumericalError("train: non-finite evaluation loss at iteration " + std::to_string(iteration) +
                                 ", parameter norms " + norms_text(model));
        }
        min_train = std::min(min_train, r.train_loss);
        if (r.test_loss < result.report.best_test_loss) {
            result.report.best_test_loss = r.test_loss;
            result.report.best_iteration = iteration;
            result.best_model = model;
            evals_since_best = 0;
        } else {
            ++evals_since_best;
        }
        r.min_train_loss = min_train;
        r.min_test_loss = result.report.best_test_loss;
        r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        result.report.records.push_back(r);
    };

    while (it < cfg.max_iterations) {
        const Minibatch& batch = stream.next();
        ++it;
        const ForwardCache cache = forward(model, batch.inputs, cfg.workers);
        const double batch_loss = loss(std::span<const double>(cache.output.data(), cache.output.size()),
                                       std::span<const double>(batch.labels.data(), batch.labels.size()), cfg.loss);
        if (!std::isfinite(batch_loss)) {
            throw NumericalError("train: non-finite loss at iteration " + std::to_string(it) + " (epoch " +
                                 std::to_string(batch.epoch) + ", batch " + std::to_string(batch.batch_in_epoch) +
                                 "), parameter norms " + norms_text(model));
        }
        const Gradients grads = backward(model, cache, batch.labels, cfg.loss, cfg.workers);
        adam_step(model, grads, state, it);

        if (it % cfg.eval_every == 0 || it == cfg.max_iterations) {
            evaluate(it);
            if (cfg.patience > 0 && evals_since_best >= cfg.patience) {
                result.report.stopped_early = true;
                break;
            }
        }
    }
    if (result.report.records.empty()) evaluate(it);

    result.report.final_iteration = it;
    result.final_model = std::move(model);
    result.optimizer = std::move(state);
    return result;
}

Mlp make_model(const Dataset& train_set, int hidden_width, int hidden_layers, Activation activation,
               std::uint64_t init_seed, bool normalize_inputs) {
    Mlp model = initialize(make_layer_dims(train_set.width(), hidden_width, hidden_layers), activation, init_seed);
    if (normalize_inputs) model.normalization() = Normalization::fit(train_set.input_matrix(), train_set.labels());
    return model;
}

std::vector<SweepRun> learning_capacity_sweep(const SweepConfig& cfg, const std::vector<SweepDataset>& datasets,
                                              const Dataset& test_set) {
    std::vector<SweepRun> runs;
    for (const auto& ds : datasets) {
        for (int width : cfg.widths) {
            SweepRun run;
            run.dataset = ds.name;
            run.width = width;
            try {
                if (ds.train == nullptr) throw ValidationError("sweep: dataset '" + ds.name + "' is missing");
                Mlp model =
                    make_model(*ds.train, width, cfg.hidden_layers, cfg.activation, cfg.init_seed, cfg.normalize_inputs);
                run.report = train(std::move(model), *ds.train, test_set, cfg.train).report;
            } catch (const std::exception& e) {
                run.error = e.what();
            }
            runs.push_back(std::move(run));
        }
    }
    return runs;
}

}  // namespace deepbasket
