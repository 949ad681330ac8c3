#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deepbasket/dataset.hpp"
#include "deepbasket/neural_net.hpp"
#include "deepbasket/optimizer.hpp"

namespace deepbasket {

struct TrainConfig {
    std::size_t batch_size = 5'000;
    std::uint64_t max_iterations = 10'000;
    std::uint64_t eval_every = 100;
    // Stop after this many consecutive evaluations without a new best test loss.
    std::uint64_t patience = 20;
    std::uint64_t shuffle_seed = 1;
    // Train/test losses at each evaluation use at most this many samples.
    std::size_t eval_cap = 50'000;
    LossKind loss = LossKind::MSE;
    AdamConfig adam;
    int workers = 0;

    void validate() const;
};

struct EvalRecord {
    std::uint64_t iteration = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double min_train_loss = 0.0;
    double min_test_loss = 0.0;
    double wall_ms = 0.0;
};

struct TrainReport {
    std::vector<EvalRecord> records;
    std::uint64_t best_iteration = 0;
    double best_test_loss = 0.0;
    std::uint64_t final_iteration = 0;
    bool stopped_early = false;
    std::string checkpoint_path;

    // iteration,train_loss,test_loss,min_train_loss,min_test_loss,wall_ms
    void write_csv(const std::filesystem::path& path) const;
    // Same records without the wall-clock column (for determinism checks).
    std::string deterministic_csv() const;
    // Iterations strictly increasing; running minima non-increasing.
    bool invariants_hold() const;
};

struct TrainResult {
    Mlp best_model;   // parameters at the best test-loss evaluation
    Mlp final_model;  // parameters when training stopped
    AdamState optimizer;
    TrainReport report;
};

// Mini-batch Adam loop: stream_minibatches -> forward -> loss -> backward ->
// adam_step, evaluating train/test loss every cfg.eval_every iterations.
// When `resume` is given, the model continues from its iteration counter and
// optimiser moments. A non-finite loss throws NumericalError carrying the
// iteration, batch id and parameter norms.
TrainResult train(Mlp model, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                  std::optional<AdamState> resume = std::nullopt, std::uint64_t start_iteration = 0);

// Mean loss of the model over (at most `cap` leading samples of) a dataset.
double dataset_loss(const Mlp& model, const Dataset& data, LossKind kind, std::size_t cap, int workers = 0);

struct SweepDataset {
    std::string name;
    const Dataset* train = nullptr;
};

struct SweepRun {
    std::string dataset;
    int width = 0;
    std::optional<TrainReport> report;
    std::string error;  // set when the run failed
};

struct SweepConfig {
    std::vector<int> widths;
    int hidden_layers = 6;
    Activation activation = Activation::ReLU;
    std::uint64_t init_seed = 1;
    bool normalize_inputs = true;
    TrainConfig train;
};

// One training run per (dataset, width). A failing run is recorded and the
// sweep carries on.
std::vector<SweepRun> learning_capacity_sweep(const SweepConfig& cfg, const std::vector<SweepDataset>& datasets,
                                              const Dataset& test_set);

// Fresh model for a dataset: He-initialised, normalisation fitted to `train_set`
// (or identity when normalize_inputs is false).
Mlp make_model(const Dataset& train_set, int hidden_width, int hidden_layers, Activation activation,
               std::uint64_t init_seed, bool normalize_inputs = true);

}  // namespace deepbasket
