#include "deepbasket/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "deepbasket/binary_io.hpp"
#include "deepbasket/checkpoint.hpp"
#include "deepbasket/dataset.hpp"
#include "deepbasket/errors.hpp"
#include "deepbasket/eval_bench.hpp"
#include "deepbasket/mc_engine.hpp"
#include "deepbasket/neural_net.hpp"
#include "deepbasket/random.hpp"
#include "deepbasket/trainer.hpp"

namespace deepbasket {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

// Config keys may spell option names with underscores (label_paths = 200).
class UnderscoreConfig : public CLI::ConfigTOML {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigTOML::from_config(input);
        for (auto& item : items) std::replace(item.name.begin(), item.name.end(), '_', '-');
        return items;
    }
};

struct PlanOptions {
    SamplingPlan plan;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--n-assets", plan.n_assets, "Assets per basket")->capture_default_str();
        cmd.add_option("--spot-log-mean", plan.spot_log_mean, "Mean of log(F/scale)")->capture_default_str();
        cmd.add_option("--spot-log-sd", plan.spot_log_sd, "Standard deviation of log(F/scale)")->capture_default_str();
        cmd.add_option("--spot-scale", plan.spot_scale, "Forward price scale")->capture_default_str();
        cmd.add_option("--vol-low", plan.vol_low)->capture_default_str();
        cmd.add_option("--vol-high", plan.vol_high)->capture_default_str();
        cmd.add_option("--maturity-u-low", plan.maturity_u_low, "Maturity is u^2 days, u uniform")->capture_default_str();
        cmd.add_option("--maturity-u-high", plan.maturity_u_high)->capture_default_str();
        cmd.add_option("--corr-beta-a", plan.corr_beta_a)->capture_default_str();
        cmd.add_option("--corr-beta-b", plan.corr_beta_b)->capture_default_str();
        cmd.add_option("--strike", plan.strike)->capture_default_str();
        cmd.add_option("--seed", plan.seed, "Sampling seed")->capture_default_str();
    }
};

struct TrainOptions {
    TrainConfig cfg;
    int width = 300;
    int layers = 6;
    std::string activation = "relu";
    std::string loss = "mse";
    std::uint64_t init_seed = 1;
    bool no_normalize = false;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--width", width, "Nodes per hidden layer")->capture_default_str();
        cmd.add_option("--layers", layers, "Hidden layers")->capture_default_str();
        cmd.add_option("--activation", activation, "relu|leaky_relu|tanh|sigmoid")->capture_default_str();
        cmd.add_option("--loss", loss, "mse|l1")->capture_default_str();
        cmd.add_option("--init-seed", init_seed)->capture_default_str();
        cmd.add_flag("--no-normalize", no_normalize, "Skip input/output standardization");
        cmd.add_option("--batch-size", cfg.batch_size)->capture_default_str();
        cmd.add_option("--max-iterations", cfg.max_iterations)->capture_default_str();
        cmd.add_option("--eval-every", cfg.eval_every)->capture_default_str();
        cmd.add_option("--patience", cfg.patience, "Evaluations without a new test minimum")->capture_default_str();
        cmd.add_option("--shuffle-seed", cfg.shuffle_seed)->capture_default_str();
        cmd.add_option("--eval-cap", cfg.eval_cap)->capture_default_str();
        cmd.add_option("--learning-rate", cfg.adam.learning_rate)->capture_default_str();
        cmd.add_option("--beta1", cfg.adam.beta1)->capture_default_str();
        cmd.add_option("--beta2", cfg.adam.beta2)->capture_default_str();
        cmd.add_option("--epsilon", cfg.adam.epsilon)->capture_default_str();
    }

    TrainConfig resolved(int workers) const {
        TrainConfig c = cfg;
        c.loss = parse_loss(loss);
        c.workers = workers;
        c.validate();
        return c;
    }
};

struct Manifest {
    std::string command;
    std::string effective_config;
    json seeds = json::object();
    json outputs = json::array();
    json extra = json::object();
    std::uint64_t total_mc_paths = 0;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void write(const fs::path& path) const {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(fnv1a64(effective_config)));
        json j;
        j["tool"] = "deepbasket";
        j["config_version"] = kConfigVersion;
        j["dataset_format_version"] = kDatasetVersion;
        j["checkpoint_format_version"] = kCheckpointVersion;
        j["command"] = command;
        j["config_hash"] = hash;
        j["config"] = effective_config;
        j["seeds"] = seeds;
        j["total_mc_paths"] = total_mc_paths;
        j["outputs"] = outputs;
        if (!extra.empty()) j["results"] = extra;
        j["finished_unix"] = static_cast<std::int64_t>(std::time(nullptr));
        j["wall_seconds"] = wall;
        const std::string text = j.dump(2) + "\n";
        write_file_atomically(path, std::span<const unsigned char>(
                                        reinterpret_cast<const unsigned char*>(text.data()), text.size()));
    }
};

void require_file(const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string(what) + " path is required");
    if (!fs::exists(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

fs::path default_manifest(const fs::path& anchor) { return fs::path(anchor.string() + ".manifest.json"); }

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
}

Dataset load_data(const fs::path& p) {
    require_file(p, "dataset");
    return read_dataset(p).data;
}

// Parses "a,b,c" into doubles.
std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            row.push_back(std::stod(cell, &used));
            while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::logic_error&) {
            throw ConfigError("inputs line " + std::to_string(line_no) + ": not a number: '" + cell + "'");
        }
    }
    return row;
}

std::vector<std::string> range_warnings(const BasketSpec& spec, const SamplingPlan& plan) {
    std::vector<std::string> w;
    const double lo_f = plan.spot_scale * std::exp(plan.spot_log_mean - 4.0 * plan.spot_log_sd);
    const double hi_f = plan.spot_scale * std::exp(plan.spot_log_mean + 4.0 * plan.spot_log_sd);
    for (std::size_t i = 0; i < spec.forwards.size(); ++i) {
        if (spec.forwards[i] < lo_f || spec.forwards[i] > hi_f) {
            w.push_back("forward[" + std::to_string(i) + "]=" + std::to_string(spec.forwards[i]) +
                        " is outside the training range [" + std::to_string(lo_f) + ", " + std::to_string(hi_f) + "]");
        }
        if (spec.vols[i] < plan.vol_low || spec.vols[i] > plan.vol_high) {
            w.push_back("vol[" + std::to_string(i) + "]=" + std::to_string(spec.vols[i]) +
                        " is outside the training range");
        }
    }
    const double lo_t = plan.maturity_u_low * plan.maturity_u_low;
    const double hi_t = plan.maturity_u_high * plan.maturity_u_high;
    if (spec.maturity_days < lo_t || spec.maturity_days > hi_t) {
        w.push_back("maturity " + std::to_string(spec.maturity_days) + " days is outside the training range [" +
                    std::to_string(lo_t) + ", " + std::to_string(hi_t) + "]");
    }
    return w;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Worst-of basket option pricing by Monte Carlo and neural-network surrogates"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI/TOML config file; command-line flags override it");
    app.config_formatter(std::make_shared<UnderscoreConfig>());
    app.allow_config_extras(CLI::config_extras_mode::error);
    int config_version = kConfigVersion;
    app.add_option("--config-version", config_version, "Config schema version")->capture_default_str();
    int workers = 0;
    app.add_option("--workers", workers, "Worker threads (0 = OpenMP default)")->capture_default_str();

    // generate ---------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "Sample basket specs and label them with MC prices");
    PlanOptions gen_plan;
    gen_plan.add_to(*gen);
    GenerateOptions gen_opts;
    std::string gen_preset;
    fs::path gen_out;
    fs::path gen_manifest;
    gen->add_option("--out", gen_out, "Output dataset file")->required();
    gen->add_option("--manifest", gen_manifest, "Manifest path (default <out>.manifest.json)");
    gen->add_option("--preset", gen_preset, "A', B' or C' (sets count and label paths)");
    gen->add_option("--count", gen_opts.count)->capture_default_str();
    gen->add_option("--label-paths", gen_opts.label_paths)->capture_default_str();
    gen->add_flag("--antithetic", gen_opts.antithetic);
    gen->add_flag("--reject-zero-value", gen_opts.reject_zero_value, "Resample specs whose label is exactly 0");
    gen->add_option("--created-unix", gen_opts.created_unix, "Timestamp stored in the file header")
        ->capture_default_str();

    // train ------------------------------------------------------------------
    auto* trn = app.add_subcommand("train", "Train an MLP surrogate on a dataset");
    TrainOptions trn_opts;
    trn_opts.add_to(*trn);
    fs::path trn_data;
    fs::path trn_test;
    SplitSpec trn_split;
    fs::path trn_ckpt;
    fs::path trn_curve;
    fs::path trn_resume;
    trn->add_option("--data", trn_data, "Training dataset (split when --test-data is absent)")->required();
    trn->add_option("--test-data", trn_test, "Held-out dataset for test loss");
    trn->add_option("--split-seed", trn_split.seed)->capture_default_str();
    trn->add_option("--checkpoint", trn_ckpt, "Best-model checkpoint output")->required();
    trn->add_option("--curve", trn_curve, "Learning-curve CSV (default <checkpoint>.curve.csv)");
    trn->add_option("--resume", trn_resume, "Continue from a checkpoint holding optimizer state");

    // sweep ------------------------------------------------------------------
    auto* swp = app.add_subcommand("sweep", "Learning-capacity sweep over widths and datasets");
    TrainOptions swp_opts;
    swp_opts.add_to(*swp);
    std::vector<fs::path> swp_data;
    std::vector<int> swp_widths{200, 300, 400, 500, 600};
    fs::path swp_test;
    fs::path swp_dir = "sweep";
    swp->add_option("--data", swp_data, "Training datasets")->required();
    swp->add_option("--widths", swp_widths)->capture_default_str();
    swp->add_option("--test-data", swp_test, "Shared held-out dataset")->required();
    swp->add_option("--out-dir", swp_dir)->capture_default_str();

    // evaluate ---------------------------------------------------------------
    auto* evl = app.add_subcommand("evaluate", "Error histograms against oracle labels");
    fs::path evl_test;
    fs::path evl_ckpt;
    std::vector<std::uint32_t> evl_ladder;
    bool evl_self = false;
    std::uint64_t evl_stream = 2;
    std::size_t evl_bins = kDefaultHistogramBins;
    fs::path evl_dir = "evaluation";
    bool evl_audit = false;
    PlanOptions evl_plan;
    evl_plan.add_to(*evl);
    evl->add_option("--test-data", evl_test, "Dataset whose labels are the oracle")->required();
    evl->add_option("--checkpoint", evl_ckpt, "Model to evaluate");
    evl->add_option("--mc-paths", evl_ladder, "MC estimators to evaluate, e.g. 10000 100000 1000000");
    evl->add_flag("--oracle-self", evl_self, "Evaluate the oracle against itself");
    evl->add_option("--stream", evl_stream, "Label substream for MC estimators")->capture_default_str();
    evl->add_option("--bins", evl_bins)->capture_default_str();
    evl->add_option("--out-dir", evl_dir)->capture_default_str();
    evl->add_flag("--tail-audit", evl_audit, "Locate the worst 1% errors in the training distribution");

    // price ------------------------------------------------------------------
    auto* prc = app.add_subcommand("price", "Price baskets by model and/or MC");
    fs::path prc_ckpt;
    fs::path prc_inputs;
    std::vector<std::string> prc_inline;
    std::uint64_t prc_paths = 0;
    std::uint64_t prc_seed = 0;
    bool prc_antithetic = false;
    PlanOptions prc_plan;
    prc_plan.add_to(*prc);
    prc->add_option("--checkpoint", prc_ckpt, "Model checkpoint");
    prc->add_option("--inputs", prc_inputs, "CSV of input rows (forwards, vols, correlations, maturity days)");
    prc->add_option("--spec", prc_inline, "Inline comma-separated input row (repeatable)");
    prc->add_option("--mc-paths", prc_paths, "MC paths (0 disables MC)")->capture_default_str();
    prc->add_option("--mc-seed", prc_seed)->capture_default_str();
    prc->add_flag("--antithetic", prc_antithetic);

    // bench ------------------------------------------------------------------
    auto* bch = app.add_subcommand("bench", "Inference throughput versus MC pricing time");
    fs::path bch_ckpt;
    fs::path bch_data;
    std::size_t bch_batch = 20'000;
    ThroughputOptions bch_opts;
    std::string bch_precision = "f32";
    std::uint64_t bch_paths = 10'000;
    std::size_t bch_specs = 50;
    fs::path bch_dir = "bench";
    PlanOptions bch_plan;
    bch_plan.add_to(*bch);
    bch->add_option("--checkpoint", bch_ckpt)->required();
    bch->add_option("--data", bch_data, "Input source (default: sampled from the plan)");
    bch->add_option("--batch", bch_batch)->capture_default_str();
    bch->add_option("--repetitions", bch_opts.repetitions)->capture_default_str();
    bch->add_option("--warmup", bch_opts.warmup)->capture_default_str();
    bch->add_option("--precision", bch_precision, "f32|f64")->capture_default_str();
    bch->add_option("--mc-paths", bch_paths)->capture_default_str();
    bch->add_option("--mc-specs", bch_specs, "Specs timed for the MC comparison")->capture_default_str();
    bch->add_option("--out-dir", bch_dir)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::Config);
    }

    try {
        if (config_version != kConfigVersion) {
            throw ConfigError("config_version " + std::to_string(config_version) + " is not supported (expected " +
                              std::to_string(kConfigVersion) + ")");
        }
        CLI::App* used = app.get_subcommands().front();
        Manifest manifest;
        manifest.command = used->get_name();
        manifest.effective_config = used->config_to_str(true, false);

        if (used == gen) {
            if (!gen_preset.empty()) {
                const auto preset = find_preset(gen_preset);
                if (!preset) throw ConfigError("generate.preset: unknown preset '" + gen_preset + "'");
                gen_opts.count = preset->count;
                gen_opts.label_paths = preset->label_paths;
                manifest.effective_config += "preset_count=" + std::to_string(preset->count) + "\n";
            }
            gen_opts.workers = workers;
            gen_plan.plan.validate();
            const auto header = generate(gen_plan.plan, gen_opts, gen_out);
            manifest.seeds["plan"] = gen_plan.plan.seed;
            manifest.total_mc_paths = header.count * header.label_paths;
            manifest.outputs.push_back(gen_out.string());
            manifest.write(gen_manifest.empty() ? default_manifest(gen_out) : gen_manifest);
            std::cout << "wrote " << header.count << " samples (" << header.label_paths << " paths each) to "
                      << gen_out.string() << "\n";
        } else if (used == trn) {
            const TrainConfig cfg = trn_opts.resolved(workers);
            Dataset train_set;
            Dataset test_set;
            if (trn_test.empty()) {
                auto parts = split(load_data(trn_data), trn_split);
                train_set = std::move(parts.train);
                test_set = std::move(parts.test);
            } else {
                train_set = load_data(trn_data);
                test_set = load_data(trn_test);
            }
            std::optional<AdamState> resume_state;
            std::uint64_t start = 0;
            Mlp model = make_model(train_set, trn_opts.width, trn_opts.layers, parse_activation(trn_opts.activation),
                                   trn_opts.init_seed, !trn_opts.no_normalize);
            if (!trn_resume.empty()) {
                require_file(trn_resume, "resume checkpoint");
                Checkpoint ck = load_checkpoint(trn_resume);
                if (!ck.optimizer) throw ConfigError("train.resume: checkpoint has no optimizer state");
                model = std::move(ck.model);
                resume_state = std::move(ck.optimizer);
                start = ck.iteration;
            }
            TrainResult result = train(std::move(model), train_set, test_set, cfg, resume_state, start);
            // The saved checkpoint carries the final optimizer state so a resume
            // continues the trajectory; the best parameters go to a sibling file.
            save_checkpoint(trn_ckpt, Checkpoint{result.best_model, result.report.best_iteration, std::nullopt});
            const fs::path last = fs::path(trn_ckpt.string() + ".last");
            save_checkpoint(last, Checkpoint{result.final_model, result.report.final_iteration, result.optimizer});
            const fs::path curve = trn_curve.empty() ? fs::path(trn_ckpt.string() + ".curve.csv") : trn_curve;
            result.report.write_csv(curve);
            manifest.seeds["init"] = trn_opts.init_seed;
            manifest.seeds["shuffle"] = cfg.shuffle_seed;
            manifest.seeds["split"] = trn_split.seed;
            manifest.outputs = {trn_ckpt.string(), last.string(), curve.string()};
            manifest.extra["best_iteration"] = result.report.best_iteration;
            manifest.extra["best_test_loss"] = result.report.best_test_loss;
            manifest.extra["final_iteration"] = result.report.final_iteration;
            manifest.extra["stopped_early"] = result.report.stopped_early;
            manifest.write(default_manifest(trn_ckpt));
            std::cout << "best test loss " << result.report.best_test_loss << " at iteration "
                      << result.report.best_iteration << " (stopped at " << result.report.final_iteration << ")\n";
        } else if (used == swp) {
            SweepConfig cfg;
            cfg.widths = swp_widths;
            cfg.hidden_layers = swp_opts.layers;
            cfg.activation = parse_activation(swp_opts.activation);
            cfg.init_seed = swp_opts.init_seed;
            cfg.normalize_inputs = !swp_opts.no_normalize;
            cfg.train = swp_opts.resolved(workers);
            std::vector<Dataset> owned;
            owned.reserve(swp_data.size());
            std::vector<SweepDataset> sets;
            for (const auto& p : swp_data) owned.push_back(load_data(p));
            for (std::size_t i = 0; i < swp_data.size(); ++i) sets.push_back({swp_data[i].stem().string(), &owned[i]});
            const Dataset test_set = load_data(swp_test);
            fs::create_directories(swp_dir);
            const auto runs = learning_capacity_sweep(cfg, sets, test_set);
            int failures = 0;
            for (const auto& run : runs) {
                const std::string tag = run.dataset + "_w" + std::to_string(run.width);
                if (run.report) {
                    const fs::path out = swp_dir / (tag + ".csv");
                    run.report->write_csv(out);
                    manifest.outputs.push_back(out.string());
                    std::cout << tag << ": best test loss " << run.report->best_test_loss << "\n";
                } else {
                    ++failures;
                    std::cerr << tag << ": failed: " << run.error << "\n";
                }
            }
            manifest.seeds["init"] = cfg.init_seed;
            manifest.seeds["shuffle"] = cfg.train.shuffle_seed;
            manifest.write(swp_dir / "manifest.json");
            if (failures > 0) return static_cast<int>(ExitCode::Failure);
        } else if (used == evl) {
            const Dataset test_set = load_data(evl_test);
            if (evl_ckpt.empty() && evl_ladder.empty() && !evl_self) {
                throw ConfigError("evaluate: give --checkpoint, --mc-paths or --oracle-self");
            }
            fs::create_directories(evl_dir);
            std::vector<ErrorReport> reports;
            if (evl_self) reports.push_back(error_report("oracle_self", test_set.labels(), test_set.labels(), evl_bins));
            if (!evl_ckpt.empty()) {
                require_file(evl_ckpt, "checkpoint");
                reports.push_back(evaluate_model(load_checkpoint(evl_ckpt).model, test_set, workers, evl_bins));
            }
            for (std::uint32_t paths : evl_ladder) {
                reports.push_back(evaluate_mc(test_set, paths, evl_stream, workers, evl_bins));
                manifest.total_mc_paths += static_cast<std::uint64_t>(paths) * test_set.size();
            }
            for (const auto& r : reports) {
                r.write_csv(evl_dir / (r.estimator + "_errors.csv"));
                r.write_histogram_csv(evl_dir / (r.estimator + "_histogram.csv"));
                write_text(evl_dir / (r.estimator + "_summary.txt"), r.summary_text());
                manifest.outputs.push_back((evl_dir / (r.estimator + "_summary.txt")).string());
                manifest.extra[r.estimator] = {{"rmse", r.summary.rmse}, {"mae", r.summary.mae},
                                               {"mean", r.summary.mean}};
                std::cout << r.summary_text() << "\n";
            }
            if (evl_ladder.size() > 1) {
                std::ostringstream os;
                os << "path ladder RMSE ratios (expected sqrt of path ratio):\n";
                for (std::size_t i = 0; i + 1 < evl_ladder.size(); ++i) {
                    const auto& a = reports[reports.size() - evl_ladder.size() + i];
                    const auto& b = reports[reports.size() - evl_ladder.size() + i + 1];
                    os << "  " << evl_ladder[i] << " -> " << evl_ladder[i + 1] << ": "
                       << a.summary.rmse / b.summary.rmse << " (expected "
                       << std::sqrt(static_cast<double>(evl_ladder[i + 1]) / evl_ladder[i]) << ")\n";
                }
                write_text(evl_dir / "ladder.txt", os.str());
                std::cout << os.str();
            }
            if (evl_audit) {
                if (evl_ckpt.empty()) throw ConfigError("evaluate.tail-audit needs --checkpoint");
                const auto dist = TrainingDistribution::from_plan(evl_plan.plan);
                const auto& model_report = reports[evl_self ? 1 : 0];
                const auto audit = tail_audit(model_report, test_set, dist);
                audit.write_csv(evl_dir / "tail_audit.csv");
                write_text(evl_dir / "tail_audit.txt", audit.summary_text());
                std::cout << audit.summary_text();
            }
            manifest.seeds["stream"] = evl_stream;
            manifest.write(evl_dir / "manifest.json");
        } else if (used == prc) {
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < prc_inline.size(); ++i) rows.push_back(parse_row(prc_inline[i], i + 1));
            if (!prc_inputs.empty()) {
                require_file(prc_inputs, "inputs");
                std::ifstream in(prc_inputs);
                std::string line;
                std::size_t no = 0;
                while (std::getline(in, line)) {
                    ++no;
                    if (line.empty() || line[0] == '#') continue;
                    if (no == 1 && std::isalpha(static_cast<unsigned char>(line[0]))) continue;  // header
                    rows.push_back(parse_row(line, no));
                }
            }
            if (rows.empty()) throw ConfigError("price: no inputs (use --spec or --inputs)");
            if (prc_ckpt.empty() && prc_paths == 0) throw ConfigError("price: give --checkpoint and/or --mc-paths");
            const SamplingPlan& plan = prc_plan.plan;
            std::optional<Mlp> model;
            if (!prc_ckpt.empty()) {
                require_file(prc_ckpt, "checkpoint");
                model = load_checkpoint(prc_ckpt).model;
            }
            InputBatch batch(static_cast<Eigen::Index>(rows.size()), input_width(plan.n_assets));
            std::vector<BasketSpec> specs;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i].size() != static_cast<std::size_t>(input_width(plan.n_assets))) {
                    throw ConfigError("price: row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                                      " values, a " + std::to_string(plan.n_assets) + "-asset basket needs " +
                                      std::to_string(input_width(plan.n_assets)));
                }
                auto spec = BasketSpec::from_inputs(plan.n_assets, rows[i], plan.strike);
                for (const auto& w : range_warnings(spec, plan)) {
                    std::cerr << "warning: row " << i + 1 << ": " << w << "\n";
                }
                for (std::size_t c = 0; c < rows[i].size(); ++c) {
                    batch(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
                }
                specs.push_back(std::move(spec));
            }
            Eigen::VectorXd model_values;
            if (model) model_values = predict(*model, batch, workers);
            std::printf("row");
            if (model) std::printf(",model");
            if (prc_paths > 0) std::printf(",mc,mc_std_error");
            if (model && prc_paths > 0) std::printf(",difference");
            std::printf("\n");
            for (std::size_t i = 0; i < specs.size(); ++i) {
                std::printf("%zu", i + 1);
                if (model) std::printf(",%.10g", model_values(static_cast<Eigen::Index>(i)));
                if (prc_paths > 0) {
                    McConfig mc;
                    mc.num_paths = prc_paths;
                    mc.seed = derive_seed(prc_seed, i);
                    mc.antithetic = prc_antithetic;
                    const McResult r = price(specs[i], mc, workers);
                    manifest.total_mc_paths += r.num_paths;
                    std::printf(",%.10g,%.6g", r.value, r.std_error);
                    if (model) std::printf(",%.6g", model_values(static_cast<Eigen::Index>(i)) - r.value);
                }
                std::printf("\n");
            }
        } else if (used == bch) {
            require_file(bch_ckpt, "checkpoint");
            if (bch_precision != "f32" && bch_precision != "f64") {
                throw ConfigError("bench.precision: expected f32 or f64, got '" + bch_precision + "'");
            }
            const Mlp model = load_checkpoint(bch_ckpt).model;
            Dataset source;
            if (!bch_data.empty()) {
                source = load_data(bch_data);
            } else {
                // Inputs only; MC timing draws its own paths, so labels are unused.
                source = Dataset(bch_plan.plan.n_assets, bch_plan.plan.strike);
                for (std::size_t i = 0; i < std::max(bch_batch, bch_specs); ++i) {
                    Sample s;
                    s.inputs = sample_spec(bch_plan.plan, i).to_inputs();
                    s.seed = sample_seed(bch_plan.plan, i);
                    source.push_back(s);
                }
            }
            if (source.size() < bch_batch) {
                throw ConfigError("bench: source has " + std::to_string(source.size()) + " samples, batch needs " +
                                  std::to_string(bch_batch));
            }
            bch_opts.workers = workers;
            bch_opts.single_precision = bch_precision == "f32";
            const Dataset batch = source.head(bch_batch);
            ThroughputReport report = throughput(model, batch.input_matrix(), bch_opts);
            const double mc_ns = time_mc_per_valuation(source, bch_specs, bch_paths, workers);
            attach_mc_comparison(report, bch_paths, mc_ns);
            manifest.total_mc_paths = bch_paths * std::min(bch_specs, source.size());
            fs::create_directories(bch_dir);
            report.write_csv(bch_dir / "throughput.csv");
            write_text(bch_dir / "throughput.txt", report.summary_text());
            manifest.extra["speedup"] = report.speedup;
            manifest.extra["valuations_per_sec"] = report.valuations_per_sec;
            manifest.outputs.push_back((bch_dir / "throughput.csv").string());
            manifest.write(bch_dir / "manifest.json");
            std::cout << report.summary_text();
        }
        return static_cast<int>(ExitCode::Ok);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(exit_code(e));
    }
}

}  // namespace deepbasket
