#include "deepbasket/eval_bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "deepbasket/errors.hpp"
#include "deepbasket/mc_engine.hpp"
#include "deepbasket/random.hpp"

namespace deepbasket {

namespace {

using Clock = std::chrono::steady_clock;

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    return out;
}

Histogram build_histogram(std::span<const double> sorted, std::size_t bins) {
    Histogram h;
    bins = std::max<std::size_t>(bins, 1);
    double lo = percentile_sorted(sorted, 0.1);
    double hi = percentile_sorted(sorted, 99.9);
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    h.lo = lo;
    h.bin_width = (hi - lo) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double e : sorted) {
        const double pos = std::floor((e - lo) / h.bin_width);
        const auto idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
        ++h.counts[idx];
    }
    return h;
}

}  // namespace

std::uint64_t Histogram::total() const noexcept { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

double percentile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw DomainError("percentile of an empty sample");
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto below = static_cast<std::size_t>(std::floor(pos));
    const std::size_t above = std::min(below + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(below);
    return sorted[below] + frac * (sorted[above] - sorted[below]);
}

ErrorReport error_report(std::string estimator, std::span<const double> estimates, std::span<const double> oracle,
                         std::size_t bins) {
    if (estimates.size() != oracle.size()) {
        throw ShapeError("error_report: " + std::to_string(estimates.size()) + " estimates vs " +
                         std::to_string(oracle.size()) + " oracle values");
    }
    if (estimates.empty()) throw DomainError("error_report: no samples");
    ErrorReport r;
    r.estimator = std::move(estimator);
    r.oracle.assign(oracle.begin(), oracle.end());
    r.estimate.assign(estimates.begin(), estimates.end());
    r.error.resize(estimates.size());
    double sum = 0.0;
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const double e = estimates[i] - oracle[i];
        if (!std::isfinite(e)) throw NumericalError("error_report: non-finite error at sample " + std::to_string(i));
        r.error[i] = e;
        sum += e;
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    const auto n = static_cast<double>(estimates.size());
    std::vector<double> sorted = r.error;
    std::sort(sorted.begin(), sorted.end());
    auto& s = r.summary;
    s.count = estimates.size();
    s.mean = sum / n;
    s.mae = abs_sum / n;
    s.rmse = std::sqrt(sq_sum / n);
    s.p1 = percentile_sorted(sorted, 1);
    s.p5 = percentile_sorted(sorted, 5);
    s.p50 = percentile_sorted(sorted, 50);
    s.p95 = percentile_sorted(sorted, 95);
    s.p99 = percentile_sorted(sorted, 99);
    r.histogram = build_histogram(sorted, bins);
    return r;
}

ErrorReport evaluate_model(const Mlp& model, const Dataset& oracle_set, int workers, std::size_t bins) {
    if (model.input_width() != oracle_set.width()) {
        throw ShapeError("evaluate_model: model expects " + std::to_string(model.input_width()) +
                         " inputs, test set has " + std::to_string(oracle_set.width()));
    }
    const Eigen::VectorXd pred = predict(model, oracle_set.input_matrix(), workers);
    ErrorReport r = error_report("model", std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                                 oracle_set.labels(), bins);
    const auto& se = oracle_set.label_std_errors();
    r.oracle_mean_std_error = std::accumulate(se.begin(), se.end(), 0.0) / static_cast<double>(se.size());
    return r;
}

ErrorReport evaluate_mc(const Dataset& oracle_set, std::uint32_t paths, std::uint64_t stream, int workers,
                        std::size_t bins) {
    if (stream == kLabelStream) throw ValidationError("evaluate_mc: estimator stream must differ from the label stream");
    const Dataset est = relabel(oracle_set, paths, stream, workers);
    ErrorReport r = error_report("mc_" + std::to_string(paths), est.labels(), oracle_set.labels(), bins);
    const auto& se = oracle_set.label_std_errors();
    r.oracle_mean_std_error = std::accumulate(se.begin(), se.end(), 0.0) / static_cast<double>(se.size());
    return r;
}

void ErrorReport::write_csv(const std::filesystem::path& path) const {
    auto out = open_csv(path);
    out << "index,oracle,estimate,error\n";
    for (std::size_t i = 0; i < error.size(); ++i) out << i << ',' << oracle[i] << ',' << estimate[i] << ',' << error[i] << '\n';
}

void ErrorReport::write_histogram_csv(const std::filesystem::path& path) const {
    auto out = open_csv(path);
    out << "bin_left,bin_right,count\n";
    for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
        out << histogram.bin_left(i) << ',' << histogram.bin_right(i) << ',' << histogram.counts[i] << '\n';
    }
}

std::string ErrorReport::summary_text() const {
    std::ostringstream os;
    os.precision(6);
    os << "estimator        " << estimator << "\n"
       << "samples          " << summary.count << "\n"
       << "mean error       " << summary.mean << "\n"
       << "MAE              " << summary.mae << "\n"
       << "RMSE             " << summary.rmse << "\n"
       << "p1/p5/p50        " << summary.p1 << " / " << summary.p5 << " / " << summary.p50 << "\n"
       << "p95/p99          " << summary.p95 << " / " << summary.p99 << "\n"
       << "oracle std error " << oracle_mean_std_error << " (mean)\n";
    return os.str();
}

ThroughputReport throughput(const Mlp& model, const Eigen::Ref<const InputBatch>& batch, const ThroughputOptions& opts) {
    if (batch.rows() < 1) throw DomainError("throughput: empty batch");
    if (opts.repetitions < 1 || opts.warmup < 0) throw ValidationError("throughput: repetitions >= 1, warmup >= 0");
    ThroughputReport r;
    r.batch_size = static_cast<std::size_t>(batch.rows());
    r.repetitions = opts.repetitions;
    r.warmup = opts.warmup;
    r.workers = opts.workers;
    r.precision = opts.single_precision ? "f32" : "f64";

    auto time_one = [](auto&& fn) {
        const auto t0 = Clock::now();
        fn();
        return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    };

    if (opts.single_precision) {
        const MlpF32 fast(model);
        const InputBatchF input = batch.cast<float>();
        Eigen::VectorXf out;
        for (int i = 0; i < opts.warmup; ++i) out = fast.predict(input, opts.workers);
        for (int i = 0; i < opts.repetitions; ++i) {
            r.wall_ms.push_back(time_one([&] { out = fast.predict(input, opts.workers); }));
        }
        r.outputs_match_untimed = (out.array() == fast.predict(input, opts.workers).array()).all();
    } else {
        Eigen::VectorXd out;
        for (int i = 0; i < opts.warmup; ++i) out = predict(model, batch, opts.workers);
        for (int i = 0; i < opts.repetitions; ++i) {
            r.wall_ms.push_back(time_one([&] { out = predict(model, batch, opts.workers); }));
        }
        r.outputs_match_untimed = (out.array() == predict(model, batch, opts.workers).array()).all();
    }

    std::vector<double> sorted = r.wall_ms;
    std::sort(sorted.begin(), sorted.end());
    r.min_ms = sorted.front();
    r.median_ms = percentile_sorted(sorted, 50);
    // Timer resolution floor so the rates stay finite.
    const double min_s = std::max(r.min_ms, 1e-6) / 1e3;
    r.valuations_per_sec = static_cast<double>(r.batch_size) / min_s;
    r.ns_per_valuation = min_s * 1e9 / static_cast<double>(r.batch_size);
    return r;
}

double time_mc_per_valuation(const Dataset& specs, std::size_t n_specs, std::uint64_t paths, int workers) {
    n_specs = std::min(n_specs, specs.size());
    if (n_specs == 0) throw DomainError("time_mc_per_valuation: no specs");
    std::vector<BasketSpec> parsed;
    for (std::size_t i = 0; i < n_specs; ++i) {
        parsed.push_back(BasketSpec::from_inputs(specs.n_assets(), specs.inputs(i), specs.strike()));
    }
    double sink = 0.0;
    const auto t0 = Clock::now();
    for (std::size_t i = 0; i < n_specs; ++i) {
        McConfig mc;
        mc.num_paths = paths;
        mc.seed = label_seed(specs.seeds()[i], 99);
        sink += price(parsed[i], mc, workers).value;
    }
    const double ns = std::chrono::duration<double, std::nano>(Clock::now() - t0).count();
    if (!std::isfinite(sink)) throw NumericalError("time_mc_per_valuation: non-finite MC value");
    return ns / static_cast<double>(n_specs);
}

void attach_mc_comparison(ThroughputReport& report, std::uint64_t paths, double mc_ns_per_valuation) {
    report.mc_paths = paths;
    report.mc_ns_per_valuation = mc_ns_per_valuation;
    report.speedup = report.ns_per_valuation > 0.0 ? mc_ns_per_valuation / report.ns_per_valuation : 0.0;
}

void ThroughputReport::write_csv(const std::filesystem::path& path) const {
    auto out = open_csv(path);
    out << "batch_size,repetitions,warmup,workers,precision,min_ms,median_ms,valuations_per_sec,ns_per_valuation,"
           "mc_paths,mc_ns_per_valuation,speedup\n";
    out << batch_size << ',' << repetitions << ',' << warmup << ',' << workers << ',' << precision << ',' << min_ms
        << ',' << median_ms << ',' << valuations_per_sec << ',' << ns_per_valuation << ',' << mc_paths << ','
        << mc_ns_per_valuation << ',' << speedup << '\n';
}

std::string ThroughputReport::summary_text() const {
    std::ostringstream os;
    os.precision(6);
    os << "batch size         " << batch_size << " (" << precision << ", workers " << workers << ")\n"
       << "repetitions        " << repetitions << " (+" << warmup << " warm-up)\n"
       << "min / median ms    " << min_ms << " / " << median_ms << "\n"
       << "valuations/sec     " << valuations_per_sec << "\n"
       << "ns per valuation   " << ns_per_valuation << "\n";
    if (mc_paths > 0) {
        os << "MC ns/valuation    " << mc_ns_per_valuation << " (" << mc_paths << " paths)\n"
           << "speedup            " << speedup << "x\n";
    }
    return os.str();
}

TrainingDistribution TrainingDistribution::from_plan(const SamplingPlan& plan, std::size_t n_reference) {
    plan.validate();
    SamplingPlan reference = plan;
    reference.seed = derive_seed(plan.seed, 0, 17);
    TrainingDistribution d;
    d.columns_.assign(static_cast<std::size_t>(input_width(plan.n_assets)), {});
    for (std::size_t i = 0; i < n_reference; ++i) {
        const auto in = sample_spec(reference, i).to_inputs();
        for (std::size_t c = 0; c < in.size(); ++c) d.columns_[c].push_back(in[c]);
    }
    for (auto& col : d.columns_) std::sort(col.begin(), col.end());
    return d;
}

TrainingDistribution TrainingDistribution::from_dataset(const Dataset& data) {
    TrainingDistribution d;
    d.columns_.assign(static_cast<std::size_t>(data.width()), {});
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto in = data.inputs(i);
        for (std::size_t c = 0; c < in.size(); ++c) d.columns_[c].push_back(in[c]);
    }
    for (auto& col : d.columns_) std::sort(col.begin(), col.end());
    return d;
}

double TrainingDistribution::quantile(int column, double x) const {
    const auto& col = columns_.at(static_cast<std::size_t>(column));
    if (col.empty()) return 0.0;
    const auto rank = std::upper_bound(col.begin(), col.end(), x) - col.begin();
    return static_cast<double>(rank) / static_cast<double>(col.size());
}

TailAudit tail_audit(const ErrorReport& report, const Dataset& inputs, const TrainingDistribution& training,
                     double tail_fraction, double edge_low, double edge_high) {
    if (report.error.size() != inputs.size()) throw ShapeError("tail_audit: report and inputs differ in length");
    if (training.width() != inputs.width()) throw ShapeError("tail_audit: training distribution width mismatch");
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < report.error.size(); ++i) {
        if (report.error[i] != 0.0) order.push_back(i);
    }
    const auto n_flag = std::min(order.size(), static_cast<std::size_t>(std::ceil(
                                                   tail_fraction * static_cast<double>(report.error.size()))));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_flag), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double ea = std::abs(report.error[a]);
                          const double eb = std::abs(report.error[b]);
                          return ea != eb ? ea > eb : a < b;
                      });
    TailAudit audit;
    for (std::size_t k = 0; k < n_flag; ++k) {
        FlaggedSample f;
        f.index = order[k];
        f.error = report.error[f.index];
        const auto in = inputs.inputs(f.index);
        for (int c = 0; c < inputs.width(); ++c) {
            const double q = training.quantile(c, in[static_cast<std::size_t>(c)]);
            f.quantiles.push_back(q);
            if (q < edge_low || q > edge_high) f.at_edge = true;
        }
        if (f.at_edge) ++audit.edge_count;
        audit.flagged.push_back(std::move(f));
    }
    audit.edge_fraction =
        audit.flagged.empty() ? 0.0 : static_cast<double>(audit.edge_count) / static_cast<double>(audit.flagged.size());
    return audit;
}

void TailAudit::write_csv(const std::filesystem::path& path) const {
    auto out = open_csv(path);
    out << "index,error,at_edge";
    const std::size_t width = flagged.empty() ? 0 : flagged.front().quantiles.size();
    for (std::size_t c = 0; c < width; ++c) out << ",q" << c;
    out << '\n';
    for (const auto& f : flagged) {
        out << f.index << ',' << f.error << ',' << (f.at_edge ? 1 : 0);
        for (double q : f.quantiles) out << ',' << q;
        out << '\n';
    }
}

std::string TailAudit::summary_text() const {
    std::ostringstream os;
    os << "flagged samples    " << flagged.size() << "\n"
       << "at training edge   " << edge_count << " (" << edge_fraction * 100.0 << "%)\n";
    return os.str();
}

}  // namespace deepbasket
