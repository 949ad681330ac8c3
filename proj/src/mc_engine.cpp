#include "deepbasket/mc_engine.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "deepbasket/errors.hpp"
#include "deepbasket/random.hpp"

namespace deepbasket {

namespace {

constexpr int kMaxAssets = 64;

// Running moments of payoffs. lo/hi bound the observed payoffs; the mean is
// clamped into them so constant payoffs (all zero, zero vol) come out exact.
struct ChunkMoments {
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
};

ChunkMoments merge(const ChunkMoments& a, const ChunkMoments& b) {
    if (a.count == 0) return b;
    if (b.count == 0) return a;
    const auto n = static_cast<double>(a.count + b.count);
    const double delta = b.mean - a.mean;
    ChunkMoments out;
    out.count = a.count + b.count;
    out.mean = a.mean + delta * (static_cast<double>(b.count) / n);
    out.m2 = a.m2 + b.m2 + delta * delta * (static_cast<double>(a.count) * static_cast<double>(b.count) / n);
    out.lo = std::min(a.lo, b.lo);
    out.hi = std::max(a.hi, b.hi);
    return out;
}

// Precomputed per-spec quantities for the path loop.
struct PathModel {
    int n = 0;
    double strike = 0.0;
    double shift = 0.0;  // zero-vol payoff, used to centre the sums
    std::vector<double> forwards;
    std::vector<double> log_forwards;
    std::vector<double> drift;      // -sigma^2 T / 2
    std::vector<double> diffusion;  // sigma sqrt(T)
    std::vector<double> chol;       // row-major lower triangle, n*n

    explicit PathModel(const BasketSpec& spec) : n(spec.n_assets()), strike(spec.strike) {
        const double t = spec.maturity_years();
        forwards = spec.forwards;
        log_forwards.resize(n);
        drift.resize(n);
        diffusion.resize(n);
        chol.assign(static_cast<std::size_t>(n * n), 0.0);
        for (int i = 0; i < n; ++i) {
            log_forwards[i] = std::log(forwards[i]);
            drift[i] = -0.5 * spec.vols[i] * spec.vols[i] * t;
            diffusion[i] = spec.vols[i] * std::sqrt(t);
            for (int k = 0; k <= i; ++k) chol[i * n + k] = spec.correlations.cholesky()(i, k);
        }
        shift = std::max(0.0, *std::min_element(forwards.begin(), forwards.end()) - strike);
    }

    // Payoff for normals z (sign = +1 or -1 for the antithetic mirror).
    double path_payoff(const double* z, double sign) const {
        int worst = 0;
        double worst_exponent = 0.0;
        double worst_log = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            double w = 0.0;
            const double* row = &chol[static_cast<std::size_t>(i * n)];
            for (int k = 0; k <= i; ++k) w += row[k] * z[k];
            const double exponent = drift[i] + diffusion[i] * (sign * w);
            const double log_s = log_forwards[i] + exponent;
            if (log_s < worst_log) {
                worst_log = log_s;
                worst_exponent = exponent;
                worst = i;
            }
        }
        return std::max(0.0, forwards[worst] * std::exp(worst_exponent) - strike);
    }
};

void validate_inputs(const BasketSpec& spec, const McConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (spec.n_assets() > kMaxAssets) {
        throw ValidationError("basket has more than " + std::to_string(kMaxAssets) + " assets");
    }
}

ChunkMoments run_chunk(const PathModel& model, std::uint64_t seed, std::uint64_t first, std::uint64_t last,
                       bool antithetic) {
    double z[kMaxAssets];
    double sum = 0.0;
    double sum_sq = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    const auto key = Philox4x32::key_from_seed(seed);
    for (std::uint64_t path = first; path < last; ++path) {
        const Philox4x32::Counter base{static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), 0,
                                       0};
        for (int block = 0; 4 * block < model.n; ++block) {
            Philox4x32::Counter ctr = base;
            ctr[2] = static_cast<std::uint32_t>(block);
            const auto bits = Philox4x32::generate(ctr, key);
            for (int j = 0; j < 4 && 4 * block + j < model.n; ++j) z[4 * block + j] = normal_from_bits(bits[j]);
        }
        double h = model.path_payoff(z, 1.0);
        if (antithetic) h = 0.5 * (h + model.path_payoff(z, -1.0));
        lo = std::min(lo, h);
        hi = std::max(hi, h);
        const double d = h - model.shift;
        sum += d;
        sum_sq += d * d;
    }
    ChunkMoments m;
    m.count = last - first;
    const auto cnt = static_cast<double>(m.count);
    m.mean = model.shift + sum / cnt;
    m.m2 = std::max(0.0, sum_sq - sum * sum / cnt);
    m.lo = lo;
    m.hi = hi;
    return m;
}

McResult finish(const ChunkMoments& total, std::uint64_t num_paths) {
    McResult r;
    r.value = total.count > 0 ? std::clamp(total.mean, total.lo, total.hi) : 0.0;
    r.num_paths = num_paths;
    if (total.count > 1 && total.lo < total.hi) {
        const double var = total.m2 / static_cast<double>(total.count - 1);
        r.std_error = std::sqrt(var / static_cast<double>(total.count));
    }
    return r;
}

std::uint64_t draws_for(const McConfig& cfg) { return cfg.antithetic ? (cfg.num_paths + 1) / 2 : cfg.num_paths; }

}  // namespace

void McConfig::validate() const {
    if (num_paths < 1) throw ValidationError("num_paths must be >= 1");
}

double payoff(std::span<const double> terminal_prices, double strike) {
    if (terminal_prices.empty()) throw DomainError("payoff: terminal price vector is empty");
    double worst = std::numeric_limits<double>::infinity();
    for (double s : terminal_prices) {
        if (!std::isfinite(s)) throw DomainError("payoff: terminal price is not finite");
        worst = std::min(worst, s);
    }
    return std::max(0.0, worst - strike);
}

std::vector<double> simulate_terminal(const BasketSpec& spec, std::span<const double> normals) {
    spec.validate();
    const int n = spec.n_assets();
    if (normals.size() != static_cast<std::size_t>(n)) {
        throw ShapeError("simulate_terminal: expected " + std::to_string(n) + " normals, got " +
                         std::to_string(normals.size()));
    }
    const Eigen::Map<const Eigen::VectorXd> z(normals.data(), n);
    const Eigen::VectorXd correlated = spec.correlations.cholesky() * z;
    const double t = spec.maturity_years();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double sigma = spec.vols[i];
        out[i] = spec.forwards[i] * std::exp(-0.5 * sigma * sigma * t + sigma * std::sqrt(t) * correlated(i));
    }
    return out;
}

void path_normals(std::uint64_t seed, std::uint64_t path, std::span<double> out) {
    const auto key = Philox4x32::key_from_seed(seed);
    for (std::size_t block = 0; 4 * block < out.size(); ++block) {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
                                      static_cast<std::uint32_t>(block), 0};
        const auto bits = Philox4x32::generate(ctr, key);
        for (std::size_t j = 0; j < 4 && 4 * block + j < out.size(); ++j) out[4 * block + j] = normal_from_bits(bits[j]);
    }
}

McResult price(const BasketSpec& spec, const McConfig& cfg, int workers) {
    validate_inputs(spec, cfg);
    const PathModel model(spec);
    const std::uint64_t draws = draws_for(cfg);
    const std::uint64_t n_chunks = (draws + kPathsPerChunk - 1) / kPathsPerChunk;
    std::vector<ChunkMoments> chunks(n_chunks);

    const int threads = workers > 0 ? workers : omp_get_max_threads();
    const auto n_chunks_signed = static_cast<std::int64_t>(n_chunks);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1 && n_chunks > 1)
    for (std::int64_t c = 0; c < n_chunks_signed; ++c) {
        const auto first = static_cast<std::uint64_t>(c) * kPathsPerChunk;
        const std::uint64_t last = std::min(draws, first + kPathsPerChunk);
        chunks[static_cast<std::size_t>(c)] = run_chunk(model, cfg.seed, first, last, cfg.antithetic);
    }

    ChunkMoments total;
    for (const auto& c : chunks) total = merge(total, c);
    return finish(total, cfg.antithetic ? 2 * draws : draws);
}

McResult price_reference(const BasketSpec& spec, const McConfig& cfg) {
    validate_inputs(spec, cfg);
    const auto n = static_cast<std::size_t>(spec.n_assets());
    const std::uint64_t draws = draws_for(cfg);
    std::vector<double> z(n);
    std::vector<double> mirrored(n);
    ChunkMoments acc;
    for (std::uint64_t path = 0; path < draws; ++path) {
        path_normals(cfg.seed, path, z);
        double h = payoff(simulate_terminal(spec, z), spec.strike);
        if (cfg.antithetic) {
            std::transform(z.begin(), z.end(), mirrored.begin(), [](double v) { return -v; });
            h = 0.5 * (h + payoff(simulate_terminal(spec, mirrored), spec.strike));
        }
        ++acc.count;
        acc.lo = std::min(acc.lo, h);
        acc.hi = std::max(acc.hi, h);
        const double delta = h - acc.mean;
        acc.mean += delta / static_cast<double>(acc.count);
        acc.m2 += delta * (h - acc.mean);
    }
    return finish(acc, cfg.antithetic ? 2 * draws : draws);
}

double black_scholes_call(double forward, double vol, double maturity_years, double strike) {
    if (!(forward > 0.0) || !(strike > 0.0)) throw DomainError("black_scholes_call: forward and strike must be > 0");
    if (!(vol >= 0.0) || !(maturity_years >= 0.0)) {
        throw DomainError("black_scholes_call: vol and maturity must be >= 0");
    }
    const double total_vol = vol * std::sqrt(maturity_years);
    if (total_vol == 0.0) return std::max(0.0, forward - strike);
    const double d1 = std::log(forward / strike) / total_vol + 0.5 * total_vol;
    const double d2 = d1 - total_vol;
    return forward * normal_cdf(d1) - strike * normal_cdf(d2);
}

}  // namespace deepbasket
