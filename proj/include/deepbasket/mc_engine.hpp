#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deepbasket/basket.hpp"

namespace deepbasket {

struct McConfig {
    std::uint64_t num_paths = 10'000;
    std::uint64_t seed = 0;
    // Pairs each normal vector Z with -Z; num_paths counts individual paths,
    // rounded up to an even number.
    bool antithetic = false;

    void validate() const;
};

struct McResult {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t num_paths = 0;
};

// max(0, min_i terminal[i] - strike).
double payoff(std::span<const double> terminal_prices, double strike);

// S_i(T) = F_i exp(-sigma_i^2 T / 2 + sigma_i sqrt(T) (L z)_i), zero rates.
std::vector<double> simulate_terminal(const BasketSpec& spec, std::span<const double> normals);

// Standard normals for one path, drawn from the Philox stream keyed by `seed`
// at counter `path`. Independent of which thread asks.
void path_normals(std::uint64_t seed, std::uint64_t path, std::span<double> out);

// Paths are processed in fixed chunks; chunk statistics are merged in chunk
// order, so the result is bit-identical for any worker count.
// workers == 0 uses the OpenMP default.
McResult price(const BasketSpec& spec, const McConfig& cfg, int workers = 0);

// Serial per-path reference: simulate_terminal + payoff + Welford. Kept for
// testing the chunked kernel; agrees with price() to rounding.
McResult price_reference(const BasketSpec& spec, const McConfig& cfg);

// Undiscounted Black formula for a call on a forward.
double black_scholes_call(double forward, double vol, double maturity_years, double strike);

inline constexpr std::uint64_t kPathsPerChunk = 4096;

}  // namespace deepbasket
