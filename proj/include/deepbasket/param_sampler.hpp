#pragma once

#include <cstdint>
#include <random>

#include "deepbasket/basket.hpp"

namespace deepbasket {

using SamplerRng = std::mt19937_64;

// Training distribution of basket parameters. Defaults reproduce the
// six-asset setup: forwards 100 exp(N(0.5, 0.25)), vols U(0, 1),
// maturity U(1, 43)^2 days, C-vine partial correlations 2 Beta(5, 2) - 1.
struct SamplingPlan {
    int n_assets = 6;
    double spot_log_mean = 0.5;
    double spot_log_sd = 0.25;  // standard deviation, not variance
    double spot_scale = 100.0;
    double vol_low = 0.0;
    double vol_high = 1.0;
    double maturity_u_low = 1.0;
    double maturity_u_high = 43.0;
    double corr_beta_a = 5.0;
    double corr_beta_b = 2.0;
    double strike = kDefaultStrike;
    std::uint64_t seed = 0;

    void validate() const;
};

// Seed for sample `index` of a plan. Every sample (parameters and MC label) is
// reproducible from this value alone.
std::uint64_t sample_seed(const SamplingPlan& plan, std::uint64_t index) noexcept;

BasketSpec sample_spec(const SamplingPlan& plan, SamplerRng& rng);

// Draw number `index` of the plan's deterministic sequence.
BasketSpec sample_spec(const SamplingPlan& plan, std::uint64_t index = 0);

// Random correlation matrix by the C-vine construction: partial correlations
// p ~ 2 Beta(a, b) - 1 on every vine edge, folded back into correlations.
CorrelationMatrix sample_cvine_correlation(int dim, double beta_a, double beta_b, SamplerRng& rng);

double sample_beta(double a, double b, SamplerRng& rng);

}  // namespace deepbasket
