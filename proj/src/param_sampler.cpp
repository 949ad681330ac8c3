#include "deepbasket/param_sampler.hpp"

#include <cmath>

#include "deepbasket/errors.hpp"
#include "deepbasket/random.hpp"

namespace deepbasket {

void SamplingPlan::validate() const {
    if (n_assets < 1) throw ValidationError("sampling plan: n_assets must be >= 1");
    if (!(spot_log_sd >= 0.0)) throw ValidationError("sampling plan: spot_log_sd must be >= 0");
    if (!(spot_scale > 0.0)) throw ValidationError("sampling plan: spot_scale must be > 0");
    if (!(vol_low < vol_high) || vol_low < 0.0) throw ValidationError("sampling plan: need 0 <= vol_low < vol_high");
    if (!(maturity_u_low >= 0.0) || !(maturity_u_low < maturity_u_high)) {
        throw ValidationError("sampling plan: need 0 <= maturity_u_low < maturity_u_high");
    }
    if (!(corr_beta_a > 0.0) || !(corr_beta_b > 0.0)) {
        throw ValidationError("sampling plan: beta parameters must be > 0");
    }
    if (!(strike > 0.0)) throw ValidationError("sampling plan: strike must be > 0");
}

std::uint64_t sample_seed(const SamplingPlan& plan, std::uint64_t index) noexcept {
    return derive_seed(plan.seed, index);
}

double sample_beta(double a, double b, SamplerRng& rng) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

CorrelationMatrix sample_cvine_correlation(int dim, double beta_a, double beta_b, SamplerRng& rng) {
    if (dim < 1) throw ValidationError("sample_cvine_correlation: dim must be >= 1");
    // partial(k, i): partial correlation of (k, i) given variables 0..k-1.
    Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(dim, dim);
    for (int k = 0; k < dim - 1; ++k) {
        for (int i = k + 1; i < dim; ++i) {
            partial(k, i) = 2.0 * sample_beta(beta_a, beta_b, rng) - 1.0;
            double r = partial(k, i);
            for (int l = k - 1; l >= 0; --l) {
                r = r * std::sqrt((1.0 - partial(l, i) * partial(l, i)) * (1.0 - partial(l, k) * partial(l, k))) +
                    partial(l, i) * partial(l, k);
            }
            corr(k, i) = r;
            corr(i, k) = r;
        }
    }
    return CorrelationMatrix::from_matrix(corr);
}

BasketSpec sample_spec(const SamplingPlan& plan, SamplerRng& rng) {
    plan.validate();
    const auto n = static_cast<std::size_t>(plan.n_assets);
    std::normal_distribution<double> log_spot(plan.spot_log_mean, plan.spot_log_sd);
    std::uniform_real_distribution<double> vol(plan.vol_low, plan.vol_high);
    std::uniform_real_distribution<double> maturity_root(plan.maturity_u_low, plan.maturity_u_high);

    BasketSpec spec;
    spec.forwards.resize(n);
    spec.vols.resize(n);
    for (auto& f : spec.forwards) f = plan.spot_scale * std::exp(log_spot(rng));
    for (auto& v : spec.vols) v = vol(rng);
    const double u = maturity_root(rng);
    spec.maturity_days = u * u;
    spec.correlations = sample_cvine_correlation(plan.n_assets, plan.corr_beta_a, plan.corr_beta_b, rng);
    spec.strike = plan.strike;
    spec.validate();
    return spec;
}

BasketSpec sample_spec(const SamplingPlan& plan, std::uint64_t index) {
    SamplerRng rng(sample_seed(plan, index));
    return sample_spec(plan, rng);
}

}  // namespace deepbasket
