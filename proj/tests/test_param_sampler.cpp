#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "deepbasket/errors.hpp"
#include "deepbasket/param_sampler.hpp"

using namespace deepbasket;

namespace {

// Partial correlation of (i, j) given variables 0..k-1, read off the inverse
// of the correlation sub-matrix over {0..k-1, i, j}. Independent of how the
// sampler composes the vine.
double partial_correlation(const Eigen::MatrixXd& r, int i, int j, int k) {
    std::vector<int> idx;
    for (int c = 0; c < k; ++c) idx.push_back(c);
    idx.push_back(i);
    idx.push_back(j);
    const int n = static_cast<int>(idx.size());
    Eigen::MatrixXd sub(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) sub(a, b) = r(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    const Eigen::MatrixXd p = sub.inverse();
    return -p(n - 2, n - 1) / std::sqrt(p(n - 2, n - 2) * p(n - 1, n - 1));
}

double ks_uniform(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        d = std::max(d, std::abs((static_cast<double>(i) + 1.0) / n - x[i]));
        d = std::max(d, std::abs(x[i] - static_cast<double>(i) / n));
    }
    return d;
}

}  // namespace

TEST_CASE("fixed seed reproduces the spec") {
    SamplingPlan plan;
    plan.seed = 99;
    const BasketSpec a = sample_spec(plan, 12);
    const BasketSpec b = sample_spec(plan, 12);
    CHECK(a.to_inputs() == b.to_inputs());
    CHECK(sample_spec(plan, 13).to_inputs() != a.to_inputs());
}

TEST_CASE("marginal distributions over 100k draws") {
    SamplingPlan plan;
    plan.seed = 2024;
    const std::size_t n = 100'000;
    double log_sum = 0.0, log_sq = 0.0;
    double mat_sum = 0.0, mat_min = 1e300, mat_max = -1e300;
    std::vector<double> vols;
    std::vector<std::size_t> bins(10, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const BasketSpec s = sample_spec(plan, i);
        s.validate();
        const double lf = std::log(s.forwards[0] / 100.0);
        log_sum += lf;
        log_sq += lf * lf;
        vols.push_back(s.vols[i % 6]);
        mat_sum += s.maturity_days;
        mat_min = std::min(mat_min, s.maturity_days);
        mat_max = std::max(mat_max, s.maturity_days);
        bins[std::min<std::size_t>(9, static_cast<std::size_t>((s.maturity_days - 1.0) / 184.8))]++;
    }
    const double mean = log_sum / n;
    CHECK(std::abs(mean - 0.5) < 0.01);
    CHECK(std::abs(std::sqrt(log_sq / n - mean * mean) - 0.25) < 0.01);
    CHECK(mat_min >= 1.0);
    CHECK(mat_max <= 1849.0);
    // (1/42) * integral of u^2 over [1, 43] = 631.
    CHECK(std::abs(mat_sum / n - 631.0) < 10.0);
    // 1% critical value of the one-sample KS statistic: 1.628 / sqrt(n).
    CHECK(ks_uniform(vols) < 1.628 / std::sqrt(static_cast<double>(n)));
    for (std::size_t b = 1; b < bins.size(); ++b) CHECK(bins[b] <= bins[b - 1]);
}

TEST_CASE("c-vine edge cases") {
    SamplerRng rng(1);
    const CorrelationMatrix one = sample_cvine_correlation(1, 5, 2, rng);
    CHECK(one.dim() == 1);
    CHECK(one(0, 0) == 1.0);

    double sum = 0.0;
    const int n = 100'000;
    for (int i = 0; i < n; ++i) {
        const CorrelationMatrix m = sample_cvine_correlation(2, 5, 2, rng);
        CHECK(m(0, 1) == m(1, 0));
        sum += m(0, 1);
    }
    CHECK(std::abs(sum / n - (2.0 * 5.0 / 7.0 - 1.0)) < 0.01);
}

TEST_CASE("6x6 c-vine matrices are valid correlation matrices") {
    SamplerRng rng(7);
    double min_eig = 1.0;
    for (int draw = 0; draw < 10'000; ++draw) {
        const CorrelationMatrix c = sample_cvine_correlation(6, 5, 2, rng);
        const Eigen::MatrixXd& m = c.matrix();
        for (int i = 0; i < 6; ++i) {
            REQUIRE(m(i, i) == 1.0);
            for (int j = 0; j < 6; ++j) REQUIRE(m(i, j) == m(j, i));
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    CHECK(min_eig >= -1e-10);
}

TEST_CASE("every vine level carries Beta(5,2) partial correlations") {
    SamplerRng rng(11);
    const int draws = 20'000;
    std::vector<double> level_sum(5, 0.0);
    std::vector<int> level_count(5, 0);
    for (int d = 0; d < draws; ++d) {
        const CorrelationMatrix c = sample_cvine_correlation(6, 5, 2, rng);
        for (int k = 0; k < 5; ++k) {
            for (int j = k + 1; j < 6; ++j) {
                level_sum[static_cast<std::size_t>(k)] += partial_correlation(c.matrix(), k, j, k);
                ++level_count[static_cast<std::size_t>(k)];
            }
        }
    }
    const double expected = 2.0 * 5.0 / 7.0 - 1.0;
    for (std::size_t k = 0; k < 5; ++k) {
        CAPTURE(k);
        CHECK(std::abs(level_sum[k] / level_count[k] - expected) < 0.01);
    }
}

TEST_CASE("beta sampler moments") {
    SamplerRng rng(5);
    const int n = 200'000;
    double s = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_beta(5, 2, rng);
        REQUIRE(x > 0.0);
        REQUIRE(x < 1.0);
        s += x;
        sq += x * x;
    }
    const double mean = s / n;
    CHECK(std::abs(mean - 5.0 / 7.0) < 0.002);
    // Var = ab / ((a+b)^2 (a+b+1)) = 10 / 392.
    CHECK(std::abs(sq / n - mean * mean - 10.0 / 392.0) < 0.0005);
}

TEST_CASE("plan validation") {
    SamplingPlan p;
    p.vol_low = 0.5;
    p.vol_high = 0.4;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    SamplingPlan q;
    q.corr_beta_a = 0.0;
    CHECK_THROWS_AS(q.validate(), ValidationError);
    SamplingPlan r;
    r.n_assets = 0;
    CHECK_THROWS_AS(r.validate(), ValidationError);
}
