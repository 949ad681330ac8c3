#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace deepbasket {

inline constexpr double kDefaultStrike = 100.0;
inline constexpr double kDaysPerYear = 365.0;

// Smallest eigenvalue accepted (after repair) for a correlation matrix.
inline constexpr double kPsdTolerance = 1e-10;

// Number of pricing inputs for an n-asset basket: n forwards, n vols,
// n(n-1)/2 correlations and one maturity.
constexpr int input_width(int n_assets) noexcept { return n_assets * (n_assets + 3) / 2 + 1; }

// Symmetric, unit-diagonal, positive semi-definite matrix. Immutable; the
// (semi-definite) Cholesky factor is computed once at construction.
class CorrelationMatrix {
public:
    static CorrelationMatrix identity(int dim);

    // Validates `m`. Matrices whose smallest eigenvalue lies in
    // [-kPsdTolerance, 0) are repaired by eigenvalue clipping; anything more
    // negative throws ValidationError.
    static CorrelationMatrix from_matrix(const Eigen::MatrixXd& m);

    // Builds from the strict upper triangle in row-major order.
    static CorrelationMatrix from_upper_triangle(int dim, std::span<const double> upper);

    int dim() const noexcept { return static_cast<int>(matrix_.rows()); }
    double operator()(int i, int j) const { return matrix_(i, j); }
    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
    const Eigen::MatrixXd& cholesky() const noexcept { return cholesky_; }
    std::vector<double> upper_triangle() const;
    double min_eigenvalue() const;

    // Lower-triangular L with L*L^T == m for PSD m, including singular m.
    static Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& m);

private:
    explicit CorrelationMatrix(Eigen::MatrixXd m);

    Eigen::MatrixXd matrix_;
    Eigen::MatrixXd cholesky_;
};

// One point in the model domain: a worst-of basket call.
struct BasketSpec {
    std::vector<double> forwards;
    std::vector<double> vols;
    double maturity_days = 1.0;
    CorrelationMatrix correlations = CorrelationMatrix::identity(1);
    double strike = kDefaultStrike;

    int n_assets() const noexcept { return static_cast<int>(forwards.size()); }
    double maturity_years() const noexcept { return maturity_days / kDaysPerYear; }

    // Throws ValidationError on any broken invariant.
    void validate() const;

    // Flattened network input: forwards, vols, upper-triangle correlations
    // (row-major), maturity_days. Strike is not part of the input.
    std::vector<double> to_inputs() const;
    void write_inputs(std::span<double> out) const;
    static BasketSpec from_inputs(int n_assets, std::span<const double> inputs, double strike = kDefaultStrike);
};

}  // namespace deepbasket
