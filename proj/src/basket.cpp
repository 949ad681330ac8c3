#include "deepbasket/basket.hpp"

#include <cmath>
#include <string>

#include "deepbasket/errors.hpp"

namespace deepbasket {

namespace {

constexpr double kEntryTolerance = 1e-12;

void check_structure(const Eigen::MatrixXd& m) {
    if (m.rows() < 1 || m.rows() != m.cols()) {
        throw ValidationError("correlation matrix must be square with dim >= 1");
    }
    const Eigen::Index n = m.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(m(i, i) - 1.0) > kEntryTolerance) {
            throw ValidationError("correlation matrix diagonal entry " + std::to_string(i) + " is not 1");
        }
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (!std::isfinite(m(i, j)) || std::abs(m(i, j) - m(j, i)) > kEntryTolerance) {
                throw ValidationError("correlation matrix is not symmetric at (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ")");
            }
            if (std::abs(m(i, j)) > 1.0 + kEntryTolerance) {
                throw ValidationError("correlation entry outside [-1, 1] at (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ")");
            }
        }
    }
}

}  // namespace

CorrelationMatrix::CorrelationMatrix(Eigen::MatrixXd m)
    : matrix_(std::move(m)), cholesky_(semidefinite_cholesky(matrix_)) {}

CorrelationMatrix CorrelationMatrix::identity(int dim) {
    if (dim < 1) throw ValidationError("correlation matrix dim must be >= 1");
    return CorrelationMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

CorrelationMatrix CorrelationMatrix::from_matrix(const Eigen::MatrixXd& m) {
    check_structure(m);
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    sym.diagonal().setOnes();
    for (Eigen::Index i = 0; i < sym.rows(); ++i) {
        for (Eigen::Index j = 0; j < sym.cols(); ++j) sym(i, j) = std::clamp(sym(i, j), -1.0, 1.0);
    }
    if (sym.rows() == 1) return CorrelationMatrix(sym);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    const double smallest = eig.eigenvalues().minCoeff();
    if (smallest < -kPsdTolerance) {
        throw ValidationError("correlation matrix is not positive semi-definite (smallest eigenvalue " +
                              std::to_string(smallest) + ")");
    }
    if (smallest < 0.0) {
        const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
        Eigen::MatrixXd repaired = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
        const Eigen::VectorXd inv_sd = repaired.diagonal().cwiseSqrt().cwiseInverse();
        repaired = inv_sd.asDiagonal() * repaired * inv_sd.asDiagonal();
        repaired = 0.5 * (repaired + repaired.transpose());
        repaired.diagonal().setOnes();
        return CorrelationMatrix(repaired);
    }
    return CorrelationMatrix(sym);
}

CorrelationMatrix CorrelationMatrix::from_upper_triangle(int dim, std::span<const double> upper) {
    if (dim < 1) throw ValidationError("correlation matrix dim must be >= 1");
    const auto expected = static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim - 1) / 2;
    if (upper.size() != expected) {
        throw ShapeError("upper triangle of a " + std::to_string(dim) + "x" + std::to_string(dim) +
                         " matrix needs " + std::to_string(expected) + " entries, got " +
                         std::to_string(upper.size()));
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim);
    std::size_t k = 0;
    for (int i = 0; i < dim; ++i) {
        for (int j = i + 1; j < dim; ++j) {
            m(i, j) = upper[k];
            m(j, i) = upper[k];
            ++k;
        }
    }
    return from_matrix(m);
}

std::vector<double> CorrelationMatrix::upper_triangle() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(dim() * (dim() - 1) / 2));
    for (int i = 0; i < dim(); ++i) {
        for (int j = i + 1; j < dim(); ++j) out.push_back(matrix_(i, j));
    }
    return out;
}

double CorrelationMatrix::min_eigenvalue() const {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(matrix_, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

Eigen::MatrixXd CorrelationMatrix::semidefinite_cholesky(const Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    // Pivots below this are treated as exact zeros (rank-deficient direction).
    constexpr double kZeroPivot = 1e-12;
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = m(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d < -1e-8) throw ValidationError("matrix is not positive semi-definite (negative Cholesky pivot)");
        const double ljj = d > kZeroPivot ? std::sqrt(d) : 0.0;
        l(j, j) = ljj;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            if (ljj == 0.0) continue;
            double s = m(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

void BasketSpec::validate() const {
    const int n = n_assets();
    if (n < 1) throw ValidationError("basket needs at least one asset");
    if (static_cast<int>(vols.size()) != n) throw ValidationError("vols length differs from forwards length");
    if (correlations.dim() != n) throw ValidationError("correlation dimension differs from asset count");
    for (int i = 0; i < n; ++i) {
        if (!(forwards[i] > 0.0) || !std::isfinite(forwards[i])) {
            throw ValidationError("forward " + std::to_string(i) + " must be positive and finite");
        }
        if (!(vols[i] >= 0.0) || !std::isfinite(vols[i])) {
            throw ValidationError("vol " + std::to_string(i) + " must be non-negative and finite");
        }
    }
    if (!(maturity_days > 0.0) || !std::isfinite(maturity_days)) {
        throw ValidationError("maturity_days must be positive and finite");
    }
    if (!(strike > 0.0) || !std::isfinite(strike)) throw ValidationError("strike must be positive and finite");
}

std::vector<double> BasketSpec::to_inputs() const {
    std::vector<double> out(static_cast<std::size_t>(input_width(n_assets())));
    write_inputs(out);
    return out;
}

void BasketSpec::write_inputs(std::span<double> out) const {
    const int n = n_assets();
    if (out.size() != static_cast<std::size_t>(input_width(n))) {
        throw ShapeError("input buffer has " + std::to_string(out.size()) + " slots, need " +
                         std::to_string(input_width(n)));
    }
    std::size_t k = 0;
    for (double f : forwards) out[k++] = f;
    for (double v : vols) out[k++] = v;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) out[k++] = correlations(i, j);
    }
    out[k] = maturity_days;
}

BasketSpec BasketSpec::from_inputs(int n_assets, std::span<const double> inputs, double strike) {
    if (n_assets < 1) throw ValidationError("basket needs at least one asset");
    if (inputs.size() != static_cast<std::size_t>(input_width(n_assets))) {
        throw ShapeError("input vector has " + std::to_string(inputs.size()) + " entries, a " +
                         std::to_string(n_assets) + "-asset basket needs " +
                         std::to_string(input_width(n_assets)));
    }
    const auto n = static_cast<std::size_t>(n_assets);
    BasketSpec spec;
    spec.forwards.assign(inputs.begin(), inputs.begin() + n);
    spec.vols.assign(inputs.begin() + n, inputs.begin() + 2 * n);
    const std::size_t n_corr = n * (n - 1) / 2;
    spec.correlations = CorrelationMatrix::from_upper_triangle(n_assets, inputs.subspan(2 * n, n_corr));
    spec.maturity_days = inputs[2 * n + n_corr];
    spec.strike = strike;
    spec.validate();
    return spec;
}

}  // namespace deepbasket
