#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "biopar/core.hpp"

namespace biopar {

/// Per-column affine map to zero mean and unit variance.
struct Standardizer {
    Vector mean;
    Vector scale;

    static Standardizer identity(Eigen::Index dims) { return {Vector::Zero(dims), Vector::Ones(dims)}; }

    /// Fits on the columns of `x`. A constant column is an error when
    /// `names` is given (targets) and gets unit scale otherwise (inputs).
    static Standardizer fit(const Matrix& x, const std::array<std::string_view, kOutputs>* names = nullptr) {
        Standardizer s;
        s.mean = x.colwise().mean();
        s.scale.resize(x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double var = (x.col(c).array() - s.mean(c)).square().sum() / static_cast<double>(x.rows());
            if (!(var > 0.0)) {
                if (names)
                    throw DataError("degenerate target '" +
                                    std::string(c < kOutputs ? (*names)[static_cast<std::size_t>(c)] : "output") +
                                    "': zero variance");
                s.scale(c) = 1.0;
            } else {
                s.scale(c) = std::sqrt(var);
            }
        }
        return s;
    }

    Eigen::Index dims() const { return mean.size(); }

    Matrix apply(const Matrix& x) const {
        return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }

    Matrix invert(const Matrix& z) const {
        return (z.array().rowwise() * scale.transpose().array()).rowwise() + mean.transpose().array();
    }

    Standardizer select(const std::vector<int>& cols) const {
        Standardizer s{Vector(static_cast<Eigen::Index>(cols.size())), Vector(static_cast<Eigen::Index>(cols.size()))};
        for (std::size_t i = 0; i < cols.size(); ++i) {
            s.mean(static_cast<Eigen::Index>(i)) = mean(cols[i]);
            s.scale(static_cast<Eigen::Index>(i)) = scale(cols[i]);
        }
        return s;
    }
};

/// Cholesky factor with the diagonal jitter that made it succeed.
struct CholeskyFactor {
    Matrix lower;
    double jitter = 0.0;

    /// Solves (L L^T) X = B.
    Matrix solve(const Matrix& b) const {
        Matrix x = lower.triangularView<Eigen::Lower>().solve(b);
        lower.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
        return x;
    }

    double log_det() const { return 2.0 * lower.diagonal().array().log().sum(); }
};

/// Cholesky of a symmetric matrix. On failure adds jitter of 1e-10, 1e-9,
/// ..., 1e-6 times the mean diagonal before giving up.
inline CholeskyFactor robust_cholesky(const Matrix& a) {
    if (a.rows() != a.cols()) throw NumericalError("cholesky: matrix is not square");
    const double mean_diag = a.rows() > 0 ? a.diagonal().mean() : 0.0;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite())
        return {llt.matrixL(), 0.0};
    const double base = std::abs(mean_diag) > 0.0 ? std::abs(mean_diag) : 1.0;
    for (double j = 1e-10; j <= 1.0001e-6; j *= 10.0) {
        Matrix aj = a;
        aj.diagonal().array() += j * base;
        llt.compute(aj);
        if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) return {llt.matrixL(), j * base};
    }
    throw NumericalError("cholesky: matrix is not positive definite even after jitter escalation to 1e-6");
}

}  // namespace biopar
