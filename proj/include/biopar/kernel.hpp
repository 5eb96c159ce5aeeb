#pragma once

#include <cmath>
#include <vector>

#include "biopar/core.hpp"

namespace biopar {

/// Hyperparameters of the ARD squared-exponential kernel
///   k(x, x') = nu exp(-sum_b (x_b - x'_b)^2 / (2 sigma_b^2)) + sigma_n^2 delta.
/// Optimisation works on the log vector [log nu, log sigma_n, log sigma_1..B].
struct ArdHyper {
    double nu = 1.0;
    double sigma_n = 0.1;
    std::vector<double> lengthscales = std::vector<double>(kBands, 1.0);

    std::size_t dims() const { return lengthscales.size(); }

    Vector to_log() const {
        Vector v(static_cast<Eigen::Index>(2 + lengthscales.size()));
        v(0) = std::log(nu);
        v(1) = std::log(sigma_n);
        for (std::size_t b = 0; b < lengthscales.size(); ++b) v(static_cast<Eigen::Index>(b + 2)) = std::log(lengthscales[b]);
        return v;
    }

    static ArdHyper from_log(const Vector& v) {
        ArdHyper h;
        h.nu = std::exp(v(0));
        h.sigma_n = std::exp(v(1));
        h.lengthscales.resize(static_cast<std::size_t>(v.size() - 2));
        for (std::size_t b = 0; b < h.lengthscales.size(); ++b) h.lengthscales[b] = std::exp(v(static_cast<Eigen::Index>(b + 2)));
        return h;
    }

    void validate() const {
        bool ok = nu > 0.0 && sigma_n > 0.0 && !lengthscales.empty();
        for (double l : lengthscales) ok = ok && l > 0.0;
        if (!ok || !std::isfinite(nu) || !std::isfinite(sigma_n)) throw DomainError("ArdHyper: all hyperparameters must be positive");
    }

    bool operator==(const ArdHyper&) const = default;
};

enum class KernelKind {
    ard,  ///< scaled by nu, one lengthscale per band
    rbf,  ///< unscaled isotropic kernel with lengthscales[0]
};

/// Pairwise squared distances between the rows of a and b.
inline Matrix squared_distances(const Matrix& a, const Matrix& b) {
    const Vector na = a.rowwise().squaredNorm();
    const Vector nb = b.rowwise().squaredNorm();
    Matrix d = (-2.0 * a * b.transpose()).colwise() + na;
    d.rowwise() += nb.transpose();
    return d.cwiseMax(0.0);
}

/// Exact squared distances (explicit differences, no expansion).
inline Matrix pairwise_sq(const Matrix& a, const Matrix& b) {
    Matrix d(a.rows(), b.rows());
    const Matrix bt = b.transpose();
    for (Eigen::Index j = 0; j < b.rows(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            for (Eigen::Index c = 0; c < a.cols(); ++c) {
                const double t = a(i, c) - bt(c, j);
                s += t * t;
            }
            d(i, j) = s;
        }
    return d;
}

/// Kernel matrix between the rows of x and x2. The noise term sigma_n^2 is
/// added on the diagonal only when requested and x2 is x.
inline Matrix kernel_matrix(const Matrix& x, const Matrix& x2, const ArdHyper& hyper, KernelKind kind,
                            bool include_noise_diag) {
    const ScopedFlushDenormals ftz;
    hyper.validate();
    if (x.cols() != x2.cols()) throw DomainError("kernel_matrix: input dimension mismatch");
    Matrix k(x.rows(), x2.rows());
    if (kind == KernelKind::ard) {
        if (static_cast<std::size_t>(x.cols()) != hyper.dims())
            throw DomainError("kernel_matrix: " + std::to_string(x.cols()) + " bands but " + std::to_string(hyper.dims()) +
                              " lengthscales");
        Matrix a = x, b = x2;
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            a.col(c) /= hyper.lengthscales[static_cast<std::size_t>(c)];
            b.col(c) /= hyper.lengthscales[static_cast<std::size_t>(c)];
        }
        k = pairwise_sq(a, b);
        k = hyper.nu * (-0.5 * k.array()).exp();
    } else {
        const double l = hyper.lengthscales.front();
        k = pairwise_sq(x, x2);
        k = (k.array() * (-1.0 / (2.0 * l * l))).exp();
    }
    const bool same = &x == &x2 || (x.rows() == x2.rows() && x == x2);
    if (include_noise_diag && same) k.diagonal().array() += hyper.sigma_n * hyper.sigma_n;
    return k;
}

/// Mean Euclidean distance over all distinct pairs of rows.
inline double mean_pairwise_distance(const Matrix& x) {
    const Eigen::Index n = x.rows();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) sum += (x.row(i) - x.row(j)).norm();
    return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace biopar
