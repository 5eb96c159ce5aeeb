#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "biopar/core.hpp"

namespace biopar {

/// Nodes and weights of an n-point Gauss-Legendre rule on [a, b].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline QuadratureRule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw ConfigError("gauss_legendre: need at least one node");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double mid = 0.5 * (b + a);
    const double half = 0.5 * (b - a);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Newton iteration on P_n starting from the Chebyshev-like guess.
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            dp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / dp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        rule.nodes[i] = mid - half * z;
        rule.nodes[n - 1 - i] = mid + half * z;
        rule.weights[i] = 2.0 * half / ((1.0 - z * z) * dp * dp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    return rule;
}

/// Gaussian N(mean, std^2) restricted to [lo, hi], sampled by inverse CDF.
class TruncatedNormal {
public:
    TruncatedNormal(double mean, double std, double lo, double hi)
        : mean_(mean), std_(std), lo_(lo), hi_(hi) {
        if (!(std > 0.0) || !(lo < hi)) throw ConfigError("TruncatedNormal: need std > 0 and lo < hi");
        const boost::math::normal unit;
        cdf_lo_ = boost::math::cdf(unit, (lo - mean) / std);
        cdf_hi_ = boost::math::cdf(unit, (hi - mean) / std);
        if (!(cdf_hi_ > cdf_lo_)) throw ConfigError("TruncatedNormal: support carries no probability mass");
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }

    /// Maps u in [0,1] to the truncated law; the result always lies in [lo, hi].
    double quantile(double u) const {
        const boost::math::normal unit;
        double p = cdf_lo_ + u * (cdf_hi_ - cdf_lo_);
        p = std::clamp(p, std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));
        const double x = mean_ + std_ * boost::math::quantile(unit, p);
        return std::clamp(x, lo_, hi_);
    }

    double cdf(double x) const {
        if (x <= lo_) return 0.0;
        if (x >= hi_) return 1.0;
        const boost::math::normal unit;
        return (boost::math::cdf(unit, (x - mean_) / std_) - cdf_lo_) / (cdf_hi_ - cdf_lo_);
    }

private:
    double mean_, std_, lo_, hi_;
    double cdf_lo_ = 0.0, cdf_hi_ = 1.0;
};

/// Sample standard deviation with the (n-1) divisor. Deviations are taken
/// from the first value, so a constant sequence yields exactly zero.
template <class Range>
double sample_std(const Range& values) {
    std::size_t n = 0;
    double first = 0.0, sum = 0.0, sum_sq = 0.0;
    for (double v : values) {
        if (n == 0) first = v;
        const double d = v - first;
        sum += d;
        sum_sq += d * d;
        ++n;
    }
    if (n < 2) return 0.0;
    const double var = (sum_sq - sum * sum / static_cast<double>(n)) / static_cast<double>(n - 1);
    return var > 0.0 ? std::sqrt(var) : 0.0;
}

}  // namespace biopar
