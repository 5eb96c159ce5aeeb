#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "biopar/core.hpp"

namespace biopar::optim {

/// Objective returning the value and writing the gradient.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct Box {
    Vector lo;
    Vector hi;

    Vector project(const Vector& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
};

struct Options {
    int max_iter = 200;
    double f_tol = 1e-10;      ///< relative decrease below which we stop
    double g_tol = 1e-6;       ///< projected-gradient infinity norm
    double max_step = 2.0;     ///< largest coordinate move of a full step
    int max_backtracks = 40;
};

struct Result {
    Vector x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Box-projected BFGS with Armijo backtracking. Objective evaluations that
/// throw NumericalError or return a non-finite value are treated as +inf,
/// which makes the line search back off.
inline Result minimize_bfgs(const Objective& fn, const Vector& x0, const Box& box, const Options& opt = {}) {
    const Eigen::Index p = x0.size();
    Result res;
    auto eval = [&](const Vector& x, Vector& g) {
        ++res.evaluations;
        try {
            g.resize(p);
            const double f = fn(x, g);
            if (!std::isfinite(f) || !g.allFinite()) return std::numeric_limits<double>::infinity();
            return f;
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Vector x = box.project(x0), g(p);
    double f = eval(x, g);
    res.x = x;
    res.f = f;
    if (!std::isfinite(f)) return res;

    Matrix h = Matrix::Identity(p, p);
    for (int it = 0; it < opt.max_iter; ++it) {
        res.iterations = it + 1;
        // Projected gradient: ignore components pushing against an active bound.
        Vector pg = g;
        std::vector<char> active(static_cast<std::size_t>(p), 0);
        for (Eigen::Index i = 0; i < p; ++i)
            if ((x(i) <= box.lo(i) && g(i) > 0.0) || (x(i) >= box.hi(i) && g(i) < 0.0)) {
                pg(i) = 0.0;
                active[static_cast<std::size_t>(i)] = 1;
            }
        if (pg.lpNorm<Eigen::Infinity>() < opt.g_tol) {
            res.converged = true;
            break;
        }

        // Quasi-Newton step in the free variables only; otherwise the
        // curvature coupling to a pinned coordinate can point uphill.
        Vector d = -h * pg;
        for (Eigen::Index i = 0; i < p; ++i)
            if (active[static_cast<std::size_t>(i)]) d(i) = 0.0;
        if (pg.dot(d) >= 0.0) {
            h.setIdentity();
            d = -pg;
        }
        const double dmax = d.lpNorm<Eigen::Infinity>();
        if (dmax > opt.max_step) d *= opt.max_step / dmax;

        double t = 1.0;
        Vector x_new(p), g_new(p);
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int k = 0; k < opt.max_backtracks; ++k, t *= 0.5) {
            x_new = box.project(x + t * d);
            const Vector step = x_new - x;
            if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
            f_new = eval(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(step)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            res.converged = true;  // no descent possible along the search direction
            break;
        }

        const Vector s = x_new - x;
        const Vector y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            const Matrix i_rho = Matrix::Identity(p, p) - rho * s * y.transpose();
            h = i_rho * h * i_rho.transpose() + rho * s * s.transpose();
        }
        const double decrease = f - f_new;
        x = x_new;
        g = g_new;
        f = f_new;
        res.x = x;
        res.f = f;
        if (decrease <= opt.f_tol * (1.0 + std::abs(f))) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace biopar::optim
