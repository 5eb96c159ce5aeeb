#pragma once

// Gaussian process regression with an ARD kernel. In multi-output mode one
// hyperparameter vector is shared by every output and fitted by minimising
// the sum of squared per-output log marginal likelihoods; single-output
// mode fits each output independently by maximising its evidence.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "biopar/core.hpp"
#include "biopar/kernel.hpp"
#include "biopar/linalg.hpp"
#include "biopar/optim.hpp"

namespace biopar {

enum class OutputMode { single, multi };

inline const char* to_string(OutputMode m) { return m == OutputMode::multi ? "multi" : "single"; }

inline OutputMode output_mode_from_string(const std::string& s) {
    if (s == "multi") return OutputMode::multi;
    if (s == "single") return OutputMode::single;
    throw ConfigError("unknown output mode '" + s + "' (expected single|multi)");
}

/// Per-output log marginal likelihoods and their gradients with respect
/// to the log hyperparameters (one gradient column per output).
struct MarginalLikelihood {
    Vector value;
    Matrix gradient;
};

/// Evaluates log p(y_d | X, theta) for every column of y using one shared
/// Cholesky factorisation of K + sigma_n^2 I.
inline MarginalLikelihood log_marginal_likelihood_multi(const ArdHyper& hyper, const Matrix& x, const Matrix& y,
                                                        bool with_gradient = true) {
    const ScopedFlushDenormals ftz;
    const Eigen::Index n = x.rows();
    if (n < 1) throw DomainError("log_marginal_likelihood: need at least one sample");
    if (y.rows() != n) throw DomainError("log_marginal_likelihood: X and y row counts differ");
    const Matrix k = kernel_matrix(x, x, hyper, KernelKind::ard, true);
    const CholeskyFactor chol = robust_cholesky(k);
    const Matrix alpha = chol.solve(y);
    const double log_det = chol.log_det();
    constexpr double log2pi = 1.8378770664093454836;

    MarginalLikelihood out;
    out.value.resize(y.cols());
    for (Eigen::Index d = 0; d < y.cols(); ++d)
        out.value(d) = -0.5 * y.col(d).dot(alpha.col(d)) - 0.5 * log_det - 0.5 * static_cast<double>(n) * log2pi;
    if (!with_gradient) return out;

    const std::size_t nb = hyper.dims();
    const Eigen::Index np = static_cast<Eigen::Index>(2 + nb);
    out.gradient = Matrix::Zero(np, y.cols());
    const Matrix w = chol.solve(Matrix::Identity(n, n));

    // dK/dlog(nu) = Kf, dK/dlog(sigma_b) = Kf .* D_b / sigma_b^2, where Kf is
    // the noise-free kernel and D_b the squared band-b distance.
    std::vector<double> inv_l2(nb);
    for (std::size_t b = 0; b < nb; ++b) inv_l2[b] = 1.0 / (hyper.lengthscales[b] * hyper.lengthscales[b]);
    const Eigen::Index nd = y.cols();
    Vector q(nd);
    std::vector<double> db(nb);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            double s = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                const double diff = x(i, static_cast<Eigen::Index>(b)) - x(j, static_cast<Eigen::Index>(b));
                db[b] = diff * diff * inv_l2[b];
                s += db[b];
            }
            const double kf = hyper.nu * std::exp(-0.5 * s);
            const double mult = (i == j) ? 1.0 : 2.0;
            for (Eigen::Index d = 0; d < nd; ++d) q(d) = mult * (alpha(i, d) * alpha(j, d) - w(i, j)) * kf;
            for (Eigen::Index d = 0; d < nd; ++d) {
                out.gradient(0, d) += q(d);
                for (std::size_t b = 0; b < nb; ++b) out.gradient(static_cast<Eigen::Index>(b + 2), d) += q(d) * db[b];
            }
        }
    }
    const double sn2 = hyper.sigma_n * hyper.sigma_n;
    const double tr_w = w.trace();
    for (Eigen::Index d = 0; d < nd; ++d) {
        out.gradient.col(d) *= 0.5;
        out.gradient(1, d) = sn2 * (alpha.col(d).squaredNorm() - tr_w);
    }
    return out;
}

/// Single-output log marginal likelihood and its gradient in log space.
inline std::pair<double, Vector> log_marginal_likelihood(const ArdHyper& hyper, const Matrix& x, const Vector& y) {
    const auto r = log_marginal_likelihood_multi(hyper, x, y);
    return {r.value(0), r.gradient.col(0)};
}

enum class JointCost {
    squared_log_likelihood,  ///< C = sum_d (log p_d)^2, minimised
    sum_nll,                 ///< C = -sum_d log p_d
};

inline const char* to_string(JointCost c) { return c == JointCost::sum_nll ? "sum-nll" : "sq-loglik"; }

inline JointCost joint_cost_from_string(const std::string& s) {
    if (s == "sq-loglik") return JointCost::squared_log_likelihood;
    if (s == "sum-nll") return JointCost::sum_nll;
    throw ConfigError("unknown joint cost '" + s + "' (expected sq-loglik|sum-nll)");
}

struct GprConfig {
    OutputMode mode = OutputMode::multi;
    JointCost cost = JointCost::squared_log_likelihood;
    int restarts = 5;
    int max_iter = 200;
    /// Hyperparameters are fitted on at most this many training records
    /// (random subset); the final model always uses all of them.
    std::size_t hyperopt_subset = 500;
    std::uint64_t seed = 0;
    double sigma_n_floor = 1e-8;
    bool standardize_inputs = true;
    bool standardize_outputs = true;

    void validate() const {
        if (restarts < 1) throw ConfigError("GprConfig: restarts must be >= 1");
        if (max_iter < 1) throw ConfigError("GprConfig: max_iter must be >= 1");
        if (hyperopt_subset < 2) throw ConfigError("GprConfig: hyperopt_subset must be >= 2");
        if (!(sigma_n_floor > 0.0)) throw ConfigError("GprConfig: sigma_n_floor must be positive");
    }
};

/// One fitted Gaussian process serving the listed outputs.
struct GprComponent {
    ArdHyper hyper;
    std::vector<int> outputs;
    Matrix alpha;       ///< n x outputs.size(), standardised targets
    CholeskyFactor chol;
    Vector log_likelihood;  ///< per served output, on the full training set
};

struct GprModel {
    OutputMode mode = OutputMode::multi;
    Matrix x_train;  ///< standardised inputs
    Standardizer input_stats;
    Standardizer output_stats;
    std::vector<GprComponent> components;
    double final_cost = 0.0;

    Eigen::Index n_outputs() const { return output_stats.dims(); }
    Eigen::Index n_bands() const { return input_stats.dims(); }
};

namespace detail {

inline Vector lhs_start(const Vector& lo, const Vector& hi, const Matrix& design, int row) {
    Vector x(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) x(i) = lo(i) + design(row, i) * (hi(i) - lo(i));
    return x;
}

inline Matrix lhs_design(int n, int dims, Rng& rng) {
    Matrix u(n, dims);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int d = 0; d < dims; ++d) {
        std::iota(perm.begin(), perm.end(), 0);
        shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < n; ++i) u(i, d) = (perm[static_cast<std::size_t>(i)] + uniform01(rng)) / n;
    }
    return u;
}

/// Multi-start box-constrained optimisation of the hyperparameters for the
/// columns of y under the chosen cost. Returns the best hyperparameters.
inline ArdHyper optimise_hyper(const Matrix& x, const Matrix& y, JointCost cost, const GprConfig& cfg,
                               std::uint64_t seed, double* best_cost = nullptr) {
    const ScopedFlushDenormals ftz;
    const auto nb = static_cast<Eigen::Index>(x.cols());
    const Eigen::Index np = 2 + nb;
    Vector start_lo(np), start_hi(np), lo(np), hi(np);
    start_lo << -4.0, -8.0, Vector::Constant(nb, -4.0);
    start_hi << 4.0, 0.0, Vector::Constant(nb, 4.0);
    lo << -10.0, std::log(cfg.sigma_n_floor), Vector::Constant(nb, -8.0);
    hi << 10.0, 2.0, Vector::Constant(nb, 8.0);
    start_lo(1) = std::max(start_lo(1), lo(1));
    const optim::Box box{lo, hi};

    auto objective = [&](const Vector& theta, Vector& grad) {
        const auto ml = log_marginal_likelihood_multi(ArdHyper::from_log(theta), x, y);
        grad.setZero(np);
        double f = 0.0;
        for (Eigen::Index d = 0; d < ml.value.size(); ++d) {
            if (cost == JointCost::squared_log_likelihood) {
                f += ml.value(d) * ml.value(d);
                grad += 2.0 * ml.value(d) * ml.gradient.col(d);
            } else {
                f -= ml.value(d);
                grad -= ml.gradient.col(d);
            }
        }
        return f;
    };

    Rng rng(seed);
    const Matrix design = lhs_design(cfg.restarts, static_cast<int>(np), rng);
    optim::Options opt;
    opt.max_iter = cfg.max_iter;
    optim::Result best;
    for (int r = 0; r < cfg.restarts; ++r) {
        const Vector x0 = lhs_start(start_lo, start_hi, design, r);
        const auto res = optim::minimize_bfgs(objective, x0, box, opt);
        if (res.f < best.f) best = res;
    }
    if (!std::isfinite(best.f))
        throw NumericalError("train_gpr: hyperparameter optimisation failed from every restart");
    if (best_cost) *best_cost = best.f;
    return ArdHyper::from_log(best.x);
}

inline GprComponent fit_component(const Matrix& x, const Matrix& y_std, const ArdHyper& hyper, std::vector<int> outputs) {
    const ScopedFlushDenormals ftz;
    GprComponent c;
    c.hyper = hyper;
    c.outputs = std::move(outputs);
    Matrix y(y_std.rows(), static_cast<Eigen::Index>(c.outputs.size()));
    for (std::size_t k = 0; k < c.outputs.size(); ++k) y.col(static_cast<Eigen::Index>(k)) = y_std.col(c.outputs[k]);
    c.chol = robust_cholesky(kernel_matrix(x, x, hyper, KernelKind::ard, true));
    c.alpha = c.chol.solve(y);
    constexpr double log2pi = 1.8378770664093454836;
    const double log_det = c.chol.log_det();
    c.log_likelihood.resize(y.cols());
    for (Eigen::Index d = 0; d < y.cols(); ++d)
        c.log_likelihood(d) =
            -0.5 * y.col(d).dot(c.alpha.col(d)) - 0.5 * log_det - 0.5 * static_cast<double>(x.rows()) * log2pi;
    return c;
}

inline std::vector<std::size_t> random_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (k >= n) return idx;
    Rng rng(seed);
    shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

inline void check_training_data(const Matrix& x, const Matrix& y, const char* who) {
    if (x.rows() < 2) throw DataError(std::string(who) + ": need at least two training samples");
    if (y.rows() != x.rows()) throw DataError(std::string(who) + ": X and Y row counts differ");
    if (y.cols() < 1) throw DataError(std::string(who) + ": need at least one output");
    if (!x.allFinite() || !y.allFinite()) throw DataError(std::string(who) + ": non-finite training data");
}

inline GprModel prepare_gpr(const Matrix& x, const Matrix& y, OutputMode mode, bool std_in, bool std_out) {
    GprModel m;
    m.mode = mode;
    m.input_stats = std_in ? Standardizer::fit(x) : Standardizer::identity(x.cols());
    m.output_stats = std_out ? Standardizer::fit(y, &kOutputNames) : Standardizer::identity(y.cols());
    if (!std_out) Standardizer::fit(y, &kOutputNames);  // still reject constant targets
    m.x_train = m.input_stats.apply(x);
    return m;
}

}  // namespace detail

/// Builds a model with given hyperparameters: one entry for multi mode,
/// one per output for single mode.
inline GprModel fit_gpr(const Matrix& x, const Matrix& y, const std::vector<ArdHyper>& hypers, OutputMode mode,
                        bool standardize_inputs = true, bool standardize_outputs = true) {
    detail::check_training_data(x, y, "fit_gpr");
    GprModel m = detail::prepare_gpr(x, y, mode, standardize_inputs, standardize_outputs);
    const Matrix y_std = m.output_stats.apply(y);
    const auto d = static_cast<int>(y.cols());
    if (mode == OutputMode::multi) {
        if (hypers.size() != 1) throw ConfigError("fit_gpr: multi mode takes one shared hyperparameter set");
        std::vector<int> all(static_cast<std::size_t>(d));
        std::iota(all.begin(), all.end(), 0);
        m.components.push_back(detail::fit_component(m.x_train, y_std, hypers[0], all));
    } else {
        if (hypers.size() != static_cast<std::size_t>(d)) throw ConfigError("fit_gpr: single mode takes one hyperparameter set per output");
        for (int k = 0; k < d; ++k) m.components.push_back(detail::fit_component(m.x_train, y_std, hypers[static_cast<std::size_t>(k)], {k}));
    }
    return m;
}

/// Trains a GPR model with hyperparameters fitted by multi-start BFGS.
inline GprModel train_gpr(const Matrix& x, const Matrix& y, const GprConfig& cfg = {}) {
    cfg.validate();
    detail::check_training_data(x, y, "train_gpr");
    GprModel m = detail::prepare_gpr(x, y, cfg.mode, cfg.standardize_inputs, cfg.standardize_outputs);
    const Matrix y_std = m.output_stats.apply(y);
    const auto sub = detail::random_subset(static_cast<std::size_t>(x.rows()), cfg.hyperopt_subset, derive_seed(cfg.seed, 1));
    const Matrix xs = detail::take_rows(m.x_train, sub);
    const Matrix ys = detail::take_rows(y_std, sub);
    const auto d = static_cast<int>(y.cols());

    if (cfg.mode == OutputMode::multi) {
        double cost = 0.0;
        const ArdHyper h = detail::optimise_hyper(xs, ys, cfg.cost, cfg, derive_seed(cfg.seed, 2), &cost);
        std::vector<int> all(static_cast<std::size_t>(d));
        std::iota(all.begin(), all.end(), 0);
        m.components.push_back(detail::fit_component(m.x_train, y_std, h, all));
        m.final_cost = cost;
        if (cfg.cost == JointCost::squared_log_likelihood) {
            const auto ml = log_marginal_likelihood_multi(h, xs, ys, false);
            for (int k = 0; k < d; ++k)
                if (ml.value(k) > 0.0)
                    warn("train_gpr: log marginal likelihood of output '" +
                         std::string(k < kOutputs ? kOutputNames[static_cast<std::size_t>(k)] : "?") +
                         "' is positive; the squared joint cost is then minimised away from the likelihood maximum "
                         "(consider cost=sum-nll)");
        }
    } else {
        m.final_cost = 0.0;
        for (int k = 0; k < d; ++k) {
            double cost = 0.0;
            const ArdHyper h = detail::optimise_hyper(xs, ys.col(k), JointCost::sum_nll, cfg,
                                                      derive_seed(cfg.seed, 10 + static_cast<std::uint64_t>(k)), &cost);
            m.components.push_back(detail::fit_component(m.x_train, y_std, h, {k}));
            m.final_cost += cost;
        }
    }
    return m;
}

struct GprPrediction {
    Matrix mean;   ///< m x D, physical units
    Matrix sigma;  ///< m x D, predictive standard deviation, physical units
};

namespace detail {
inline Matrix standardized_inputs(const GprModel& model, const Matrix& xs, const char* who) {
    if (xs.cols() != model.n_bands())
        throw DataError(std::string(who) + ": inputs have " + std::to_string(xs.cols()) + " bands, model expects " +
                        std::to_string(model.n_bands()));
    return model.input_stats.apply(xs);
}
}  // namespace detail

/// Predictive mean only (cheap path used by Monte Carlo propagation).
inline Matrix predict_gpr_mean(const GprModel& model, const Matrix& xs) {
    const ScopedFlushDenormals ftz;
    const Matrix z = detail::standardized_inputs(model, xs, "predict_gpr");
    Matrix mean(xs.rows(), model.n_outputs());
    for (const auto& c : model.components) {
        const Matrix ks = kernel_matrix(z, model.x_train, c.hyper, KernelKind::ard, false);
        const Matrix mu = ks * c.alpha;
        for (std::size_t k = 0; k < c.outputs.size(); ++k) mean.col(c.outputs[k]) = mu.col(static_cast<Eigen::Index>(k));
    }
    return model.output_stats.invert(mean);
}

/// Predictive mean and standard deviation. The variance of a noisy
/// observation is sigma_n^2 + k** - k*^T (K + sigma_n^2 I)^-1 k*, evaluated
/// in standardised units and scaled back per output.
inline GprPrediction predict_gpr(const GprModel& model, const Matrix& xs) {
    const ScopedFlushDenormals ftz;
    const Matrix z = detail::standardized_inputs(model, xs, "predict_gpr");
    Matrix mean(xs.rows(), model.n_outputs());
    Matrix sd(xs.rows(), model.n_outputs());
    for (const auto& c : model.components) {
        const Matrix ks = kernel_matrix(z, model.x_train, c.hyper, KernelKind::ard, false);
        const Matrix mu = ks * c.alpha;
        const Matrix v = c.chol.lower.triangularView<Eigen::Lower>().solve(ks.transpose());
        const Vector explained = v.colwise().squaredNorm().transpose();
        const double prior = c.hyper.nu + c.hyper.sigma_n * c.hyper.sigma_n;
        const Vector var = (prior - explained.array()).cwiseMax(0.0).matrix();
        for (std::size_t k = 0; k < c.outputs.size(); ++k) {
            const int o = c.outputs[k];
            mean.col(o) = mu.col(static_cast<Eigen::Index>(k));
            sd.col(o) = var.array().sqrt() * model.output_stats.scale(o);
        }
    }
    return {model.output_stats.invert(mean), sd};
}

/// Predictive variance in standardised units for the component serving
/// output `o` (diagnostics and tests).
inline Vector predict_gpr_standardized_variance(const GprModel& model, const Matrix& xs, int o = 0) {
    const ScopedFlushDenormals ftz;
    const Matrix z = detail::standardized_inputs(model, xs, "predict_gpr");
    for (const auto& c : model.components) {
        if (std::find(c.outputs.begin(), c.outputs.end(), o) == c.outputs.end()) continue;
        const Matrix ks = kernel_matrix(z, model.x_train, c.hyper, KernelKind::ard, false);
        const Matrix v = c.chol.lower.triangularView<Eigen::Lower>().solve(ks.transpose());
        const double prior = c.hyper.nu + c.hyper.sigma_n * c.hyper.sigma_n;
        return (prior - v.colwise().squaredNorm().transpose().array()).cwiseMax(0.0).matrix();
    }
    throw ConfigError("predict_gpr: no component serves output " + std::to_string(o));
}

}  // namespace biopar
