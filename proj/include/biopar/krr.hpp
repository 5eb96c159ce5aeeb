#pragma once

// Kernel ridge regression with an RBF kernel; lengthscale and ridge
// parameter chosen by k-fold cross validation on a shared grid.

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "biopar/core.hpp"
#include "biopar/gpr.hpp"
#include "biopar/kernel.hpp"
#include "biopar/linalg.hpp"

namespace biopar {

inline std::vector<double> log_spaced(double lo, double hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<std::size_t>(i)] = n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
    return v;
}

struct KrrConfig {
    OutputMode mode = OutputMode::multi;
    std::vector<double> lambdas = log_spaced(1e-5, 1e-2, 7);
    /// Lengthscale candidates as multiples of the mean pairwise distance of
    /// the (standardised) training inputs.
    std::vector<double> lengthscale_factors = log_spaced(0.1, 10.0, 7);
    int k_folds = 5;
    std::uint64_t seed = 0;
    /// Cross validation runs on at most this many records (random subset).
    std::size_t cv_subset = 1000;
    bool standardize_inputs = true;
    bool standardize_outputs = true;

    void validate() const {
        if (lambdas.empty() || lengthscale_factors.empty()) throw ConfigError("train_krr: empty hyperparameter grid");
        for (double l : lambdas)
            if (!(l > 0.0)) throw ConfigError("train_krr: lambdas must be positive");
        for (double f : lengthscale_factors)
            if (!(f > 0.0)) throw ConfigError("train_krr: lengthscale factors must be positive");
        if (k_folds < 2) throw ConfigError("train_krr: k_folds must be >= 2");
    }
};

/// Cross-validation score of one grid point.
struct CvScore {
    double lambda;
    double lengthscale;
    double rmse;  ///< mean over folds of the RMSE summed over outputs (standardised units)
};

struct KrrComponent {
    double lengthscale = 1.0;
    double lambda = 1e-3;
    std::vector<int> outputs;
    Matrix alpha;
    std::vector<CvScore> cv;
};

struct KrrModel {
    OutputMode mode = OutputMode::multi;
    Matrix x_train;
    Standardizer input_stats;
    Standardizer output_stats;
    std::vector<KrrComponent> components;
    double mean_distance = 0.0;

    Eigen::Index n_outputs() const { return output_stats.dims(); }
    Eigen::Index n_bands() const { return input_stats.dims(); }
};

namespace detail {

inline Matrix rbf(const Matrix& a, const Matrix& b, double lengthscale) {
    ArdHyper h;
    h.lengthscales = {lengthscale};
    return kernel_matrix(a, b, h, KernelKind::rbf, false);
}

inline Matrix krr_solve(const Matrix& k, double lambda, const Matrix& y) {
    Matrix a = k;
    a.diagonal().array() += lambda;
    return robust_cholesky(a).solve(y);
}

inline KrrComponent fit_krr_component(const Matrix& x, const Matrix& y_std, double lengthscale, double lambda,
                                      std::vector<int> outputs) {
    const ScopedFlushDenormals ftz;
    KrrComponent c;
    c.lengthscale = lengthscale;
    c.lambda = lambda;
    c.outputs = std::move(outputs);
    Matrix y(y_std.rows(), static_cast<Eigen::Index>(c.outputs.size()));
    for (std::size_t k = 0; k < c.outputs.size(); ++k) y.col(static_cast<Eigen::Index>(k)) = y_std.col(c.outputs[k]);
    c.alpha = krr_solve(rbf(x, x, lengthscale), lambda, y);
    return c;
}

/// Grid search. Returns the scores of every grid point; the winner has the
/// smallest score, ties going to the larger lambda, then larger lengthscale.
inline std::vector<CvScore> krr_cross_validate(const Matrix& x, const Matrix& y, const std::vector<double>& lambdas,
                                               const std::vector<double>& lengthscales, int k_folds, std::uint64_t seed) {
    const ScopedFlushDenormals ftz;
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k_folds));

    std::vector<std::vector<std::size_t>> train_idx(static_cast<std::size_t>(k_folds)), test_idx(static_cast<std::size_t>(k_folds));
    for (std::size_t i = 0; i < n; ++i)
        for (int f = 0; f < k_folds; ++f) (fold[i] == f ? test_idx : train_idx)[static_cast<std::size_t>(f)].push_back(i);

    std::vector<double> lam_sorted = lambdas, len_sorted = lengthscales;
    std::sort(lam_sorted.begin(), lam_sorted.end());
    std::sort(len_sorted.begin(), len_sorted.end());
    std::vector<CvScore> scores;
    for (double lam : lam_sorted)
        for (double len : len_sorted) scores.push_back({lam, len, 0.0});

    for (int f = 0; f < k_folds; ++f) {
        const Matrix xtr = take_rows(x, train_idx[static_cast<std::size_t>(f)]);
        const Matrix ytr = take_rows(y, train_idx[static_cast<std::size_t>(f)]);
        const Matrix xte = take_rows(x, test_idx[static_cast<std::size_t>(f)]);
        const Matrix yte = take_rows(y, test_idx[static_cast<std::size_t>(f)]);
        for (std::size_t li = 0; li < len_sorted.size(); ++li) {
            const Matrix k = rbf(xtr, xtr, len_sorted[li]);
            const Matrix ks = rbf(xte, xtr, len_sorted[li]);
            for (std::size_t la = 0; la < lam_sorted.size(); ++la) {
                double score;
                try {
                    const Matrix pred = ks * krr_solve(k, lam_sorted[la], ytr);
                    score = 0.0;
                    for (Eigen::Index d = 0; d < y.cols(); ++d)
                        score += std::sqrt((pred.col(d) - yte.col(d)).squaredNorm() / static_cast<double>(yte.rows()));
                } catch (const NumericalError&) {
                    score = std::numeric_limits<double>::infinity();
                }
                scores[la * len_sorted.size() + li].rmse += score / k_folds;
            }
        }
    }
    return scores;
}

inline const CvScore& select_cv(const std::vector<CvScore>& scores) {
    const CvScore* best = &scores.front();
    for (const auto& s : scores) {
        const bool better = s.rmse < best->rmse ||
                            (s.rmse == best->rmse && (s.lambda > best->lambda ||
                                                      (s.lambda == best->lambda && s.lengthscale > best->lengthscale)));
        if (better) best = &s;
    }
    if (!std::isfinite(best->rmse)) throw NumericalError("train_krr: every grid point failed");
    return *best;
}

inline KrrModel prepare_krr(const Matrix& x, const Matrix& y, OutputMode mode, bool std_in, bool std_out) {
    KrrModel m;
    m.mode = mode;
    m.input_stats = std_in ? Standardizer::fit(x) : Standardizer::identity(x.cols());
    m.output_stats = std_out ? Standardizer::fit(y, &kOutputNames) : Standardizer::identity(y.cols());
    m.x_train = m.input_stats.apply(x);
    m.mean_distance = mean_pairwise_distance(m.x_train);
    return m;
}

}  // namespace detail

/// Plain ridge fit with fixed lengthscale and lambda (no cross validation).
inline KrrModel fit_krr(const Matrix& x, const Matrix& y, double lengthscale, double lambda,
                        OutputMode mode = OutputMode::multi, bool standardize_inputs = true,
                        bool standardize_outputs = true) {
    detail::check_training_data(x, y, "fit_krr");
    if (!(lengthscale > 0.0) || !(lambda > 0.0)) throw ConfigError("fit_krr: lengthscale and lambda must be positive");
    KrrModel m = detail::prepare_krr(x, y, mode, standardize_inputs, standardize_outputs);
    const Matrix y_std = m.output_stats.apply(y);
    const auto d = static_cast<int>(y.cols());
    if (mode == OutputMode::multi) {
        std::vector<int> all(static_cast<std::size_t>(d));
        std::iota(all.begin(), all.end(), 0);
        m.components.push_back(detail::fit_krr_component(m.x_train, y_std, lengthscale, lambda, all));
    } else {
        for (int k = 0; k < d; ++k) m.components.push_back(detail::fit_krr_component(m.x_train, y_std, lengthscale, lambda, {k}));
    }
    return m;
}

/// Cross-validated KRR. In multi mode one (lengthscale, lambda) pair is
/// selected on the error summed over all outputs; in single mode each
/// output gets its own pair.
inline KrrModel train_krr(const Matrix& x, const Matrix& y, const KrrConfig& cfg = {}) {
    cfg.validate();
    detail::check_training_data(x, y, "train_krr");
    if (x.rows() < cfg.k_folds) throw DataError("train_krr: fewer samples than folds");
    KrrModel m = detail::prepare_krr(x, y, cfg.mode, cfg.standardize_inputs, cfg.standardize_outputs);
    const Matrix y_std = m.output_stats.apply(y);
    std::vector<double> lengths;
    const double base = m.mean_distance > 0.0 ? m.mean_distance : 1.0;
    for (double f : cfg.lengthscale_factors) lengths.push_back(f * base);

    const auto sub = detail::random_subset(static_cast<std::size_t>(x.rows()), std::max<std::size_t>(cfg.cv_subset, static_cast<std::size_t>(cfg.k_folds)),
                                           derive_seed(cfg.seed, 1));
    const Matrix xs = detail::take_rows(m.x_train, sub);
    const Matrix ys = detail::take_rows(y_std, sub);
    const auto d = static_cast<int>(y.cols());

    auto fit_outputs = [&](std::vector<int> outs, std::uint64_t stream) {
        Matrix yo(ys.rows(), static_cast<Eigen::Index>(outs.size()));
        for (std::size_t k = 0; k < outs.size(); ++k) yo.col(static_cast<Eigen::Index>(k)) = ys.col(outs[k]);
        auto scores = detail::krr_cross_validate(xs, yo, cfg.lambdas, lengths, cfg.k_folds, derive_seed(cfg.seed, stream));
        const auto best = detail::select_cv(scores);
        auto c = detail::fit_krr_component(m.x_train, y_std, best.lengthscale, best.lambda, std::move(outs));
        c.cv = std::move(scores);
        return c;
    };

    if (cfg.mode == OutputMode::multi) {
        std::vector<int> all(static_cast<std::size_t>(d));
        std::iota(all.begin(), all.end(), 0);
        m.components.push_back(fit_outputs(all, 2));
    } else {
        for (int k = 0; k < d; ++k) m.components.push_back(fit_outputs({k}, 10 + static_cast<std::uint64_t>(k)));
    }
    return m;
}

inline Matrix predict_krr(const KrrModel& model, const Matrix& xs) {
    const ScopedFlushDenormals ftz;
    if (xs.cols() != model.n_bands())
        throw DataError("predict_krr: inputs have " + std::to_string(xs.cols()) + " bands, model expects " +
                        std::to_string(model.n_bands()));
    const Matrix z = model.input_stats.apply(xs);
    Matrix out(xs.rows(), model.n_outputs());
    for (const auto& c : model.components) {
        const Matrix pred = detail::rbf(z, model.x_train, c.lengthscale) * c.alpha;
        for (std::size_t k = 0; k < c.outputs.size(); ++k) out.col(c.outputs[k]) = pred.col(static_cast<Eigen::Index>(k));
    }
    return model.output_stats.invert(out);
}

}  // namespace biopar
