#pragma once

// One-hidden-layer perceptron (sigmoid hidden units, linear outputs) trained
// by mini-batch backpropagation on the squared error.

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "biopar/core.hpp"
#include "biopar/gpr.hpp"
#include "biopar/linalg.hpp"

namespace biopar {

struct Network {
    Matrix w1;  ///< h x B
    Vector b1;  ///< h
    Matrix w2;  ///< D x h
    Vector b2;  ///< D

    Eigen::Index hidden() const { return w1.rows(); }
    bool finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }
};

inline Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

/// Forward pass on row-major samples (m x B) -> m x D, no standardisation.
inline Matrix forward(const Network& net, const Matrix& x) {
    const Matrix h = sigmoid((x * net.w1.transpose()).rowwise() + net.b1.transpose());
    return (h * net.w2.transpose()).rowwise() + net.b2.transpose();
}

struct NnConfig {
    OutputMode mode = OutputMode::multi;
    std::vector<int> hidden = {2, 5, 10, 20, 30};
    std::vector<double> learning_rates = {0.001, 0.01, 0.1};
    int epochs = 500;
    int batch = 32;
    int patience = 50;
    int n_init = 5;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        if (hidden.empty() || learning_rates.empty()) throw ConfigError("train_nn: empty hyperparameter grid");
        for (int h : hidden)
            if (h < 2 || h > 30) throw ConfigError("train_nn: hidden size " + std::to_string(h) + " outside [2,30]");
        for (double lr : learning_rates)
            if (!(lr > 0.0)) throw ConfigError("train_nn: learning rates must be positive");
        if (epochs < 1 || batch < 1 || patience < 1 || n_init < 1)
            throw ConfigError("train_nn: epochs, batch, patience and n_init must be >= 1");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw ConfigError("train_nn: validation_fraction must be in (0,1)");
    }
};

struct NnComponent {
    Network net;
    std::vector<int> outputs;
    double learning_rate = 0.0;
    int init = 0;
    int epochs_run = 0;
    double validation_rmse = 0.0;  ///< standardised units, summed over served outputs
};

struct NnModel {
    OutputMode mode = OutputMode::multi;
    Standardizer input_stats;
    Standardizer output_stats;
    std::vector<NnComponent> components;
    std::uint64_t seed = 0;

    Eigen::Index n_outputs() const { return output_stats.dims(); }
    Eigen::Index n_bands() const { return input_stats.dims(); }
};

namespace detail {

inline double nn_rmse_sum(const Network& net, const Matrix& x, const Matrix& y) {
    const Matrix r = forward(net, x) - y;
    double s = 0.0;
    for (Eigen::Index d = 0; d < y.cols(); ++d) s += std::sqrt(r.col(d).squaredNorm() / static_cast<double>(y.rows()));
    return s;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
inline Network init_network(Eigen::Index b, Eigen::Index h, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    Network net{Matrix(h, b), Vector::Zero(h), Matrix(d, h), Vector::Zero(d)};
    const double s1 = 1.0 / std::sqrt(static_cast<double>(b));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
    for (Eigen::Index i = 0; i < net.w1.size(); ++i) net.w1.data()[i] = s1 * (2.0 * uniform01(rng) - 1.0);
    for (Eigen::Index i = 0; i < net.w2.size(); ++i) net.w2.data()[i] = s2 * (2.0 * uniform01(rng) - 1.0);
    return net;
}

struct NnRun {
    Network best;
    double val_rmse = std::numeric_limits<double>::infinity();
    int epochs_run = 0;
};

/// Mini-batch SGD with early stopping on the validation set. Throws
/// NumericalError naming the epoch when the training loss stops being finite.
inline NnRun train_network(Network net, const Matrix& xtr, const Matrix& ytr, const Matrix& xva, const Matrix& yva,
                           double lr, const NnConfig& cfg, std::uint64_t seed) {
    const ScopedFlushDenormals ftz;
    Rng rng(seed);
    const Eigen::Index n = xtr.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    NnRun run;
    run.best = net;
    int since_best = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order.begin(), order.end(), rng);
        double loss = 0.0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch) {
            const Eigen::Index m = std::min<Eigen::Index>(cfg.batch, n - start);
            Matrix xb(m, xtr.cols()), yb(m, ytr.cols());
            for (Eigen::Index i = 0; i < m; ++i) {
                xb.row(i) = xtr.row(order[static_cast<std::size_t>(start + i)]);
                yb.row(i) = ytr.row(order[static_cast<std::size_t>(start + i)]);
            }
            const Matrix h = sigmoid((xb * net.w1.transpose()).rowwise() + net.b1.transpose());
            const Matrix out = (h * net.w2.transpose()).rowwise() + net.b2.transpose();
            const Matrix err = out - yb;  // dL/dout for L = 0.5 * mean ||err||^2
            loss += err.squaredNorm();
            const Matrix dh = ((err * net.w2).array() * h.array() * (1.0 - h.array())).matrix();
            const double scale = lr / static_cast<double>(m);
            net.w2 -= scale * err.transpose() * h;
            net.b2 -= scale * err.colwise().sum().transpose();
            net.w1 -= scale * dh.transpose() * xb;
            net.b1 -= scale * dh.colwise().sum().transpose();
        }
        run.epochs_run = epoch + 1;
        if (!std::isfinite(loss) || !net.finite())
            throw NumericalError("train_nn: non-finite training loss at epoch " + std::to_string(epoch));
        const double val = nn_rmse_sum(net, xva, yva);
        if (val < run.val_rmse) {
            run.val_rmse = val;
            run.best = net;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return run;
}

inline NnComponent select_network(const Matrix& xtr, const Matrix& ytr, const Matrix& xva, const Matrix& yva,
                                  std::vector<int> outputs, const NnConfig& cfg, std::uint64_t stream) {
    NnComponent best;
    best.validation_rmse = std::numeric_limits<double>::infinity();
    std::string last_error;
    std::uint64_t trial = 0;
    for (int h : cfg.hidden)
        for (double lr : cfg.learning_rates)
            for (int init = 0; init < cfg.n_init; ++init, ++trial) {
                const std::uint64_t s = derive_seed(derive_seed(cfg.seed, stream), trial);
                try {
                    const Network net0 = init_network(xtr.cols(), h, ytr.cols(), derive_seed(s, 0));
                    auto run = train_network(net0, xtr, ytr, xva, yva, lr, cfg, derive_seed(s, 1));
                    if (run.val_rmse < best.validation_rmse) {
                        best.net = std::move(run.best);
                        best.learning_rate = lr;
                        best.init = init;
                        best.epochs_run = run.epochs_run;
                        best.validation_rmse = run.val_rmse;
                    }
                } catch (const NumericalError& e) {
                    last_error = e.what();  // diverged configuration, skipped
                }
            }
    if (!std::isfinite(best.validation_rmse)) throw NumericalError(last_error.empty() ? "train_nn: no configuration trained" : last_error);
    best.outputs = std::move(outputs);
    return best;
}

}  // namespace detail

/// Grid search over (hidden, learning rate, initialisation) scored on a
/// held-out fraction of the training set.
inline NnModel train_nn(const Matrix& x, const Matrix& y, const NnConfig& cfg = {}) {
    cfg.validate();
    detail::check_training_data(x, y, "train_nn");
    if (x.rows() < cfg.batch) throw DataError("train_nn: fewer samples than the batch size");
    NnModel m;
    m.mode = cfg.mode;
    m.seed = cfg.seed;
    m.input_stats = Standardizer::fit(x);
    m.output_stats = Standardizer::fit(y, &kOutputNames);
    const Matrix xz = m.input_stats.apply(x);
    const Matrix yz = m.output_stats.apply(y);

    const auto n = static_cast<std::size_t>(x.rows());
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n))));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, 1));
    shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> tr(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(val.begin(), val.end());
    std::sort(tr.begin(), tr.end());
    if (tr.empty()) throw DataError("train_nn: validation split leaves no training samples");
    const Matrix xtr = detail::take_rows(xz, tr), xva = detail::take_rows(xz, val);
    const Matrix ytr_all = detail::take_rows(yz, tr), yva_all = detail::take_rows(yz, val);

    const auto d = static_cast<int>(y.cols());
    if (cfg.mode == OutputMode::multi) {
        std::vector<int> all(static_cast<std::size_t>(d));
        std::iota(all.begin(), all.end(), 0);
        m.components.push_back(detail::select_network(xtr, ytr_all, xva, yva_all, all, cfg, 2));
    } else {
        for (int k = 0; k < d; ++k)
            m.components.push_back(detail::select_network(xtr, ytr_all.col(k), xva, yva_all.col(k), {k}, cfg,
                                                          10 + static_cast<std::uint64_t>(k)));
    }
    return m;
}

inline Matrix predict_nn(const NnModel& model, const Matrix& xs) {
    const ScopedFlushDenormals ftz;
    if (xs.cols() != model.n_bands())
        throw DataError("predict_nn: inputs have " + std::to_string(xs.cols()) + " bands, model expects " +
                        std::to_string(model.n_bands()));
    const Matrix z = model.input_stats.apply(xs);
    Matrix out(xs.rows(), model.n_outputs());
    for (const auto& c : model.components) {
        const Matrix pred = forward(c.net, z);
        for (std::size_t k = 0; k < c.outputs.size(); ++k) out.col(c.outputs[k]) = pred.col(static_cast<Eigen::Index>(k));
    }
    return model.output_stats.invert(out);
}

}  // namespace biopar
