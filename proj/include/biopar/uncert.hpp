#pragma once

// Input-error propagation (Monte Carlo), its lookup table and the total
// per-parameter error.

#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "biopar/core.hpp"
#include "biopar/io.hpp"
#include "biopar/numerics.hpp"

namespace biopar {

struct InputError {
    Bands err_k0{0.0, 0.0, 0.0};

    void validate() const {
        for (double e : err_k0)
            if (!(e >= 0.0) || !std::isfinite(e)) throw DomainError("InputError: per-band errors must be finite and >= 0");
    }
    static InputError uniform(double e) { return {{e, e, e}}; }
};

/// Standard deviation of the predictions of `predict` (a callable mapping an
/// M x 3 matrix of reflectances to M x D predictions) over M draws from
/// N(k0, diag(err^2)). Sample standard deviation with the M-1 divisor.
template <class Predictor>
Vector propagate_mc(const Predictor& predict, const Bands& k0, const InputError& err, int m_samples,
                    std::uint64_t seed) {
    if (m_samples < 2) throw ConfigError("propagate_mc: M must be >= 2");
    err.validate();
    Matrix draws(m_samples, kBands);
    Rng rng(seed);
    for (int i = 0; i < m_samples; ++i)
        for (int b = 0; b < kBands; ++b)
            draws(i, b) = k0[static_cast<std::size_t>(b)] + err.err_k0[static_cast<std::size_t>(b)] * standard_normal(rng);
    const Matrix pred = predict(draws);
    Vector sd(pred.cols());
    if (err.err_k0 == Bands{0.0, 0.0, 0.0}) return Vector::Zero(pred.cols());
    std::vector<double> col(static_cast<std::size_t>(m_samples));
    for (Eigen::Index d = 0; d < pred.cols(); ++d) {
        for (int i = 0; i < m_samples; ++i) col[static_cast<std::size_t>(i)] = pred(i, d);
        sd(d) = sample_std(col);
    }
    return sd;
}

/// Root-sum-square of the regression and input-error components.
inline double total_error(double sigma_gpr, double sigma_k0) {
    if (sigma_gpr < 0.0 || sigma_k0 < 0.0) throw DomainError("total_error: negative uncertainty component");
    return std::hypot(sigma_gpr, sigma_k0);
}

struct ErrorBudget {
    Vector sigma_gpr;
    Vector sigma_k0;
    Vector err_total;
};

inline ErrorBudget error_budget(const Vector& sigma_gpr, const Vector& sigma_k0) {
    if (sigma_gpr.size() != sigma_k0.size()) throw DomainError("error_budget: size mismatch");
    ErrorBudget e{sigma_gpr, sigma_k0, Vector(sigma_gpr.size())};
    for (Eigen::Index i = 0; i < sigma_gpr.size(); ++i) e.err_total(i) = total_error(sigma_gpr(i), sigma_k0(i));
    return e;
}

// ---------------------------------------------------------------------------
// Lookup table over (k0 red, k0 nir, k0 mir, error level).

struct LutAxes {
    std::array<std::vector<double>, kBands> k0;
    std::vector<double> err;

    static std::vector<double> range(double lo, double hi, double step) {
        std::vector<double> v;
        const auto n = static_cast<int>(std::llround((hi - lo) / step));
        for (int i = 0; i <= n; ++i) v.push_back(lo + step * i);
        return v;
    }

    /// 0..0.70 in steps of 0.02 per band, error levels 0.01..0.05.
    static LutAxes standard() {
        LutAxes a;
        for (auto& k : a.k0) k = range(0.0, 0.70, 0.02);
        a.err = {0.01, 0.02, 0.03, 0.04, 0.05};
        return a;
    }

    std::array<std::size_t, 4> shape() const { return {k0[0].size(), k0[1].size(), k0[2].size(), err.size()}; }
    std::size_t node_count() const { return k0[0].size() * k0[1].size() * k0[2].size() * err.size(); }

    const std::vector<double>& axis(int i) const { return i < kBands ? k0[static_cast<std::size_t>(i)] : err; }

    void validate() const {
        for (int i = 0; i < 4; ++i) {
            const auto& a = axis(i);
            if (a.size() < 2) throw ConfigError("LUT axis " + std::to_string(i) + " needs at least two nodes");
            for (std::size_t j = 0; j < a.size(); ++j) {
                if (!std::isfinite(a[j])) throw ConfigError("LUT axis " + std::to_string(i) + " has a non-finite node");
                if (j > 0 && !(a[j] > a[j - 1]))
                    throw ConfigError("LUT axis " + std::to_string(i) + " is not strictly increasing");
            }
        }
        if (err.front() < 0.0) throw ConfigError("LUT error axis must be >= 0");
    }

    std::array<std::size_t, 4> unravel(std::size_t node) const {
        const auto s = shape();
        std::array<std::size_t, 4> idx{};
        for (int i = 3; i >= 0; --i) {
            idx[static_cast<std::size_t>(i)] = node % s[static_cast<std::size_t>(i)];
            node /= s[static_cast<std::size_t>(i)];
        }
        return idx;
    }

    std::size_t ravel(const std::array<std::size_t, 4>& idx) const {
        const auto s = shape();
        std::size_t node = 0;
        for (int i = 0; i < 4; ++i) node = node * s[static_cast<std::size_t>(i)] + idx[static_cast<std::size_t>(i)];
        return node;
    }
};

struct UncertaintyLUT {
    LutAxes axes;
    int n_outputs = kOutputs;
    std::vector<double> values;  ///< node-major (row-major over the four axes), n_outputs per node
    nlohmann::json meta;         ///< model id, M, seed

    double value(std::size_t node, int output) const {
        return values[node * static_cast<std::size_t>(n_outputs) + static_cast<std::size_t>(output)];
    }
};

inline std::uint64_t lut_node_seed(std::uint64_t seed, std::size_t node) { return derive_seed(seed, node); }

/// Node reflectance triplet and (uniform) error level.
inline std::pair<Bands, InputError> lut_node(const LutAxes& axes, std::size_t node) {
    const auto idx = axes.unravel(node);
    return {Bands{axes.k0[0][idx[0]], axes.k0[1][idx[1]], axes.k0[2][idx[2]]}, InputError::uniform(axes.err[idx[3]])};
}

/// Runs `fn(i)` for i in [0, n) on `workers` threads. Work items must write
/// disjoint outputs; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, int workers, const Fn& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    const auto nw = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    for (std::size_t w = 0; w < nw; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!failure) failure = std::current_exception();
                    next.store(n);
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

template <class Predictor>
UncertaintyLUT build_lut(const Predictor& predict, const LutAxes& axes, int m_samples, std::uint64_t seed,
                         int workers = 1, const std::string& model_id = "") {
    axes.validate();
    if (m_samples < 2) throw ConfigError("build_lut: M must be >= 2");
    UncertaintyLUT lut;
    lut.axes = axes;
    const std::size_t n_nodes = axes.node_count();
    {
        const auto [k0, err] = lut_node(axes, 0);
        lut.n_outputs = static_cast<int>(propagate_mc(predict, k0, err, 2, 0).size());
    }
    lut.values.assign(n_nodes * static_cast<std::size_t>(lut.n_outputs), 0.0);
    parallel_for(n_nodes, workers, [&](std::size_t node) {
        const auto [k0, err] = lut_node(axes, node);
        const Vector s = propagate_mc(predict, k0, err, m_samples, lut_node_seed(seed, node));
        for (int o = 0; o < lut.n_outputs; ++o) lut.values[node * static_cast<std::size_t>(lut.n_outputs) + static_cast<std::size_t>(o)] = s(o);
    });
    lut.meta = {{"model_id", model_id}, {"M", m_samples}, {"seed", seed}};
    return lut;
}

struct LutQuery {
    Vector sigma;
    bool extrapolated = false;
};

/// Multilinear interpolation over the four axes. Coordinates outside the
/// grid are clamped to the boundary and reported as extrapolated.
inline LutQuery query_lut(const UncertaintyLUT& lut, const Bands& k0, double err_level) {
    const std::array<double, 4> q{k0[0], k0[1], k0[2], err_level};
    std::array<std::size_t, 4> lo{};
    std::array<double, 4> t{};
    LutQuery res;
    for (int i = 0; i < 4; ++i) {
        const auto& a = lut.axes.axis(i);
        double x = q[static_cast<std::size_t>(i)];
        if (!std::isfinite(x)) throw DomainError("query_lut: non-finite coordinate");
        if (x < a.front() || x > a.back()) {
            res.extrapolated = true;
            x = std::clamp(x, a.front(), a.back());
        }
        auto it = std::upper_bound(a.begin(), a.end(), x);
        std::size_t j = it == a.begin() ? 0 : static_cast<std::size_t>(it - a.begin()) - 1;
        if (j >= a.size() - 1) j = a.size() - 2;
        lo[static_cast<std::size_t>(i)] = j;
        t[static_cast<std::size_t>(i)] = (x - a[j]) / (a[j + 1] - a[j]);
    }
    res.sigma = Vector::Zero(lut.n_outputs);
    for (unsigned corner = 0; corner < 16; ++corner) {
        double w = 1.0;
        std::array<std::size_t, 4> idx{};
        for (int i = 0; i < 4; ++i) {
            const bool up = (corner >> i) & 1u;
            const auto k = static_cast<std::size_t>(i);
            idx[k] = lo[k] + (up ? 1 : 0);
            w *= up ? t[k] : 1.0 - t[k];
        }
        if (w == 0.0) continue;
        const std::size_t node = lut.axes.ravel(idx);
        for (int o = 0; o < lut.n_outputs; ++o) res.sigma(o) += w * lut.value(node, o);
    }
    return res;
}

inline constexpr char kLutMagic[8] = {'B', 'P', 'L', 'U', 'T', '\0', '\0', '\0'};
inline constexpr std::uint32_t kLutVersion = 1;

inline void save_lut(const UncertaintyLUT& lut, const std::filesystem::path& path) {
    auto out = io::open_out(path, true);
    io::write_magic(out, kLutMagic, kLutVersion);
    io::write_string(out, lut.meta.dump());
    io::write_u32(out, static_cast<std::uint32_t>(lut.n_outputs));
    for (int i = 0; i < 4; ++i) {
        const auto& a = lut.axes.axis(i);
        io::write_u64(out, a.size());
        io::write_f64s(out, a.data(), a.size());
    }
    io::write_u64(out, lut.values.size());
    io::write_f64s(out, lut.values.data(), lut.values.size());
    if (!out) throw DataError("failed writing " + path.string());
}

inline UncertaintyLUT load_lut(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open LUT file " + path.string());
    const auto version = io::read_magic(in, kLutMagic, path.string());
    if (version != kLutVersion) throw DataError(path.string() + ": unsupported LUT version " + std::to_string(version));
    UncertaintyLUT lut;
    try {
        lut.meta = nlohmann::json::parse(io::read_string(in, 1 << 20));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed LUT meta block: " + e.what());
    }
    lut.n_outputs = static_cast<int>(io::read_u32(in));
    if (lut.n_outputs < 1 || lut.n_outputs > 64) throw DataError(path.string() + ": bad output count");
    for (int i = 0; i < 4; ++i) {
        const auto n = io::read_u64(in);
        if (n > 100000) throw DataError(path.string() + ": axis too long");
        std::vector<double> a(n);
        io::read_f64s(in, a.data(), n);
        if (i < kBands) lut.axes.k0[static_cast<std::size_t>(i)] = std::move(a);
        else lut.axes.err = std::move(a);
    }
    lut.axes.validate();
    const auto n_values = io::read_u64(in);
    if (n_values != lut.axes.node_count() * static_cast<std::size_t>(lut.n_outputs))
        throw DataError(path.string() + ": value count does not match the axes");
    lut.values.resize(n_values);
    io::read_f64s(in, lut.values.data(), n_values);
    return lut;
}

}  // namespace biopar
