#pragma once

// Accuracy metrics and the experiment drivers: method assessment, training
// size curve, repeated-split robustness, noise sensitivity over cover types
// and red/NIR isolines.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "biopar/core.hpp"
#include "biopar/gpr.hpp"
#include "biopar/io.hpp"
#include "biopar/krr.hpp"
#include "biopar/model_io.hpp"
#include "biopar/nn.hpp"
#include "biopar/raster.hpp"
#include "biopar/simdb.hpp"
#include "biopar/uncert.hpp"

namespace biopar::eval {

struct MetricBundle {
    Vector rmse, r2, bias, rrmse;  ///< one entry per output; rrmse in percent of the truth range
};

inline MetricBundle compute_metrics(const Matrix& pred, const Matrix& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw DataError("compute_metrics: shape mismatch");
    if (truth.rows() < 2) throw DataError("compute_metrics: need at least two records");
    const auto d = truth.cols();
    const double n = static_cast<double>(truth.rows());
    MetricBundle m{Vector(d), Vector(d), Vector(d), Vector(d)};
    for (Eigen::Index c = 0; c < d; ++c) {
        const Vector r = pred.col(c) - truth.col(c);
        const double ss_res = r.squaredNorm();
        const double mean = truth.col(c).mean();
        const double ss_tot = (truth.col(c).array() - mean).square().sum();
        const double range = truth.col(c).maxCoeff() - truth.col(c).minCoeff();
        if (!(range > 0.0)) throw DataError("compute_metrics: zero truth range, rrmse undefined");
        m.rmse(c) = std::sqrt(ss_res / n);
        m.bias(c) = r.sum() / n;
        m.r2(c) = 1.0 - ss_res / ss_tot;
        m.rrmse(c) = 100.0 * m.rmse(c) / range;
    }
    return m;
}

/// Percentage reduction of RMSE achieved by the multi-output model.
inline double rmse_gain(double rmse_single, double rmse_multi) {
    if (!(rmse_single > 0.0)) throw DomainError("rmse_gain: single-output RMSE must be positive");
    return 100.0 * (rmse_single - rmse_multi) / rmse_single;
}

// ---------------------------------------------------------------------------
// Methods.

enum class Method { gpr, krr, nn };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::gpr: return "gpr";
        case Method::krr: return "krr";
        default: return "nn";
    }
}

inline Method method_from_string(const std::string& s) {
    if (s == "gpr") return Method::gpr;
    if (s == "krr") return Method::krr;
    if (s == "nn") return Method::nn;
    throw ConfigError("unknown method '" + s + "' (expected gpr|krr|nn)");
}

struct MethodConfigs {
    GprConfig gpr;
    KrrConfig krr;
    NnConfig nn;
};

inline AnyModel train_model(Method method, OutputMode mode, const Matrix& x, const Matrix& y, const MethodConfigs& cfg,
                            std::uint64_t seed) {
    switch (method) {
        case Method::gpr: {
            auto c = cfg.gpr;
            c.mode = mode;
            c.seed = seed;
            return train_gpr(x, y, c);
        }
        case Method::krr: {
            auto c = cfg.krr;
            c.mode = mode;
            c.seed = seed;
            return train_krr(x, y, c);
        }
        default: {
            auto c = cfg.nn;
            c.mode = mode;
            c.seed = seed;
            return train_nn(x, y, c);
        }
    }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline Matrix covariance(const Matrix& y) {
    const Matrix c = y.rowwise() - y.colwise().mean();
    return (c.transpose() * c) / static_cast<double>(y.rows() - 1);
}

// ---------------------------------------------------------------------------
// Assessment: 80/20 split, every method in single and multi mode.

struct AssessmentConfig {
    simdb::BuildOptions db = [] {
        simdb::BuildOptions b;
        b.noise.sigma = 0.015;
        return b;
    }();
    double train_fraction = 0.8;
    std::vector<Method> methods{Method::gpr, Method::krr, Method::nn};
    MethodConfigs cfg;
    std::uint64_t seed = 0;
    double saturation_lai = 5.0;
};

struct MethodRun {
    Method method;
    OutputMode mode;
    MetricBundle metrics;
    double train_seconds = 0.0;
};

struct AssessmentResult {
    std::size_t n_train = 0, n_test = 0;
    std::vector<MethodRun> runs;
    /// Percentage RMSE gain of multi over single per method (rows follow `methods`), per output.
    std::vector<std::pair<Method, Vector>> gains;
    double saturation_residual = std::numeric_limits<double>::quiet_NaN();  ///< GPR multi, truth LAI above threshold
    std::size_t saturation_count = 0;
    double cov_distance_multi = std::numeric_limits<double>::quiet_NaN();
    double cov_distance_single = std::numeric_limits<double>::quiet_NaN();

    const MethodRun& find(Method m, OutputMode mode) const {
        for (const auto& r : runs)
            if (r.method == m && r.mode == mode) return r;
        throw ConfigError(std::string("assessment: no run for ") + to_string(m) + "/" + biopar::to_string(mode));
    }
};

/// Runs on `db`; `cfg.db` is ignored.
inline AssessmentResult run_assessment(const simdb::SimulationDatabase& db, const AssessmentConfig& cfg) {
    const auto [train, test] = simdb::split_database(db, cfg.train_fraction, derive_seed(cfg.seed, 1));
    const Matrix xtr = train.inputs(), ytr = train.targets();
    const Matrix xte = test.inputs(), yte = test.targets();
    AssessmentResult res;
    res.n_train = train.size();
    res.n_test = test.size();
    Matrix gpr_multi_pred, gpr_single_pred;
    std::uint64_t stream = 10;
    for (Method m : cfg.methods) {
        Vector rm_single, rm_multi;
        for (OutputMode mode : {OutputMode::single, OutputMode::multi}) {
            const auto t0 = std::chrono::steady_clock::now();
            const AnyModel model = train_model(m, mode, xtr, ytr, cfg.cfg, derive_seed(cfg.seed, stream++));
            const double secs = seconds_since(t0);
            const Matrix pred = predict_mean(model, xte);
            res.runs.push_back({m, mode, compute_metrics(pred, yte), secs});
            (mode == OutputMode::single ? rm_single : rm_multi) = res.runs.back().metrics.rmse;
            if (m == Method::gpr) (mode == OutputMode::single ? gpr_single_pred : gpr_multi_pred) = pred;
        }
        Vector g(rm_single.size());
        for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = rmse_gain(rm_single(k), rm_multi(k));
        res.gains.emplace_back(m, g);
    }
    if (gpr_multi_pred.size() > 0) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < yte.rows(); ++i)
            if (yte(i, 0) > cfg.saturation_lai) {
                sum += gpr_multi_pred(i, 0) - yte(i, 0);
                ++res.saturation_count;
            }
        if (res.saturation_count > 0) res.saturation_residual = sum / static_cast<double>(res.saturation_count);
        const Matrix ct = covariance(yte);
        res.cov_distance_multi = (covariance(gpr_multi_pred) - ct).norm();
        res.cov_distance_single = (covariance(gpr_single_pred) - ct).norm();
    }
    return res;
}

inline AssessmentResult run_assessment(const AssessmentConfig& cfg) {
    return run_assessment(simdb::build_database(cfg.db), cfg);
}

inline void write_assessment_csv(const AssessmentResult& r, const std::filesystem::path& path) {
    auto out = io::open_out(path);
    out << "method,mode,output,rmse,r2,bias,rrmse,train_seconds\n";
    for (const auto& run : r.runs)
        for (int o = 0; o < run.metrics.rmse.size(); ++o)
            out << to_string(run.method) << ',' << biopar::to_string(run.mode) << ',' << kOutputNames[static_cast<std::size_t>(o)] << ','
                << io::format_double(run.metrics.rmse(o)) << ',' << io::format_double(run.metrics.r2(o)) << ','
                << io::format_double(run.metrics.bias(o)) << ',' << io::format_double(run.metrics.rrmse(o)) << ','
                << io::format_double(run.train_seconds) << '\n';
}

inline nlohmann::json assessment_summary(const AssessmentResult& r) {
    nlohmann::json j{{"n_train", r.n_train}, {"n_test", r.n_test}};
    for (const auto& [m, g] : r.gains)
        for (int o = 0; o < g.size(); ++o) j["gain_percent"][to_string(m)][std::string(kOutputNames[static_cast<std::size_t>(o)])] = g(o);
    j["saturation"] = {{"mean_residual", std::isnan(r.saturation_residual) ? nlohmann::json(nullptr) : nlohmann::json(r.saturation_residual)},
                       {"count", r.saturation_count}};
    j["covariance_frobenius"] = {{"gpr_multi", r.cov_distance_multi}, {"gpr_single", r.cov_distance_single}};
    return j;
}

// ---------------------------------------------------------------------------
// Training-size curve.

inline std::vector<int> default_sample_sizes() {
    std::vector<int> s{50, 100, 200, 300, 400, 500};
    for (int n = 1000; n <= 6000; n += 500) s.push_back(n);
    return s;
}

struct SampleSizeConfig {
    simdb::BuildOptions db = [] {
        simdb::BuildOptions b;
        b.n = 7000;
        b.noise.sigma = 0.015;
        return b;
    }();
    int test_size = 1000;
    std::vector<int> sizes = default_sample_sizes();
    std::vector<Method> methods{Method::gpr};
    OutputMode mode = OutputMode::multi;
    MethodConfigs cfg;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct SizePoint {
    Method method;
    int n_train;
    Vector rmse;
};

inline std::vector<SizePoint> run_sample_size_experiment(const SampleSizeConfig& cfg) {
    const int max_size = cfg.sizes.empty() ? 0 : *std::max_element(cfg.sizes.begin(), cfg.sizes.end());
    if (cfg.db.n < max_size + cfg.test_size)
        throw ConfigError("sample-size: database of " + std::to_string(cfg.db.n) + " records cannot hold the largest subset plus the test set");
    const auto db = simdb::build_database(cfg.db);
    const double frac = 1.0 - static_cast<double>(cfg.test_size) / static_cast<double>(db.size());
    const auto [pool, test] = simdb::split_database(db, frac, derive_seed(cfg.seed, 1));
    const Matrix xte = test.inputs(), yte = test.targets();
    const Matrix xpool = pool.inputs(), ypool = pool.targets();

    std::vector<SizePoint> out(cfg.sizes.size() * cfg.methods.size());
    parallel_for(out.size(), cfg.workers, [&](std::size_t job) {
        const std::size_t si = job / cfg.methods.size();
        const Method m = cfg.methods[job % cfg.methods.size()];
        const int n = cfg.sizes[si];
        const auto idx = detail::random_subset(pool.size(), static_cast<std::size_t>(n), derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(n)));
        const Matrix x = detail::take_rows(xpool, idx), y = detail::take_rows(ypool, idx);
        const AnyModel model = train_model(m, cfg.mode, x, y, cfg.cfg, derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(n)));
        out[job] = {m, n, compute_metrics(predict_mean(model, xte), yte).rmse};
    });
    return out;
}

inline void write_sample_size_csv(const std::vector<SizePoint>& pts, const std::filesystem::path& path) {
    auto out = io::open_out(path);
    out << "method,n_train,rmse_lai,rmse_fvc,rmse_fapar\n";
    for (const auto& p : pts)
        out << to_string(p.method) << ',' << p.n_train << ',' << io::format_double(p.rmse(0)) << ','
            << io::format_double(p.rmse(1)) << ',' << io::format_double(p.rmse(2)) << '\n';
}

// ---------------------------------------------------------------------------
// Robustness: repeated random splits.

struct RobustnessConfig {
    simdb::BuildOptions db = [] {
        simdb::BuildOptions b;
        b.noise.sigma = 0.015;
        return b;
    }();
    int n_reps = 50;
    double train_fraction = 0.8;
    std::vector<Method> methods{Method::gpr, Method::krr, Method::nn};
    OutputMode mode = OutputMode::multi;
    MethodConfigs cfg;
    std::uint64_t seed = 0;
    /// When set every repetition reuses the same split and training seeds.
    bool identical_reps = false;
    int workers = 1;
};

struct RepRow {
    int rep;
    Method method;
    Vector rmse;
};

struct DistributionSummary {
    Method method;
    int output;
    double mean, std, q1, median, q3;
    int outliers;  ///< beyond 1.5 IQR from the quartiles
};

struct RobustnessResult {
    std::vector<RepRow> rows;
    std::vector<DistributionSummary> summary;
};

inline double quantile_sorted(const std::vector<double>& s, double p) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = p * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline DistributionSummary summarize(Method m, int output, std::vector<double> v) {
    std::sort(v.begin(), v.end());
    DistributionSummary d{m, output, 0.0, sample_std(v), quantile_sorted(v, 0.25), quantile_sorted(v, 0.5),
                          quantile_sorted(v, 0.75), 0};
    for (double x : v) d.mean += x / static_cast<double>(v.size());
    const double iqr = d.q3 - d.q1;
    for (double x : v)
        if (x < d.q1 - 1.5 * iqr || x > d.q3 + 1.5 * iqr) ++d.outliers;
    return d;
}

/// Runs on `db`; `cfg.db` is ignored.
inline RobustnessResult run_robustness_experiment(const simdb::SimulationDatabase& db, const RobustnessConfig& cfg) {
    if (cfg.n_reps < 2) throw ConfigError("robustness: n_reps must be >= 2");
    RobustnessResult res;
    res.rows.resize(static_cast<std::size_t>(cfg.n_reps) * cfg.methods.size());
    parallel_for(res.rows.size(), cfg.workers, [&](std::size_t job) {
        const int rep = static_cast<int>(job / cfg.methods.size());
        const std::size_t mi = job % cfg.methods.size();
        const std::uint64_t rep_key = cfg.identical_reps ? 0 : static_cast<std::uint64_t>(rep) + 1;
        const auto [train, test] = simdb::split_database(db, cfg.train_fraction, derive_seed(cfg.seed, rep_key));
        const AnyModel model = train_model(cfg.methods[mi], cfg.mode, train.inputs(), train.targets(), cfg.cfg,
                                           derive_seed(derive_seed(cfg.seed, rep_key), 7 + mi));
        res.rows[job] = {rep, cfg.methods[mi], compute_metrics(predict_mean(model, test.inputs()), test.targets()).rmse};
    });
    for (Method m : cfg.methods)
        for (int o = 0; o < kOutputs; ++o) {
            std::vector<double> v;
            for (const auto& r : res.rows)
                if (r.method == m) v.push_back(r.rmse(o));
            res.summary.push_back(summarize(m, o, std::move(v)));
        }
    return res;
}

inline RobustnessResult run_robustness_experiment(const RobustnessConfig& cfg) {
    if (cfg.n_reps < 2) throw ConfigError("robustness: n_reps must be >= 2");
    return run_robustness_experiment(simdb::build_database(cfg.db), cfg);
}

inline void write_robustness_csv(const RobustnessResult& r, const std::filesystem::path& rows_path,
                                 const std::filesystem::path& summary_path) {
    auto out = io::open_out(rows_path);
    out << "rep,method,rmse_lai,rmse_fvc,rmse_fapar\n";
    for (const auto& row : r.rows)
        out << row.rep << ',' << to_string(row.method) << ',' << io::format_double(row.rmse(0)) << ','
            << io::format_double(row.rmse(1)) << ',' << io::format_double(row.rmse(2)) << '\n';
    auto sum = io::open_out(summary_path);
    sum << "method,output,mean,std,q1,median,q3,outliers\n";
    for (const auto& s : r.summary)
        sum << to_string(s.method) << ',' << kOutputNames[static_cast<std::size_t>(s.output)] << ',' << io::format_double(s.mean) << ','
            << io::format_double(s.std) << ',' << io::format_double(s.q1) << ',' << io::format_double(s.median) << ','
            << io::format_double(s.q3) << ',' << s.outliers << '\n';
}

// ---------------------------------------------------------------------------
// Noise sensitivity over cover-type spheres.

struct CoverTypeSphere {
    std::string name;
    Bands center;
    double radius;
};

inline std::vector<CoverTypeSphere> default_spheres() {
    return {{"dense_dark", {0.03, 0.30, 0.17}, 0.02},
            {"dense_green", {0.05, 0.42, 0.22}, 0.04},
            {"intermediate", {0.13, 0.35, 0.28}, 0.04},
            {"soil", {0.33, 0.40, 0.55}, 0.03}};
}

inline std::vector<double> default_noise_ladder() {
    std::vector<double> l{0.0, 0.0025};
    for (int i = 1; i <= 13; ++i) l.push_back(0.005 * i);
    return l;
}

inline void validate_ladder(const std::vector<double>& l) {
    if (l.empty()) throw ConfigError("noise ladder is empty");
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (!(l[i] >= 0.0)) throw ConfigError("noise ladder levels must be >= 0");
        if (i > 0 && !(l[i] > l[i - 1])) throw ConfigError("noise ladder must be strictly increasing");
    }
}

/// Uniform points in the ball (rejection from the bounding cube).
inline std::vector<Bands> sample_ball(const CoverTypeSphere& s, int n, std::uint64_t seed) {
    if (!(s.radius > 0.0)) throw ConfigError("sphere '" + s.name + "': radius must be positive");
    Rng rng(seed);
    std::vector<Bands> pts;
    while (static_cast<int>(pts.size()) < n) {
        Bands u;
        double r2 = 0.0;
        for (auto& c : u) {
            c = 2.0 * uniform01(rng) - 1.0;
            r2 += c * c;
        }
        if (r2 > 1.0) continue;
        pts.push_back({s.center[0] + s.radius * u[0], s.center[1] + s.radius * u[1], s.center[2] + s.radius * u[2]});
    }
    return pts;
}

struct SensitivityConfig {
    std::vector<double> ladder = default_noise_ladder();
    std::vector<CoverTypeSphere> spheres = default_spheres();
    std::vector<double> err_levels{0.03, 0.05};
    int n_per_sphere = 200;
    int mc_samples = 100;
    simdb::BuildOptions db;  ///< noise sigma is overridden by each ladder level
    GprConfig gpr;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct SensitivityCell {
    std::size_t sphere;
    std::size_t level;
    double noise;
    double err;
    Vector mean_sigma_k0;  ///< per output, averaged over the sphere points
};

inline std::vector<SensitivityCell> run_noise_sensitivity(const SensitivityConfig& cfg) {
    validate_ladder(cfg.ladder);
    if (cfg.spheres.empty() || cfg.err_levels.empty()) throw ConfigError("sensitivity: need spheres and error levels");
    if (cfg.n_per_sphere < 1) throw ConfigError("sensitivity: n_per_sphere must be >= 1");
    std::vector<std::vector<Bands>> points;
    for (std::size_t s = 0; s < cfg.spheres.size(); ++s) points.push_back(sample_ball(cfg.spheres[s], cfg.n_per_sphere, derive_seed(cfg.seed, 500 + s)));

    const std::size_t per_level = cfg.spheres.size() * cfg.err_levels.size();
    std::vector<SensitivityCell> cells(cfg.ladder.size() * per_level);
    parallel_for(cfg.ladder.size(), cfg.workers, [&](std::size_t level) {
        auto opt = cfg.db;
        opt.noise.sigma = cfg.ladder[level];
        const auto db = simdb::build_database(opt);
        auto g = cfg.gpr;
        g.mode = OutputMode::multi;
        g.seed = derive_seed(cfg.seed, 1);
        const GprModel model = train_gpr(db.inputs(), db.targets(), g);
        auto mean_fn = [&](const Matrix& x) { return predict_gpr_mean(model, x); };
        for (std::size_t s = 0; s < cfg.spheres.size(); ++s)
            for (std::size_t e = 0; e < cfg.err_levels.size(); ++e) {
                Vector acc = Vector::Zero(kOutputs);
                for (std::size_t p = 0; p < points[s].size(); ++p)
                    acc += propagate_mc(mean_fn, points[s][p], InputError::uniform(cfg.err_levels[e]), cfg.mc_samples,
                                        derive_seed(derive_seed(cfg.seed, 900 + s), p));
                cells[level * per_level + s * cfg.err_levels.size() + e] =
                    {s, level, cfg.ladder[level], cfg.err_levels[e], acc / static_cast<double>(points[s].size())};
            }
    });
    return cells;
}

inline void write_sensitivity_csv(const std::vector<SensitivityCell>& cells, const std::vector<CoverTypeSphere>& spheres,
                                  const std::filesystem::path& path) {
    auto out = io::open_out(path);
    out << "sphere,level,noise,err,sigma_k0_lai,sigma_k0_fvc,sigma_k0_fapar\n";
    for (const auto& c : cells)
        out << spheres[c.sphere].name << ',' << c.level << ',' << io::format_double(c.noise) << ',' << io::format_double(c.err)
            << ',' << io::format_double(c.mean_sigma_k0(0)) << ',' << io::format_double(c.mean_sigma_k0(1)) << ','
            << io::format_double(c.mean_sigma_k0(2)) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic scenes.

/// A w x h scene of noise-free toy simulations with a uniform per-band
/// error; every pixel is valid.
inline raster::RasterScene synthetic_scene(int w, int h, double err, std::uint64_t seed) {
    if (w <= 0 || h <= 0) throw ConfigError("synthetic_scene: dimensions must be positive");
    if (!(err >= 0.0)) throw ConfigError("synthetic_scene: error must be >= 0");
    simdb::BuildOptions opt;
    opt.n = w * h;
    opt.seed = seed;
    const auto db = simdb::build_database(opt);
    auto scene = raster::RasterScene::blank(w, h);
    for (std::size_t i = 0; i < db.size(); ++i)
        for (int b = 0; b < kBands; ++b) {
            // stored planes hold 1e-4 reflectance steps
            const double v = std::round(db.records[i].k0[b] * raster::kReflectanceScale) / raster::kReflectanceScale;
            scene.k0[static_cast<std::size_t>(b)][i] = v;
            scene.err[static_cast<std::size_t>(b)][i] = err;
        }
    scene.metadata = {{"source", "toy"}, {"seed", seed}, {"err", err}};
    return scene;
}

// ---------------------------------------------------------------------------
// Isolines: conditional means on a red/NIR grid.

inline std::vector<double> bin_edges(double lo, double hi, double step) { return LutAxes::range(lo, hi, step); }

struct IsolineGrid {
    std::vector<double> red_edges, nir_edges;
    int n_outputs = 0;
    std::vector<std::size_t> count;  ///< red-major: cell (i, j) at i * n_nir + j
    std::vector<double> mean;        ///< n_outputs per cell; NaN below the minimum count

    std::size_t n_red() const { return red_edges.size() - 1; }
    std::size_t n_nir() const { return nir_edges.size() - 1; }
    double cell_mean(std::size_t i, std::size_t j, int o) const {
        return mean[(i * n_nir() + j) * static_cast<std::size_t>(n_outputs) + static_cast<std::size_t>(o)];
    }
};

namespace detail {
inline void check_edges(const std::vector<double>& e, const char* what) {
    if (e.size() < 2) throw ConfigError(std::string("isolines: ") + what + " needs at least two edges");
    for (std::size_t i = 1; i < e.size(); ++i)
        if (!(e[i] > e[i - 1])) throw ConfigError(std::string("isolines: ") + what + " edges must be strictly increasing");
}

/// Bin index with half-open bins [e_i, e_i+1); the last bin also takes its upper edge.
inline std::ptrdiff_t find_bin(const std::vector<double>& e, double v) {
    if (!(v >= e.front() && v <= e.back())) return -1;
    if (v == e.back()) return static_cast<std::ptrdiff_t>(e.size()) - 2;
    return std::upper_bound(e.begin(), e.end(), v) - e.begin() - 1;
}
}  // namespace detail

/// `k0` is n x 3 (red, nir, mir); `values` is n x D.
inline IsolineGrid compute_isolines(const Matrix& k0, const Matrix& values, const std::vector<double>& red_edges,
                                    const std::vector<double>& nir_edges, std::size_t min_count = 10) {
    detail::check_edges(red_edges, "red");
    detail::check_edges(nir_edges, "nir");
    if (k0.rows() != values.rows() || k0.cols() < 2) throw DataError("isolines: reflectance and value tables do not match");
    IsolineGrid g{red_edges, nir_edges, static_cast<int>(values.cols()), {}, {}};
    const std::size_t cells = g.n_red() * g.n_nir();
    g.count.assign(cells, 0);
    std::vector<double> sum(cells * static_cast<std::size_t>(g.n_outputs), 0.0);
    for (Eigen::Index r = 0; r < k0.rows(); ++r) {
        const auto i = detail::find_bin(red_edges, k0(r, 0));
        const auto j = detail::find_bin(nir_edges, k0(r, 1));
        if (i < 0 || j < 0) continue;
        const std::size_t c = static_cast<std::size_t>(i) * g.n_nir() + static_cast<std::size_t>(j);
        ++g.count[c];
        for (int o = 0; o < g.n_outputs; ++o) sum[c * static_cast<std::size_t>(g.n_outputs) + static_cast<std::size_t>(o)] += values(r, o);
    }
    g.mean.assign(sum.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < cells; ++c)
        if (g.count[c] >= std::max<std::size_t>(min_count, 1))
            for (int o = 0; o < g.n_outputs; ++o) {
                const std::size_t k = c * static_cast<std::size_t>(g.n_outputs) + static_cast<std::size_t>(o);
                g.mean[k] = sum[k] / static_cast<double>(g.count[c]);
            }
    return g;
}

inline void write_isolines_csv(const IsolineGrid& g, const std::filesystem::path& path) {
    auto out = io::open_out(path);
    out << "red_lo,red_hi,nir_lo,nir_hi,count";
    for (int o = 0; o < g.n_outputs; ++o) out << ",mean_" << (o < kOutputs ? std::string(kOutputNames[static_cast<std::size_t>(o)]) : std::to_string(o));
    out << '\n';
    for (std::size_t i = 0; i < g.n_red(); ++i)
        for (std::size_t j = 0; j < g.n_nir(); ++j) {
            out << io::format_double(g.red_edges[i]) << ',' << io::format_double(g.red_edges[i + 1]) << ','
                << io::format_double(g.nir_edges[j]) << ',' << io::format_double(g.nir_edges[j + 1]) << ','
                << g.count[i * g.n_nir() + j];
            for (int o = 0; o < g.n_outputs; ++o) {
                const double m = g.cell_mean(i, j, o);
                out << ',' << (std::isnan(m) ? std::string("nan") : io::format_double(m));
            }
            out << '\n';
        }
}

}  // namespace biopar::eval
