#pragma once

// Pixel-wise retrieval of LAI/FVC/FAPAR with total uncertainty, quality
// classes, flags and the int16 product encoding.

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biopar/core.hpp"
#include "biopar/gpr.hpp"
#include "biopar/raster.hpp"
#include "biopar/uncert.hpp"

namespace biopar::retrieval {

enum class QualityClass : std::uint8_t { optimal = 0, medium = 1, poor = 2, missing = 3 };

inline const char* to_string(QualityClass q) {
    switch (q) {
        case QualityClass::optimal: return "optimal";
        case QualityClass::medium: return "medium";
        case QualityClass::poor: return "poor";
        default: return "missing";
    }
}

struct Limits {
    double optimal_below;    ///< err < this is optimal
    double poor_above;       ///< err > this is poor, medium in between (closed)
    double usable_up_to;     ///< err above this restricts use
    double high_sigma_gpr;   ///< sigma_GPR above this is flagged
    double lo, hi;           ///< physical range of the central estimate
    double scale_factor;     ///< product quantisation
};

inline const Limits& limits(Output o) {
    static const std::array<Limits, kOutputs> table{{
        {1.0, 1.5, 1.5, 1.0, 0.0, 8.0, 1000.0},
        {0.10, 0.15, 0.20, 0.10, 0.0, 1.0, 10000.0},
        {0.10, 0.15, 0.20, 0.10, 0.0, 1.0, 10000.0},
    }};
    return table[static_cast<std::size_t>(o)];
}

/// Quality class of an error value; NaN means missing.
inline QualityClass classify_quality(double err, Output o) {
    if (std::isnan(err)) return QualityClass::missing;
    if (err < 0.0) throw DomainError("classify_quality: negative error");
    const auto& l = limits(o);
    if (err < l.optimal_below) return QualityClass::optimal;
    if (err <= l.poor_above) return QualityClass::medium;
    return QualityClass::poor;
}

/// Error value as published (rounded to the product quantisation step).
inline double quantize(double v, Output o) {
    const double s = limits(o).scale_factor;
    return std::round(v * s) / s;
}

namespace flags {
inline constexpr std::uint16_t clamped_lai = 1u << 0;
inline constexpr std::uint16_t clamped_fvc = 1u << 1;
inline constexpr std::uint16_t clamped_fapar = 1u << 2;
inline constexpr std::uint16_t lut_extrapolated = 1u << 3;
inline constexpr std::uint16_t high_sigma_lai = 1u << 4;
inline constexpr std::uint16_t high_sigma_fvc = 1u << 5;
inline constexpr std::uint16_t high_sigma_fapar = 1u << 6;
inline constexpr std::uint16_t restricted_lai = 1u << 7;
inline constexpr std::uint16_t restricted_fvc = 1u << 8;
inline constexpr std::uint16_t restricted_fapar = 1u << 9;

inline std::uint16_t clamped(int o) { return static_cast<std::uint16_t>(clamped_lai << o); }
inline std::uint16_t high_sigma(int o) { return static_cast<std::uint16_t>(high_sigma_lai << o); }
inline std::uint16_t restricted(int o) { return static_cast<std::uint16_t>(restricted_lai << o); }

inline nlohmann::json legend() {
    return {{"1", "lai clamped"},          {"2", "fvc clamped"},         {"4", "fapar clamped"},
            {"8", "LUT query extrapolated"}, {"16", "high sigma_gpr lai"}, {"32", "high sigma_gpr fvc"},
            {"64", "high sigma_gpr fapar"}, {"128", "lai use restricted"}, {"256", "fvc use restricted"},
            {"512", "fapar use restricted"}};
}
}  // namespace flags

struct ProductSet {
    int width = 0;
    int height = 0;
    std::array<std::vector<double>, kOutputs> value;      ///< clamped central estimates
    std::array<std::vector<double>, kOutputs> err;        ///< total error
    std::array<std::vector<double>, kOutputs> sigma_gpr;
    std::array<std::vector<double>, kOutputs> sigma_k0;
    std::array<std::vector<std::uint8_t>, kOutputs> quality;
    std::vector<std::uint16_t> flag;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

    static ProductSet blank(int w, int h) {
        ProductSet p;
        p.width = w;
        p.height = h;
        const auto n = p.pixels();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (int o = 0; o < kOutputs; ++o) {
            const auto k = static_cast<std::size_t>(o);
            p.value[k].assign(n, nan);
            p.err[k].assign(n, nan);
            p.sigma_gpr[k].assign(n, nan);
            p.sigma_k0[k].assign(n, nan);
            p.quality[k].assign(n, static_cast<std::uint8_t>(QualityClass::missing));
        }
        p.flag.assign(n, 0);
        return p;
    }
};

struct RetrievalOptions {
    int mc_samples = 100;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string model_id;
    std::string period_end;  ///< YYYYMMDD, optional
};

/// Direct Monte Carlo seed of a pixel; depends only on its inputs, so
/// results do not depend on the pixel position or on the worker layout.
inline std::uint64_t pixel_seed(std::uint64_t seed, const Bands& k0, const InputError& err) {
    std::uint64_t h = mix64(seed);
    for (double v : k0) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
    for (double v : err.err_k0) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
    return h;
}

/// Error level used to query the LUT: the mean of the per-band errors.
inline double lut_error_level(const InputError& e) { return (e.err_k0[0] + e.err_k0[1] + e.err_k0[2]) / 3.0; }

inline bool pixel_valid(const raster::RasterScene& scene, std::size_t i) {
    if (scene.mask[i] != static_cast<std::uint8_t>(raster::MaskFlag::valid)) return false;
    for (int b = 0; b < kBands; ++b) {
        const auto k = static_cast<std::size_t>(b);
        if (!std::isfinite(scene.k0[k][i]) || !std::isfinite(scene.err[k][i])) return false;
    }
    return true;
}

/// Retrieves every valid pixel. Sigma_k0 comes from the LUT when given and
/// from direct Monte Carlo otherwise. Rows are independent work items.
inline ProductSet retrieve_scene(const GprModel& model, const raster::RasterScene& scene, const UncertaintyLUT* lut,
                                 const RetrievalOptions& opt = {}) {
    scene.validate();
    if (model.n_bands() != kBands) throw DataError("retrieve_scene: model expects " + std::to_string(model.n_bands()) + " bands, scene has 3");
    if (model.n_outputs() != kOutputs) throw DataError("retrieve_scene: model must predict LAI, FVC and FAPAR");
    if (lut && lut->n_outputs != kOutputs) throw DataError("retrieve_scene: LUT output count does not match the model");
    if (opt.mc_samples < 2) throw ConfigError("retrieve_scene: mc_samples must be >= 2");
    for (std::size_t i = 0; i < scene.pixels(); ++i)
        if (pixel_valid(scene, i))
            for (int b = 0; b < kBands; ++b)
                if (scene.err[static_cast<std::size_t>(b)][i] < 0.0)
                    throw DataError("retrieve_scene: negative err_" + std::string(kBandNames[static_cast<std::size_t>(b)]) +
                                    " at pixel (row " + std::to_string(i / static_cast<std::size_t>(scene.width)) + ", col " +
                                    std::to_string(i % static_cast<std::size_t>(scene.width)) + ")");

    ProductSet p = ProductSet::blank(scene.width, scene.height);
    auto mean_fn = [&](const Matrix& x) { return predict_gpr_mean(model, x); };

    parallel_for(static_cast<std::size_t>(scene.height), opt.workers, [&](std::size_t row) {
        std::vector<std::size_t> idx;
        for (std::size_t c = 0; c < static_cast<std::size_t>(scene.width); ++c) {
            const std::size_t i = row * static_cast<std::size_t>(scene.width) + c;
            if (pixel_valid(scene, i)) idx.push_back(i);
        }
        if (idx.empty()) return;
        Matrix x(static_cast<Eigen::Index>(idx.size()), kBands);
        for (std::size_t j = 0; j < idx.size(); ++j)
            for (int b = 0; b < kBands; ++b) x(static_cast<Eigen::Index>(j), b) = scene.k0[static_cast<std::size_t>(b)][idx[j]];
        const GprPrediction pred = predict_gpr(model, x);

        for (std::size_t j = 0; j < idx.size(); ++j) {
            const std::size_t i = idx[j];
            const auto r = static_cast<Eigen::Index>(j);
            const Bands k0{x(r, 0), x(r, 1), x(r, 2)};
            const InputError e{{scene.err[0][i], scene.err[1][i], scene.err[2][i]}};
            std::uint16_t f = 0;
            Vector sk0;
            if (lut) {
                const auto q = query_lut(*lut, k0, lut_error_level(e));
                sk0 = q.sigma;
                if (q.extrapolated) f |= flags::lut_extrapolated;
            } else {
                sk0 = propagate_mc(mean_fn, k0, e, opt.mc_samples, pixel_seed(opt.seed, k0, e));
            }
            for (int o = 0; o < kOutputs; ++o) {
                const auto k = static_cast<std::size_t>(o);
                const auto& lim = limits(static_cast<Output>(o));
                const double mu = pred.mean(r, o);
                const double v = std::clamp(mu, lim.lo, lim.hi);
                if (v != mu) f |= flags::clamped(o);
                const double sg = pred.sigma(r, o);
                const double total = total_error(sg, sk0(o));
                p.value[k][i] = v;
                p.sigma_gpr[k][i] = sg;
                p.sigma_k0[k][i] = sk0(o);
                p.err[k][i] = total;
                const double published = quantize(total, static_cast<Output>(o));
                p.quality[k][i] = static_cast<std::uint8_t>(classify_quality(published, static_cast<Output>(o)));
                if (sg > lim.high_sigma_gpr) f |= flags::high_sigma(o);
                if (published > lim.usable_up_to) f |= flags::restricted(o);
            }
            p.flag[i] = f;
        }
    });

    p.metadata = {{"model_id", opt.model_id},
                  {"uncertainty", lut ? "lut" : "direct-mc"},
                  {"mc_samples", opt.mc_samples},
                  {"seed", opt.seed},
                  {"flags", flags::legend()},
                  {"quality", {{"0", "optimal"}, {"1", "medium"}, {"2", "poor"}, {"3", "missing"}}}};
    if (!opt.period_end.empty()) p.metadata["period_end"] = opt.period_end;
    return p;
}

// ---------------------------------------------------------------------------
// Product files.

/// Product name carrying the compositing-period end date, e.g.
/// "biopar_GLOBE_202601200000".
inline std::string product_filename(const std::string& prefix, const std::string& period_end_yyyymmdd) {
    if (period_end_yyyymmdd.size() != 8 ||
        !std::all_of(period_end_yyyymmdd.begin(), period_end_yyyymmdd.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw ConfigError("product_filename: period end must be YYYYMMDD");
    return prefix + "_GLOBE_" + period_end_yyyymmdd + "0000";
}

inline void encode_product(const ProductSet& p, const std::filesystem::path& path) {
    raster::PlaneSet set{p.width, p.height, {}, p.metadata};
    for (int o = 0; o < kOutputs; ++o) {
        const auto k = static_cast<std::size_t>(o);
        const std::string name(kOutputNames[k]);
        const double s = limits(static_cast<Output>(o)).scale_factor;
        set.planes.push_back({{name, s, 0.0}, p.value[k]});
        set.planes.push_back({{"err_" + name, s, 0.0}, p.err[k]});
        set.planes.push_back({{"sgpr_" + name, s, 0.0}, p.sigma_gpr[k]});
        set.planes.push_back({{"sk0_" + name, s, 0.0}, p.sigma_k0[k]});
        set.planes.push_back({{"q_" + name, 1.0, 0.0}, std::vector<double>(p.quality[k].begin(), p.quality[k].end())});
    }
    set.planes.push_back({{"flags", 1.0, 0.0}, std::vector<double>(p.flag.begin(), p.flag.end())});
    raster::write_planes(set, path);
}

inline ProductSet decode_product(const std::filesystem::path& path) {
    const auto set = raster::read_planes(path);
    ProductSet p = ProductSet::blank(set.width, set.height);
    p.metadata = set.metadata;
    for (int o = 0; o < kOutputs; ++o) {
        const auto k = static_cast<std::size_t>(o);
        const std::string name(kOutputNames[k]);
        p.value[k] = set.plane(name).values;
        p.err[k] = set.plane("err_" + name).values;
        p.sigma_gpr[k] = set.plane("sgpr_" + name).values;
        p.sigma_k0[k] = set.plane("sk0_" + name).values;
        const auto& q = set.plane("q_" + name).values;
        for (std::size_t i = 0; i < q.size(); ++i) {
            if (!(q[i] >= 0.0 && q[i] <= 3.0)) throw DataError(path.string() + ": bad quality value at pixel " + std::to_string(i));
            p.quality[k][i] = static_cast<std::uint8_t>(q[i]);
        }
    }
    const auto& f = set.plane("flags").values;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!(f[i] >= 0.0 && f[i] <= 1023.0)) throw DataError(path.string() + ": bad flag value at pixel " + std::to_string(i));
        p.flag[i] = static_cast<std::uint16_t>(f[i]);
    }
    return p;
}

}  // namespace biopar::retrieval
