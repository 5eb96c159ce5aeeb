#pragma once

// Training-database construction: Latin hypercube sampling of truncated
// Gaussian parameter laws, forward simulation, Gaussian reflectance noise,
// train/test splitting and CSV import/export.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "biopar/core.hpp"
#include "biopar/io.hpp"
#include "biopar/numerics.hpp"
#include "biopar/rtm.hpp"

namespace biopar::simdb {

using rtm::CanopyParams;
using rtm::SimRecord;
using rtm::SoilSpectrum;

enum class Law { truncated_gaussian, fixed };

struct ParamLaw {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std = 0.0;
    Law law = Law::truncated_gaussian;
};

/// Marginal laws of the canopy parameters plus the special rules for
/// broadleaf records and pure-background records.
struct DistributionSpec {
    std::vector<ParamLaw> params;  ///< one entry per rtm::kParamBounds name, same order
    double broadleaf_lai_mean = 4.5;
    double bare_fraction = 0.05;
    double broadleaf_fraction = 0.15;

    const ParamLaw& law(std::string_view name) const {
        for (const auto& p : params)
            if (p.name == name) return p;
        throw ConfigError("DistributionSpec: no law for '" + std::string(name) + "'");
    }

    void validate() const {
        if (params.size() != rtm::kParamBounds.size())
            throw ConfigError("DistributionSpec: expected " + std::to_string(rtm::kParamBounds.size()) + " parameters");
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& p = params[i];
            if (p.name != rtm::kParamBounds[i].name)
                throw ConfigError("DistributionSpec: parameter " + std::to_string(i) + " must be '" +
                                  rtm::kParamBounds[i].name + "', got '" + p.name + "'");
            if (!(p.min <= p.mean && p.mean <= p.max))
                throw ConfigError("DistributionSpec: " + p.name + " needs min <= mean <= max");
            if (p.law == Law::truncated_gaussian && !(p.std > 0.0 && p.min < p.max))
                throw ConfigError("DistributionSpec: " + p.name + " needs std > 0 and min < max");
            if (p.min < rtm::kParamBounds[i].min || p.max > rtm::kParamBounds[i].max)
                throw ConfigError("DistributionSpec: " + p.name + " range exceeds the admissible bounds");
        }
        auto frac = [](double f) { return f >= 0.0 && f <= 1.0; };
        if (!frac(bare_fraction) || !frac(broadleaf_fraction) || bare_fraction + broadleaf_fraction > 1.0)
            throw ConfigError("DistributionSpec: fractions must lie in [0,1] and sum to at most 1");
        const auto& lai = params[0];
        if (lai.law == Law::truncated_gaussian && !(broadleaf_lai_mean >= lai.min && broadleaf_lai_mean <= lai.max))
            throw ConfigError("DistributionSpec: broadleaf_lai_mean outside the lai range");
    }
};

inline DistributionSpec default_distribution_spec() {
    using L = Law;
    return {{
        {"lai", 0.0, 8.0, 3.5, 4.0, L::truncated_gaussian},
        {"ala", 35.0, 80.0, 62.0, 12.0, L::truncated_gaussian},
        {"hotspot", 0.1, 0.5, 0.2, 0.2, L::truncated_gaussian},
        {"v_cover", 0.3, 1.0, 0.99, 0.2, L::truncated_gaussian},
        {"n_mesophyll", 1.2, 2.2, 1.5, 0.3, L::truncated_gaussian},
        {"c_ab", 20.0, 90.0, 45.0, 30.0, L::truncated_gaussian},
        {"c_ar", 0.6, 16.0, 5.0, 7.0, L::truncated_gaussian},
        {"c_dm", 0.005, 0.03, 0.015, 0.008, L::truncated_gaussian},
        {"c_rel", 0.6, 0.85, 0.75, 0.1, L::truncated_gaussian},
        {"c_bp", 0.0, 0.0, 0.0, 0.0, L::fixed},
        {"beta_s", 0.1, 1.0, 0.8, 0.6, L::truncated_gaussian},
    }};
}

inline nlohmann::json to_json(const DistributionSpec& spec) {
    nlohmann::json j;
    for (const auto& p : spec.params)
        j["parameters"].push_back({{"name", p.name},
                                   {"min", p.min},
                                   {"max", p.max},
                                   {"mean", p.mean},
                                   {"std", p.std},
                                   {"law", p.law == Law::fixed ? "fixed" : "truncated-gaussian"}});
    j["broadleaf_lai_mean"] = spec.broadleaf_lai_mean;
    j["bare_fraction"] = spec.bare_fraction;
    j["broadleaf_fraction"] = spec.broadleaf_fraction;
    return j;
}

/// Parses the JSON form. Parameters may appear in any order; missing
/// special-rule keys keep their defaults.
inline DistributionSpec distribution_spec_from_json(const nlohmann::json& j) {
    DistributionSpec spec = default_distribution_spec();
    try {
        if (j.contains("parameters")) {
            std::map<std::string, ParamLaw> by_name;
            for (const auto& e : j.at("parameters")) {
                ParamLaw p;
                p.name = e.at("name").get<std::string>();
                p.min = e.at("min").get<double>();
                p.max = e.at("max").get<double>();
                p.mean = e.at("mean").get<double>();
                p.std = e.value("std", 0.0);
                const auto law = e.value("law", std::string("truncated-gaussian"));
                if (law == "fixed") p.law = Law::fixed;
                else if (law == "truncated-gaussian") p.law = Law::truncated_gaussian;
                else throw ConfigError("DistributionSpec: unknown law '" + law + "'");
                by_name[p.name] = p;
            }
            for (auto& p : spec.params) {
                auto it = by_name.find(p.name);
                if (it == by_name.end()) throw ConfigError("DistributionSpec: missing parameter '" + p.name + "'");
                p = it->second;
                by_name.erase(it);
            }
            if (!by_name.empty()) throw ConfigError("DistributionSpec: unknown parameter '" + by_name.begin()->first + "'");
        }
        spec.broadleaf_lai_mean = j.value("broadleaf_lai_mean", spec.broadleaf_lai_mean);
        spec.bare_fraction = j.value("bare_fraction", spec.bare_fraction);
        spec.broadleaf_fraction = j.value("broadleaf_fraction", spec.broadleaf_fraction);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("DistributionSpec: ") + e.what());
    }
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Sampling.

/// n x dims Latin hypercube on [0,1): in every column each stratum
/// [k/n, (k+1)/n) holds exactly one point.
inline Matrix latin_hypercube(int n, int dims, Rng& rng) {
    Matrix u(n, dims);
    std::vector<int> perm(n);
    for (int d = 0; d < dims; ++d) {
        std::iota(perm.begin(), perm.end(), 0);
        shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < n; ++i) u(i, d) = (perm[i] + uniform01(rng)) / n;
    }
    return u;
}

/// LHS column holding the soil index; columns before it follow kParamBounds.
inline constexpr int kSoilDim = static_cast<int>(rtm::kParamBounds.size());
inline constexpr int kDesignDims = kSoilDim + 1;

struct ParameterSample {
    std::vector<CanopyParams> params;
    Matrix design;  ///< the LHS uniforms each record was mapped from
};

/// Truncated law actually used for column `dim` of a record.
inline TruncatedNormal marginal_for(const DistributionSpec& spec, std::size_t dim, bool broadleaf) {
    const auto& p = spec.params[dim];
    const double mean = (dim == 0 && broadleaf) ? spec.broadleaf_lai_mean : p.mean;
    return TruncatedNormal(mean, p.std, p.min, p.max);
}

inline ParameterSample sample_parameters_with_design(const DistributionSpec& spec, int n, std::uint64_t seed,
                                                     int n_soils = 20) {
    spec.validate();
    if (n < 1) throw ConfigError("sample_parameters: n must be >= 1");
    if (n_soils < 1) throw ConfigError("sample_parameters: empty soil library");
    Rng rng(seed);
    ParameterSample out;
    out.design = latin_hypercube(n, kDesignDims, rng);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order.begin(), order.end(), rng);
    const int n_bare = static_cast<int>(std::floor(spec.bare_fraction * n + 1e-9));
    const int n_broad = static_cast<int>(std::floor(spec.broadleaf_fraction * n + 1e-9));
    std::vector<char> bare(n, 0), broad(n, 0);
    for (int k = 0; k < n_bare; ++k) bare[order[k]] = 1;
    for (int k = n_bare; k < n_bare + n_broad; ++k) broad[order[k]] = 1;

    std::vector<TruncatedNormal> base, broadleaf;
    for (std::size_t d = 0; d < spec.params.size(); ++d) {
        if (spec.params[d].law == Law::fixed) {
            base.emplace_back(0.0, 1.0, -1.0, 1.0);  // placeholder, unused
            broadleaf.emplace_back(0.0, 1.0, -1.0, 1.0);
        } else {
            base.push_back(marginal_for(spec, d, false));
            broadleaf.push_back(marginal_for(spec, d, true));
        }
    }

    out.params.resize(n);
    for (int i = 0; i < n; ++i) {
        CanopyParams& p = out.params[i];
        p.broadleaf = broad[i] != 0;
        for (std::size_t d = 0; d < spec.params.size(); ++d) {
            const auto& law = spec.params[d];
            double& field = rtm::param_ref(p, d);
            if (law.law == Law::fixed) field = law.mean;
            else field = (p.broadleaf ? broadleaf[d] : base[d]).quantile(out.design(i, static_cast<Eigen::Index>(d)));
        }
        if (bare[i]) p.v_cover = 0.0;
        p.soil_id = std::min(static_cast<int>(out.design(i, kSoilDim) * n_soils), n_soils - 1);
    }
    return out;
}

inline std::vector<CanopyParams> sample_parameters(const DistributionSpec& spec, int n, std::uint64_t seed,
                                                   int n_soils = 20) {
    return sample_parameters_with_design(spec, n, seed, n_soils).params;
}

// ---------------------------------------------------------------------------
// Database.

struct NoiseConfig {
    double sigma = 0.0;  ///< reflectance std, shared by all bands
    std::uint64_t seed = 0;
};

struct DatabaseMeta {
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
    std::string model_id = "toy";
    nlohmann::json creation;  ///< free-form creation parameters

    bool operator==(const DatabaseMeta&) const = default;
};

struct SimulationDatabase {
    std::vector<SimRecord> records;
    DatabaseMeta meta;

    std::size_t size() const { return records.size(); }

    Matrix inputs() const {
        Matrix x(static_cast<Eigen::Index>(records.size()), kBands);
        for (std::size_t i = 0; i < records.size(); ++i)
            for (int b = 0; b < kBands; ++b) x(static_cast<Eigen::Index>(i), b) = records[i].k0[b];
        return x;
    }

    Matrix targets() const {
        Matrix y(static_cast<Eigen::Index>(records.size()), kOutputs);
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            y(r, 0) = records[i].lai;
            y(r, 1) = records[i].fvc;
            y(r, 2) = records[i].fapar;
        }
        return y;
    }

    SimulationDatabase subset(const std::vector<std::size_t>& idx) const {
        SimulationDatabase out;
        out.meta = meta;
        out.records.reserve(idx.size());
        for (auto i : idx) out.records.push_back(records.at(i));
        return out;
    }
};

using ForwardModel = std::function<SimRecord(const CanopyParams&, const SoilSpectrum&)>;

/// Named forward models that build_database can drive.
class ModelRegistry {
public:
    ModelRegistry() {
        add("toy", [](const CanopyParams& p, const SoilSpectrum& s) { return rtm::simulate_toy(p, {}, s); });
    }

    void add(const std::string& id, ForwardModel model) { models_[id] = std::move(model); }

    const ForwardModel& get(const std::string& id) const {
        auto it = models_.find(id);
        if (it == models_.end()) throw ConfigError("unregistered forward model '" + id + "'");
        return it->second;
    }

    bool contains(const std::string& id) const { return models_.count(id) != 0; }

private:
    std::map<std::string, ForwardModel> models_;
};

/// Adds independent N(0, sigma^2) noise to every band of every record.
/// Reflectances are not clamped; targets are untouched.
inline SimulationDatabase add_noise(const SimulationDatabase& db, const NoiseConfig& noise) {
    if (!(noise.sigma >= 0.0)) throw ConfigError("add_noise: sigma must be >= 0");
    SimulationDatabase out = db;
    out.meta.noise_sigma = std::hypot(db.meta.noise_sigma, noise.sigma);
    out.meta.noise_seed = noise.seed;
    if (noise.sigma == 0.0) return out;
    Rng rng(noise.seed);
    for (auto& r : out.records)
        for (double& v : r.k0) v += noise.sigma * standard_normal(rng);
    return out;
}

struct BuildOptions {
    int n = 2950;
    DistributionSpec spec = default_distribution_spec();
    NoiseConfig noise{};
    std::uint64_t seed = 0;
    std::string model_id = "toy";
    std::vector<SoilSpectrum> soils = rtm::default_soil_library();
};

inline SimulationDatabase build_database(const BuildOptions& opt, const ModelRegistry& registry = ModelRegistry{}) {
    const auto& model = registry.get(opt.model_id);
    if (opt.soils.empty()) throw ConfigError("build_database: empty soil library");
    const auto params = sample_parameters(opt.spec, opt.n, opt.seed, static_cast<int>(opt.soils.size()));
    SimulationDatabase db;
    db.meta.seed = opt.seed;
    db.meta.model_id = opt.model_id;
    db.meta.creation = {{"n", opt.n}, {"spec", to_json(opt.spec)}, {"n_soils", opt.soils.size()}};
    db.records.reserve(params.size());
    for (const auto& p : params) db.records.push_back(model(p, opt.soils[static_cast<std::size_t>(p.soil_id)]));
    return add_noise(db, opt.noise);
}

/// Uniformly random disjoint split; both parts keep the original record order.
inline std::pair<SimulationDatabase, SimulationDatabase> split_database(const SimulationDatabase& db,
                                                                        double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split_database: fraction must lie in (0,1)");
    const std::size_t n = db.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {db.subset(train), db.subset(test)};
}

// ---------------------------------------------------------------------------
// CSV import/export.

inline constexpr std::array<const char*, 6> kCoreColumns{"red", "nir", "mir", "lai", "fvc", "fapar"};

inline nlohmann::json meta_to_json(const DatabaseMeta& m) {
    return {{"seed", m.seed},
            {"noise_sigma", m.noise_sigma},
            {"noise_seed", m.noise_seed},
            {"model_id", m.model_id},
            {"creation", m.creation}};
}

inline DatabaseMeta meta_from_json(const nlohmann::json& j) {
    DatabaseMeta m;
    m.seed = j.value("seed", std::uint64_t{0});
    m.noise_sigma = j.value("noise_sigma", 0.0);
    m.noise_seed = j.value("noise_seed", std::uint64_t{0});
    m.model_id = j.value("model_id", std::string("imported"));
    if (j.contains("creation")) m.creation = j.at("creation");
    return m;
}

/// Writes `red,nir,mir,lai,fvc,fapar` plus parameter columns prefixed `p_`.
/// The metadata travels in a leading `#` comment line.
inline void export_simulations(const SimulationDatabase& db, const std::filesystem::path& path) {
    auto out = io::open_out(path);
    out << "# biopar-simdb " << meta_to_json(db.meta).dump() << '\n';
    for (auto c : kCoreColumns) out << c << ',';
    for (const auto& b : rtm::kParamBounds) out << "p_" << b.name << ',';
    out << "p_soil_id,p_broadleaf\n";
    for (const auto& r : db.records) {
        for (double v : r.k0) out << io::format_double(v) << ',';
        out << io::format_double(r.lai) << ',' << io::format_double(r.fvc) << ',' << io::format_double(r.fapar);
        for (std::size_t i = 0; i < rtm::kParamBounds.size(); ++i)
            out << ',' << io::format_double(rtm::param_value(r.params, i));
        out << ',' << r.params.soil_id << ',' << (r.params.broadleaf ? 1 : 0) << '\n';
    }
    if (!out) throw DataError("failed writing " + path.string());
}

namespace detail {
inline double finite_cell(const io::CsvTable& t, std::size_t row, int col, const std::string& ctx) {
    double v;
    try {
        v = io::parse_double(t.rows[row][static_cast<std::size_t>(col)]);
    } catch (const DataError&) {
        throw DataError(ctx + ": row " + std::to_string(row + 1) + ": column '" + t.header[static_cast<std::size_t>(col)] +
                        "' is not a number");
    }
    if (!std::isfinite(v))
        throw DataError(ctx + ": row " + std::to_string(row + 1) + ": non-finite value in column '" +
                        t.header[static_cast<std::size_t>(col)] + "'");
    return v;
}

inline void check_targets(const SimRecord& r, std::size_t row, const std::string& ctx) {
    auto bad = [&](const char* what, double v, double lo, double hi) {
        if (!(v >= lo && v <= hi))
            throw DataError(ctx + ": row " + std::to_string(row + 1) + ": " + what + " = " + io::format_double(v) +
                            " outside [" + io::format_double(lo) + ", " + io::format_double(hi) + "]");
    };
    bad("lai", r.lai, 0.0, 8.0);
    bad("fvc", r.fvc, 0.0, 1.0);
    bad("fapar", r.fapar, 0.0, 1.0);
}

/// Reads the optional `p_*` parameter columns of one row into `p`.
inline void read_param_columns(const io::CsvTable& t, std::size_t row, CanopyParams& p, const std::string& ctx) {
    for (std::size_t i = 0; i < rtm::kParamBounds.size(); ++i) {
        const int c = t.column(std::string("p_") + rtm::kParamBounds[i].name);
        if (c >= 0) rtm::param_ref(p, i) = finite_cell(t, row, c, ctx);
    }
    if (int c = t.column("p_soil_id"); c >= 0) p.soil_id = static_cast<int>(finite_cell(t, row, c, ctx));
    if (int c = t.column("p_broadleaf"); c >= 0) p.broadleaf = finite_cell(t, row, c, ctx) != 0.0;
}

inline DatabaseMeta meta_from_preamble(const std::string& preamble) {
    const std::string tag = "biopar-simdb ";
    if (preamble.rfind(tag, 0) == 0) {
        try {
            return meta_from_json(nlohmann::json::parse(preamble.substr(tag.size())));
        } catch (const nlohmann::json::exception&) {
            throw DataError("simulation CSV: malformed metadata line");
        }
    }
    DatabaseMeta m;
    m.model_id = "imported";
    return m;
}
}  // namespace detail

/// Reads a simulation CSV. Files without a metadata line, i.e. produced by
/// an external simulator, are tagged with model id "imported".
inline SimulationDatabase import_simulations(const std::filesystem::path& path) {
    const auto t = io::read_csv(path);
    const std::string ctx = path.filename().string();
    std::array<int, 6> cols{};
    for (std::size_t k = 0; k < kCoreColumns.size(); ++k) cols[k] = t.require(kCoreColumns[k], ctx);
    SimulationDatabase db;
    db.meta = detail::meta_from_preamble(t.preamble);
    db.records.reserve(t.rows.size());
    for (std::size_t row = 0; row < t.rows.size(); ++row) {
        SimRecord r;
        for (int b = 0; b < kBands; ++b) r.k0[b] = detail::finite_cell(t, row, cols[b], ctx);
        r.lai = detail::finite_cell(t, row, cols[3], ctx);
        r.fvc = detail::finite_cell(t, row, cols[4], ctx);
        r.fapar = detail::finite_cell(t, row, cols[5], ctx);
        detail::check_targets(r, row, ctx);
        detail::read_param_columns(t, row, r.params, ctx);
        db.records.push_back(r);
    }
    return db;
}

inline rtm::Spectrum read_spectrum_csv(const std::filesystem::path& path, const char* value_column) {
    const auto t = io::read_csv(path);
    const std::string ctx = path.filename().string();
    const int wl = t.require("wavelength_nm", ctx);
    const int val = t.require(value_column, ctx);
    rtm::Spectrum s;
    s.reserve(t.rows.size());
    for (std::size_t row = 0; row < t.rows.size(); ++row)
        s.push_back({detail::finite_cell(t, row, wl, ctx), detail::finite_cell(t, row, val, ctx)});
    return s;
}

/// Imports high-resolution simulations. `manifest` lists one record per row
/// with columns `spectrum,lai,fvc,fapar[,p_*]`; `spectrum` is a path
/// (relative to the manifest) to a `wavelength_nm,reflectance` CSV. Band
/// values are the SRF-weighted means of each spectrum.
inline SimulationDatabase import_spectral_simulations(const std::filesystem::path& manifest,
                                                      const std::array<rtm::Spectrum, kBands>& srfs) {
    const auto t = io::read_csv(manifest);
    const std::string ctx = manifest.filename().string();
    const int spec_col = t.require("spectrum", ctx);
    const int lai = t.require("lai", ctx), fvc = t.require("fvc", ctx), fapar = t.require("fapar", ctx);
    SimulationDatabase db;
    db.meta.model_id = "imported";
    for (std::size_t row = 0; row < t.rows.size(); ++row) {
        const auto path = manifest.parent_path() / t.rows[row][static_cast<std::size_t>(spec_col)];
        const auto spectrum = read_spectrum_csv(path, "reflectance");
        SimRecord r;
        for (int b = 0; b < kBands; ++b) {
            try {
                r.k0[b] = rtm::convolve_srf(spectrum, srfs[b]);
            } catch (const DataError& e) {
                throw DataError(ctx + ": row " + std::to_string(row + 1) + ": " + e.what());
            }
        }
        r.lai = detail::finite_cell(t, row, lai, ctx);
        r.fvc = detail::finite_cell(t, row, fvc, ctx);
        r.fapar = detail::finite_cell(t, row, fapar, ctx);
        detail::check_targets(r, row, ctx);
        detail::read_param_columns(t, row, r.params, ctx);
        db.records.push_back(r);
    }
    return db;
}

/// Soil library CSV with header `id,red,nir,mir`.
inline std::vector<SoilSpectrum> read_soil_library(const std::filesystem::path& path) {
    const auto t = io::read_csv(path);
    const std::string ctx = path.filename().string();
    const int id = t.require("id", ctx);
    std::array<int, kBands> cols{t.require("red", ctx), t.require("nir", ctx), t.require("mir", ctx)};
    std::vector<SoilSpectrum> lib;
    for (std::size_t row = 0; row < t.rows.size(); ++row) {
        SoilSpectrum s;
        s.id = static_cast<int>(detail::finite_cell(t, row, id, ctx));
        for (int b = 0; b < kBands; ++b) {
            s.reflectance[b] = detail::finite_cell(t, row, cols[b], ctx);
            if (s.reflectance[b] < 0.0 || s.reflectance[b] > 1.0)
                throw DataError(ctx + ": row " + std::to_string(row + 1) + ": soil reflectance outside [0,1]");
        }
        lib.push_back(s);
    }
    if (lib.empty()) throw DataError(ctx + ": empty soil library");
    return lib;
}

inline void write_soil_library(const std::vector<SoilSpectrum>& lib, const std::filesystem::path& path) {
    auto out = io::open_out(path);
    out << "id,red,nir,mir\n";
    for (const auto& s : lib)
        out << s.id << ',' << io::format_double(s.reflectance[0]) << ',' << io::format_double(s.reflectance[1]) << ','
            << io::format_double(s.reflectance[2]) << '\n';
}

}  // namespace biopar::simdb
