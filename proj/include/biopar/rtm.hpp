#pragma once

// Forward canopy reflectance: a turbid-medium toy model standing in for a
// full leaf/canopy radiative transfer code, gap-fraction FVC, daily-integrated
// FAPAR, band convolution of high-resolution spectra and linear
// vegetation/soil pixel mixing.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "biopar/core.hpp"
#include "biopar/numerics.hpp"

namespace biopar::rtm {

/// One draw of the canopy/leaf/soil parameter vector. Defaults are the
/// central values of the sampling distributions.
struct CanopyParams {
    double lai = 3.5;          ///< leaf area index of the vegetated fraction, m2/m2
    double ala = 62.0;         ///< average leaf angle, degrees
    double hotspot = 0.2;
    double v_cover = 0.99;     ///< vegetated fraction of the pixel
    double n_mesophyll = 1.5;
    double c_ab = 45.0;        ///< chlorophyll, ug/cm2
    double c_ar = 5.0;         ///< carotenoids, ug/cm2
    double c_dm = 0.015;       ///< dry matter, g/cm2
    double c_rel = 0.75;       ///< relative water content
    double c_bp = 0.0;         ///< brown pigments, always zero
    double beta_s = 0.8;       ///< soil brightness
    int soil_id = 0;
    bool broadleaf = false;

    bool operator==(const CanopyParams&) const = default;
};

struct ParamBounds {
    const char* name;
    double min;
    double max;
};

/// Admissible range of every continuous parameter. v_cover admits 0 for
/// pure-background records.
inline constexpr std::array<ParamBounds, 11> kParamBounds{{
    {"lai", 0.0, 8.0},
    {"ala", 35.0, 80.0},
    {"hotspot", 0.1, 0.5},
    {"v_cover", 0.0, 1.0},
    {"n_mesophyll", 1.2, 2.2},
    {"c_ab", 20.0, 90.0},
    {"c_ar", 0.6, 16.0},
    {"c_dm", 0.005, 0.03},
    {"c_rel", 0.6, 0.85},
    {"c_bp", 0.0, 0.0},
    {"beta_s", 0.1, 1.0},
}};

/// Field access by the names of kParamBounds.
inline double& param_ref(CanopyParams& p, std::size_t i) {
    double* fields[] = {&p.lai,   &p.ala,  &p.hotspot, &p.v_cover, &p.n_mesophyll, &p.c_ab,
                        &p.c_ar,  &p.c_dm, &p.c_rel,   &p.c_bp,    &p.beta_s};
    return *fields[i];
}

inline double param_value(const CanopyParams& p, std::size_t i) {
    return param_ref(const_cast<CanopyParams&>(p), i);
}

inline void validate(const CanopyParams& p) {
    for (std::size_t i = 0; i < kParamBounds.size(); ++i) {
        const double v = param_value(p, i);
        if (!(v >= kParamBounds[i].min && v <= kParamBounds[i].max))
            throw DomainError(std::string("CanopyParams: ") + kParamBounds[i].name + " = " + std::to_string(v) +
                              " outside [" + std::to_string(kParamBounds[i].min) + ", " +
                              std::to_string(kParamBounds[i].max) + "]");
    }
    if (p.soil_id < 0) throw DomainError("CanopyParams: negative soil_id");
}

/// Sun/view geometry in degrees. Inputs are nadir-normalised, so the toy
/// model only accepts the default.
struct Geometry {
    double theta_s = 0.0;
    double theta_v = 0.0;
    double delta_phi = 0.0;

    bool is_nadir() const { return theta_s == 0.0 && theta_v == 0.0; }
};

struct SoilSpectrum {
    int id = 0;
    Bands reflectance{};  ///< red, nir, mir
};

struct SimRecord {
    Bands k0{};
    double lai = 0.0;
    double fvc = 0.0;
    double fapar = 0.0;
    CanopyParams params{};
};

struct FaparConfig {
    double skyl = 0.2;          ///< diffuse fraction of incoming PAR
    int n_quad = 24;            ///< nodes of the sunrise-to-sunset rule
    double latitude = 0.0;      ///< degrees
    double declination = 0.0;   ///< degrees
    int n_quad_white = 64;      ///< nodes of the hemispherical white-sky rule

    void validate() const {
        if (!(skyl >= 0.0 && skyl <= 1.0)) throw ConfigError("FaparConfig: skyl must lie in [0,1]");
        if (n_quad < 4) throw ConfigError("FaparConfig: n_quad must be >= 4");
        if (n_quad_white < 4) throw ConfigError("FaparConfig: n_quad_white must be >= 4");
    }
};

// ---------------------------------------------------------------------------
// Extinction (ellipsoidal leaf angle distribution, Campbell closed forms).

/// Ellipsoidal shape parameter chi from the average leaf angle in degrees.
inline double ellipsoidal_chi(double ala_deg) {
    if (!(ala_deg >= 5.0 && ala_deg <= 85.0)) throw DomainError("ellipsoidal_chi: ala must lie in [5, 85] degrees");
    const double ala = deg2rad(ala_deg);
    return std::clamp(std::pow(9.65 / ala, 1.0 / 1.65) - 3.0, 0.1, 10.0);
}

namespace detail {
inline double extinction_unchecked(double chi, double theta_rad) {
    const double t = std::tan(theta_rad);
    return std::sqrt(chi * chi + t * t) / (chi + 1.774 * std::pow(chi + 1.182, -0.733));
}
}  // namespace detail

/// Extinction coefficient K(chi, theta) for a zenith angle in degrees.
inline double extinction_coefficient_chi(double chi, double theta_deg) {
    if (!(theta_deg >= 0.0 && theta_deg < 90.0)) throw DomainError("extinction_coefficient: theta must lie in [0, 90)");
    if (!(chi > 0.0)) throw DomainError("extinction_coefficient: chi must be positive");
    return detail::extinction_unchecked(chi, deg2rad(theta_deg));
}

inline double extinction_coefficient(double ala_deg, double theta_deg) {
    return extinction_coefficient_chi(ellipsoidal_chi(ala_deg), theta_deg);
}

/// Nadir gap-fraction cover: 1 - exp(-K(ala, 0) * lai).
inline double fvc_from_lai(double lai, double ala_deg) {
    if (!(lai >= 0.0)) throw DomainError("fvc_from_lai: lai must be non-negative");
    return -std::expm1(-extinction_coefficient(ala_deg, 0.0) * lai);
}

// ---------------------------------------------------------------------------
// Leaf optics of the toy model.

struct LeafAlbedo {
    Bands omega{};
};

inline LeafAlbedo leaf_albedo(const CanopyParams& p) {
    auto clamp = [](double w) { return std::clamp(w, 0.01, 0.99); };
    return {{clamp(0.12 + 0.45 * std::exp(-p.c_ab / 25.0)), clamp(0.92 - 6.0 * p.c_dm),
             clamp(0.65 * (1.0 - 0.5 * p.c_rel))}};
}

/// Reflectance of an optically infinite canopy with single-scattering albedo w.
inline double infinite_reflectance(double omega) {
    const double s = std::sqrt(1.0 - omega);
    return (1.0 - s) / (1.0 + s);
}

// ---------------------------------------------------------------------------
// FAPAR.

/// Instantaneous direct (black-sky) FAPAR at a sun zenith angle in radians.
inline double black_sky_fapar(double lai, double chi, double omega_red, double theta_rad) {
    return -std::expm1(-detail::extinction_unchecked(chi, theta_rad) * lai) * (1.0 - omega_red);
}

/// Diffuse (white-sky) FAPAR: black-sky FAPAR averaged over the hemisphere
/// with the 2 sin(t) cos(t) weight.
inline double white_sky_fapar(double lai, double chi, double omega_red, int n_quad = 64) {
    const auto rule = gauss_legendre(n_quad, 0.0, kPi / 2.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double t = rule.nodes[i];
        acc += rule.weights[i] * black_sky_fapar(lai, chi, omega_red, t) * 2.0 * std::sin(t) * std::cos(t);
    }
    return acc;
}

/// Half-length of the daylight hour-angle span, radians.
inline double daylight_half_span(double latitude_deg, double declination_deg) {
    const double c = -std::tan(deg2rad(latitude_deg)) * std::tan(deg2rad(declination_deg));
    if (c >= 1.0) throw DomainError("daily_fapar: the sun does not rise at this latitude/declination");
    if (c <= -1.0) return kPi;
    return std::acos(c);
}

/// Daily-integrated canopy FAPAR: the cos(theta_s)-weighted mean over the
/// daylight span of (1 - skyl) * black-sky + skyl * white-sky.
inline double daily_fapar(const CanopyParams& p, const FaparConfig& cfg = {}) {
    cfg.validate();
    if (!(p.lai >= 0.0)) throw DomainError("daily_fapar: lai must be non-negative");
    const double chi = ellipsoidal_chi(p.ala);
    const double omega_red = leaf_albedo(p).omega[0];
    const double white = white_sky_fapar(p.lai, chi, omega_red, cfg.n_quad_white);

    const double h0 = daylight_half_span(cfg.latitude, cfg.declination);
    const double phi = deg2rad(cfg.latitude), delta = deg2rad(cfg.declination);
    const auto rule = gauss_legendre(cfg.n_quad, -h0, h0);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double mu = std::cos(phi) * std::cos(delta) * std::cos(rule.nodes[i]) + std::sin(phi) * std::sin(delta);
        if (mu <= 0.0) continue;
        const double w = rule.weights[i] * mu;
        num += w * black_sky_fapar(p.lai, chi, omega_red, std::acos(mu));
        den += w;
    }
    const double black = den > 0.0 ? num / den : 0.0;
    return (1.0 - cfg.skyl) * black + cfg.skyl * white;
}

// ---------------------------------------------------------------------------
// Spectral convolution.

struct SpectralSample {
    double wavelength_nm;
    double value;
};

using Spectrum = std::vector<SpectralSample>;

namespace detail {
inline void check_increasing(const Spectrum& s, const char* what) {
    if (s.empty()) throw DataError(std::string("convolve_srf: empty ") + what);
    for (std::size_t i = 1; i < s.size(); ++i)
        if (!(s[i].wavelength_nm > s[i - 1].wavelength_nm))
            throw DataError(std::string("convolve_srf: ") + what + " wavelengths must be strictly increasing");
}

inline double interp(const Spectrum& s, double wl) {
    auto it = std::lower_bound(s.begin(), s.end(), wl,
                               [](const SpectralSample& a, double w) { return a.wavelength_nm < w; });
    if (it == s.end()) return s.back().value;
    if (it->wavelength_nm == wl || it == s.begin()) return it->value;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double t = (wl - lo.wavelength_nm) / (hi.wavelength_nm - lo.wavelength_nm);
    return lo.value + t * (hi.value - lo.value);
}
}  // namespace detail

/// Band-equivalent reflectance: trapezoid-rule ratio of the integral of
/// R*S over the integral of S on the common wavelength support. Both tables
/// are linearly interpolated onto the union of their grids.
inline double convolve_srf(const Spectrum& spectrum, const Spectrum& srf) {
    detail::check_increasing(spectrum, "spectrum");
    detail::check_increasing(srf, "srf");
    for (const auto& s : srf)
        if (s.value < 0.0) throw DataError("convolve_srf: negative spectral response");
    const double lo = std::max(spectrum.front().wavelength_nm, srf.front().wavelength_nm);
    const double hi = std::min(spectrum.back().wavelength_nm, srf.back().wavelength_nm);
    if (!(lo <= hi)) throw DataError("convolve_srf: spectrum and srf do not overlap");

    std::vector<double> grid;
    for (const auto* table : {&spectrum, &srf})
        for (const auto& s : *table)
            if (s.wavelength_nm >= lo && s.wavelength_nm <= hi) grid.push_back(s.wavelength_nm);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double dw = 0.5 * (grid[i + 1] - grid[i]);
        const double s0 = detail::interp(srf, grid[i]), s1 = detail::interp(srf, grid[i + 1]);
        num += dw * (s0 * detail::interp(spectrum, grid[i]) + s1 * detail::interp(spectrum, grid[i + 1]));
        den += dw * (s0 + s1);
    }
    if (!(den > 0.0)) throw DataError("convolve_srf: spectral response integrates to zero over the overlap");
    return num / den;
}

// ---------------------------------------------------------------------------
// Soil background and pixel mixing.

/// 20 synthetic soil spectra: red spans [0.10, 0.40], nir = red + 0.07,
/// mir = 1.6 red + 0.04.
inline std::vector<SoilSpectrum> default_soil_library() {
    std::vector<SoilSpectrum> lib;
    constexpr int n = 20;
    for (int i = 0; i < n; ++i) {
        const double red = 0.10 + 0.30 * i / (n - 1);
        lib.push_back({i, {red, red + 0.07, 1.6 * red + 0.04}});
    }
    return lib;
}

/// Linear mixture of a pure-vegetation record with the brightness-scaled
/// soil; all three biophysical targets are scaled by v_cover.
inline SimRecord mix_pixel(const SimRecord& veg, const SoilSpectrum& soil, double beta_s, double v_cover) {
    if (!(v_cover >= 0.0 && v_cover <= 1.0)) throw DomainError("mix_pixel: v_cover must lie in [0,1]");
    SimRecord out = veg;
    for (int b = 0; b < kBands; ++b)
        out.k0[b] = veg.k0[b] * v_cover + beta_s * soil.reflectance[b] * (1.0 - v_cover);
    out.lai = veg.lai * v_cover;
    out.fvc = veg.fvc * v_cover;
    out.fapar = veg.fapar * v_cover;
    out.params.v_cover = v_cover;
    return out;
}

/// Pure-vegetation (v_cover = 1) toy canopy over the brightness-scaled soil.
inline SimRecord simulate_pure_vegetation(const CanopyParams& p, const SoilSpectrum& soil, const FaparConfig& fcfg = {}) {
    const double c0 = extinction_coefficient(p.ala, 0.0);
    const double t = std::exp(-2.0 * c0 * p.lai);
    const auto albedo = leaf_albedo(p);
    SimRecord rec;
    rec.params = p;
    for (int b = 0; b < kBands; ++b) {
        const double r_inf = infinite_reflectance(albedo.omega[b]);
        rec.k0[b] = r_inf * (1.0 - t) + p.beta_s * soil.reflectance[b] * t;
    }
    rec.lai = p.lai;
    rec.fvc = fvc_from_lai(p.lai, p.ala);
    rec.fapar = daily_fapar(p, fcfg);
    return rec;
}

/// Deterministic toy forward model: pure-vegetation canopy mixed with bare
/// soil according to v_cover.
inline SimRecord simulate_toy(const CanopyParams& p, const Geometry& geom, const SoilSpectrum& soil,
                              const FaparConfig& fcfg = {}) {
    validate(p);
    if (!geom.is_nadir()) throw DomainError("simulate_toy: the toy model is defined for nadir geometry only");
    return mix_pixel(simulate_pure_vegetation(p, soil, fcfg), soil, p.beta_s, p.v_cover);
}

}  // namespace biopar::rtm
