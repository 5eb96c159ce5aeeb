#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "biopar/rtm.hpp"

using namespace biopar;
using namespace biopar::rtm;

namespace {

constexpr double kSpherical = 57.2958;

// Hand transcription of the ellipsoidal closed forms.
double oracle_chi(double ala_deg) {
    const double a = ala_deg * 3.14159265358979323846 / 180.0;
    double chi = std::pow(9.65 / a, 1.0 / 1.65) - 3.0;
    return chi < 0.1 ? 0.1 : (chi > 10.0 ? 10.0 : chi);
}

double oracle_k(double chi, double theta_rad) {
    const double t = std::tan(theta_rad);
    return std::sqrt(chi * chi + t * t) / (chi + 1.774 * std::pow(chi + 1.182, -0.733));
}

template <class F>
double simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Daily FAPAR on the equator at equinox by composite Simpson rules.
double oracle_daily_fapar(double lai, double ala, double c_ab, double skyl) {
    const double chi = oracle_chi(ala);
    double w_red = 0.12 + 0.45 * std::exp(-c_ab / 25.0);
    w_red = std::min(0.99, std::max(0.01, w_red));
    auto fbs = [&](double th) { return (1.0 - std::exp(-oracle_k(chi, th) * lai)) * (1.0 - w_red); };
    const double half_pi = 1.57079632679489661923;
    // Stop just short of the horizon where tan() blows up; the weight vanishes there.
    const double edge = half_pi - 1e-9;
    const double white = simpson([&](double th) { return fbs(th) * 2.0 * std::sin(th) * std::cos(th); }, 0.0, edge, 20000);
    const double num = simpson([&](double h) { return std::cos(h) * fbs(std::abs(h)); }, -edge, edge, 20000);
    const double den = simpson([&](double h) { return std::cos(h); }, -edge, edge, 20000);
    return (1.0 - skyl) * num / den + skyl * white;
}

SoilSpectrum soil0() { return default_soil_library().front(); }

CanopyParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CanopyParams p;
    p.lai = 8.0 * u(rng);
    p.ala = 35.0 + 45.0 * u(rng);
    p.c_ab = 20.0 + 70.0 * u(rng);
    p.c_dm = 0.005 + 0.025 * u(rng);
    p.c_rel = 0.6 + 0.25 * u(rng);
    p.beta_s = 0.1 + 0.9 * u(rng);
    p.v_cover = u(rng);
    return p;
}

}  // namespace

TEST(Extinction, SphericalEquivalentAla) {
    const double k = extinction_coefficient(kSpherical, 0.0);
    EXPECT_NEAR(k, 0.483, 1e-3);
    EXPECT_NEAR(k, 0.5, 0.05 * 0.5);
    EXPECT_NEAR(k, oracle_k(oracle_chi(kSpherical), 0.0), 1e-14);
}

TEST(Extinction, IncreasesWithZenith) {
    EXPECT_GT(extinction_coefficient(kSpherical, 60.0), extinction_coefficient(kSpherical, 0.0));
    double prev = 0.0;
    for (double th = 0.0; th < 89.0; th += 1.0) {
        const double k = extinction_coefficient(45.0, th);
        EXPECT_GE(k, prev);
        prev = k;
    }
}

TEST(Extinction, ChiOneDirect) {
    const double expected = 1.0 / (1.0 + 1.774 * std::pow(2.182, -0.733));
    EXPECT_NEAR(extinction_coefficient_chi(1.0, 0.0), expected, 1e-15);
    EXPECT_NEAR(expected, 0.4997, 1e-4);
}

TEST(Extinction, GrazingAngleRejected) {
    EXPECT_THROW(extinction_coefficient(kSpherical, 90.0), DomainError);
    EXPECT_THROW(extinction_coefficient(kSpherical, 120.0), DomainError);
    EXPECT_THROW(extinction_coefficient_chi(-1.0, 0.0), DomainError);
}

TEST(Extinction, ChiIsClamped) {
    EXPECT_DOUBLE_EQ(ellipsoidal_chi(80.0), oracle_chi(80.0));
    EXPECT_GE(ellipsoidal_chi(85.0), 0.1);
    EXPECT_LE(ellipsoidal_chi(5.0), 10.0);
}

TEST(Fvc, Limits) {
    EXPECT_EQ(fvc_from_lai(0.0, 60.0), 0.0);
    for (double ala : {35.0, 50.0, 62.0, 80.0}) EXPECT_GT(fvc_from_lai(100.0, ala), 0.999);
    EXPECT_THROW(fvc_from_lai(-0.1, 60.0), DomainError);
}

TEST(Fvc, ChiOnePath) {
    // ala giving chi = 1 exactly: (9.65/a)^(1/1.65) = 4.
    const double ala = 9.65 / std::pow(4.0, 1.65) * 180.0 / 3.14159265358979323846;
    EXPECT_NEAR(ellipsoidal_chi(ala), 1.0, 1e-12);
    const double c0 = 1.0 / (1.0 + 1.774 * std::pow(2.182, -0.733));
    EXPECT_NEAR(fvc_from_lai(2.0, ala), 1.0 - std::exp(-2.0 * c0), 1e-12);
    EXPECT_NEAR(fvc_from_lai(2.0, ala), 1.0 - std::exp(-1.0), 5e-4);
}

TEST(Fvc, MatchesGapFractionIdentity) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const auto p = random_params(rng);
        const double c0 = extinction_coefficient(p.ala, 0.0);
        EXPECT_NEAR(fvc_from_lai(p.lai, p.ala), 1.0 - std::exp(-c0 * p.lai), 1e-15);
    }
}

TEST(Fapar, ZeroLai) {
    CanopyParams p;
    p.lai = 0.0;
    EXPECT_EQ(daily_fapar(p), 0.0);
}

TEST(Fapar, AllDiffuseEqualsWhiteSky) {
    CanopyParams p;
    p.lai = 2.7;
    FaparConfig cfg;
    cfg.skyl = 1.0;
    const double white = white_sky_fapar(p.lai, ellipsoidal_chi(p.ala), leaf_albedo(p).omega[0], cfg.n_quad_white);
    EXPECT_EQ(daily_fapar(p, cfg), white);
    cfg.latitude = 40.0;
    cfg.declination = 20.0;
    EXPECT_EQ(daily_fapar(p, cfg), white);
}

TEST(Fapar, QuadratureRefinement) {
    CanopyParams p;
    p.lai = 3.0;
    p.ala = 60.0;
    FaparConfig coarse, fine;
    fine.n_quad = 2048;
    EXPECT_NEAR(daily_fapar(p, coarse), daily_fapar(p, fine), 1e-3);
}

TEST(Fapar, MatchesSimpsonOracle) {
    for (double lai : {0.5, 2.0, 3.0, 6.0}) {
        CanopyParams p;
        p.lai = lai;
        p.ala = 60.0;
        FaparConfig cfg;
        cfg.n_quad = 256;
        cfg.n_quad_white = 256;
        EXPECT_NEAR(daily_fapar(p, cfg), oracle_daily_fapar(lai, 60.0, p.c_ab, 0.2), 1e-6) << "lai " << lai;
    }
}

TEST(Fapar, MonotoneInLai) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 8.0);
    for (int i = 0; i < 100; ++i) {
        auto p = random_params(rng);
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        p.lai = a;
        const double fa = daily_fapar(p);
        p.lai = b;
        EXPECT_LE(fa, daily_fapar(p));
    }
}

TEST(Fapar, ConfigValidation) {
    CanopyParams p;
    FaparConfig cfg;
    cfg.skyl = 1.5;
    EXPECT_THROW(daily_fapar(p, cfg), ConfigError);
    cfg = {};
    cfg.n_quad = 3;
    EXPECT_THROW(daily_fapar(p, cfg), ConfigError);
}

TEST(Convolve, FlatSpectrum) {
    Spectrum flat{{400.0, 0.3}, {500.0, 0.3}, {900.0, 0.3}};
    Spectrum srf{{450.0, 0.0}, {460.0, 0.7}, {470.0, 1.0}, {480.0, 0.2}};
    EXPECT_NEAR(convolve_srf(flat, srf), 0.3, 1e-15);
}

TEST(Convolve, DeltaResponse) {
    Spectrum s;
    for (int wl = 500; wl <= 700; wl += 5) s.push_back({double(wl), 0.001 * wl * wl / 700.0});
    Spectrum srf{{595.0, 0.0}, {600.0, 1.0}, {605.0, 0.0}};
    // The triangular response is symmetric about 600 and the spectrum is
    // sampled at the same nodes, so only the 600 nm sample carries weight.
    EXPECT_NEAR(convolve_srf(s, srf), 0.001 * 600.0 * 600.0 / 700.0, 1e-12);
}

TEST(Convolve, LinearRampRectangular) {
    Spectrum ramp;
    for (int wl = 500; wl <= 800; ++wl) ramp.push_back({double(wl), wl / 1000.0});
    Spectrum rect{{600.0, 1.0}, {660.0, 1.0}};
    EXPECT_NEAR(convolve_srf(ramp, rect), 0.63, 1e-12);
}

TEST(Convolve, WithinSpectrumRange) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Spectrum s, srf;
        for (int wl = 400; wl <= 1000; wl += 10) s.push_back({double(wl), u(rng)});
        const double c = 450.0 + 400.0 * u(rng);
        for (int k = -5; k <= 5; ++k) srf.push_back({c + 7.0 * k, u(rng)});
        double lo = 1.0, hi = 0.0;
        for (const auto& x : s)
            if (x.wavelength_nm >= srf.front().wavelength_nm - 10.0 && x.wavelength_nm <= srf.back().wavelength_nm + 10.0) {
                lo = std::min(lo, x.value);
                hi = std::max(hi, x.value);
            }
        const double v = convolve_srf(s, srf);
        EXPECT_GE(v, lo - 1e-12);
        EXPECT_LE(v, hi + 1e-12);
    }
}

TEST(Convolve, Errors) {
    Spectrum s{{400.0, 0.1}, {500.0, 0.2}};
    EXPECT_THROW(convolve_srf(s, Spectrum{{600.0, 1.0}, {700.0, 1.0}}), DataError);
    EXPECT_THROW(convolve_srf(s, Spectrum{{420.0, 1.0}, {450.0, -0.5}}), DataError);
    EXPECT_THROW(convolve_srf(s, Spectrum{{450.0, 1.0}, {420.0, 1.0}}), DataError);
}

TEST(Mixing, Endpoints) {
    CanopyParams p;
    p.lai = 2.5;
    const auto soil = soil0();
    const auto veg = simulate_pure_vegetation(p, soil);
    const auto one = mix_pixel(veg, soil, 0.8, 1.0);
    for (int b = 0; b < kBands; ++b) EXPECT_EQ(one.k0[b], veg.k0[b]);
    EXPECT_EQ(one.lai, veg.lai);
    EXPECT_EQ(one.fvc, veg.fvc);
    EXPECT_EQ(one.fapar, veg.fapar);
    const auto zero = mix_pixel(veg, soil, 0.8, 0.0);
    for (int b = 0; b < kBands; ++b) EXPECT_EQ(zero.k0[b], 0.8 * soil.reflectance[b]);
    EXPECT_EQ(zero.lai, 0.0);
    EXPECT_EQ(zero.fvc, 0.0);
    EXPECT_EQ(zero.fapar, 0.0);
    const auto half = mix_pixel(veg, soil, 0.8, 0.5);
    for (int b = 0; b < kBands; ++b) EXPECT_NEAR(half.k0[b], 0.5 * (veg.k0[b] + 0.8 * soil.reflectance[b]), 1e-16);
    EXPECT_THROW(mix_pixel(veg, soil, 0.8, 1.1), DomainError);
}

TEST(Mixing, Linearity) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto soil = default_soil_library()[7];
    for (int i = 0; i < 100; ++i) {
        auto p = random_params(rng);
        const auto veg = simulate_pure_vegetation(p, soil);
        const double a = u(rng), b = u(rng), lam = u(rng);
        const auto ma = mix_pixel(veg, soil, p.beta_s, a), mb = mix_pixel(veg, soil, p.beta_s, b);
        const auto mc = mix_pixel(veg, soil, p.beta_s, lam * a + (1.0 - lam) * b);
        for (int k = 0; k < kBands; ++k) EXPECT_NEAR(mc.k0[k], lam * ma.k0[k] + (1.0 - lam) * mb.k0[k], 1e-15);
    }
}

TEST(Toy, NoCanopy) {
    CanopyParams p;
    p.lai = 0.0;
    p.v_cover = 1.0;
    const auto soil = soil0();
    const auto r = simulate_toy(p, {}, soil);
    for (int b = 0; b < kBands; ++b) EXPECT_DOUBLE_EQ(r.k0[b], soil.reflectance[b] * p.beta_s);
    EXPECT_EQ(r.lai, 0.0);
    EXPECT_EQ(r.fvc, 0.0);
    EXPECT_EQ(r.fapar, 0.0);
}

TEST(Toy, PureBackground) {
    CanopyParams p;
    p.lai = 5.0;
    p.c_ab = 80.0;
    p.v_cover = 0.0;
    const auto soil = default_soil_library()[12];
    const auto r = simulate_toy(p, {}, soil);
    for (int b = 0; b < kBands; ++b) EXPECT_DOUBLE_EQ(r.k0[b], soil.reflectance[b] * p.beta_s);
    EXPECT_EQ(r.lai, 0.0);
    EXPECT_EQ(r.fvc, 0.0);
    EXPECT_EQ(r.fapar, 0.0);
}

TEST(Toy, ReferenceRecord) {
    CanopyParams p;
    p.lai = 2.0;
    p.ala = kSpherical;
    p.c_ab = 45.0;
    p.c_dm = 0.015;
    p.c_rel = 0.75;
    p.beta_s = 0.8;
    p.v_cover = 1.0;
    const auto soil = soil0();
    const auto r = simulate_toy(p, {}, soil);

    const double c0 = oracle_k(oracle_chi(kSpherical), 0.0);
    const double w[3] = {0.12 + 0.45 * std::exp(-45.0 / 25.0), 0.92 - 6.0 * 0.015, 0.65 * (1.0 - 0.5 * 0.75)};
    const double t = std::exp(-2.0 * c0 * 2.0);
    for (int b = 0; b < kBands; ++b) {
        const double s = std::sqrt(1.0 - w[b]);
        const double rinf = (1.0 - s) / (1.0 + s);
        EXPECT_NEAR(r.k0[b], rinf + (0.8 * soil.reflectance[b] - rinf) * t, 1e-14) << "band " << b;
    }
    EXPECT_EQ(r.lai, 2.0);
    EXPECT_NEAR(r.fvc, 1.0 - std::exp(-c0 * 2.0), 1e-14);
    EXPECT_NEAR(r.fapar, oracle_daily_fapar(2.0, kSpherical, 45.0, 0.2), 2e-4);
}

TEST(Toy, ReflectanceApproachesInfiniteCanopy) {
    std::mt19937_64 rng(21);
    const auto soils = default_soil_library();
    for (int i = 0; i < 50; ++i) {
        auto p = random_params(rng);
        p.v_cover = 1.0;
        const auto& soil = soils[static_cast<std::size_t>(i) % soils.size()];
        const auto alb = leaf_albedo(p);
        double prev[3] = {1e9, 1e9, 1e9};
        for (double lai = 0.0; lai <= 8.0; lai += 0.25) {
            p.lai = lai;
            const auto r = simulate_toy(p, {}, soil);
            for (int b = 0; b < kBands; ++b) {
                const double gap = std::abs(r.k0[b] - infinite_reflectance(alb.omega[b]));
                EXPECT_LE(gap, prev[b] + 1e-15);
                prev[b] = gap;
            }
        }
    }
}

TEST(Toy, OutputsInRange) {
    std::mt19937_64 rng(4);
    const auto soils = default_soil_library();
    for (int i = 0; i < 300; ++i) {
        const auto p = random_params(rng);
        const auto r = simulate_toy(p, {}, soils[static_cast<std::size_t>(i) % soils.size()]);
        for (double v : r.k0) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_GE(r.fvc, 0.0);
        EXPECT_LE(r.fvc, 1.0);
        EXPECT_GE(r.fapar, 0.0);
        EXPECT_LE(r.fapar, 1.0);
        EXPECT_NEAR(r.fvc, fvc_from_lai(p.lai, p.ala) * p.v_cover, 1e-15);
    }
}

TEST(Toy, RejectsBadInputs) {
    CanopyParams p;
    p.lai = 9.0;
    EXPECT_THROW(simulate_toy(p, {}, soil0()), DomainError);
    p = {};
    Geometry g;
    g.theta_s = 30.0;
    EXPECT_THROW(simulate_toy(p, g, soil0()), DomainError);
}

TEST(Soil, DefaultLibrary) {
    const auto lib = default_soil_library();
    ASSERT_EQ(lib.size(), 20u);
    EXPECT_DOUBLE_EQ(lib.front().reflectance[0], 0.10);
    EXPECT_DOUBLE_EQ(lib.back().reflectance[0], 0.40);
    for (const auto& s : lib) {
        EXPECT_NEAR(s.reflectance[1], s.reflectance[0] + 0.07, 1e-15);
        EXPECT_NEAR(s.reflectance[2], 1.6 * s.reflectance[0] + 0.04, 1e-15);
    }
}
