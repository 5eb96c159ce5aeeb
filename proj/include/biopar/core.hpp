#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define BIOPAR_HAVE_MXCSR 1
#endif

namespace biopar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed or out-of-range input data (files, records, rasters).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (grids, counts, fractions).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Linear algebra or optimisation failure.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Flushes subnormal results and operands to zero for the current thread
/// while alive. Kernel entries between distant points underflow into the
/// subnormal range, which is orders of magnitude slower on x86.
class ScopedFlushDenormals {
public:
#ifdef BIOPAR_HAVE_MXCSR
    ScopedFlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
    ~ScopedFlushDenormals() { _mm_setcsr(saved_); }

private:
    unsigned saved_;
#else
    ScopedFlushDenormals() = default;
#endif
public:
    ScopedFlushDenormals(const ScopedFlushDenormals&) = delete;
    ScopedFlushDenormals& operator=(const ScopedFlushDenormals&) = delete;
};

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kBands = 3;
inline constexpr int kOutputs = 3;

/// Band order is fixed: red, nir, mir.
using Bands = std::array<double, kBands>;

enum class Output : int { lai = 0, fvc = 1, fapar = 2 };

inline constexpr std::array<std::string_view, kBands> kBandNames{"red", "nir", "mir"};
inline constexpr std::array<std::string_view, kOutputs> kOutputNames{"lai", "fvc", "fapar"};

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }

// ---------------------------------------------------------------------------
// Warnings. Library code never prints directly; the sink defaults to stderr.

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink() {
    static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return sink;
}

inline void warn(const std::string& msg) {
    if (warning_sink()) warning_sink()(msg);
}

// ---------------------------------------------------------------------------
// Random streams.

/// SplitMix64 finaliser; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based seed for stream `index` under master `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

/// Uniform draw in [0,1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal draw (Marsaglia polar method, no cached state).
inline double standard_normal(Rng& rng) {
    for (;;) {
        const double u = 2.0 * uniform01(rng) - 1.0;
        const double v = 2.0 * uniform01(rng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

/// Fisher-Yates shuffle driven by uniform01, so sequences do not depend on
/// the standard library's distribution implementations.
template <class It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
        auto j = static_cast<decltype(i)>(uniform01(rng) * static_cast<double>(i + 1));
        if (j > i) j = i;
        std::iter_swap(first + i, first + j);
    }
}

}  // namespace biopar
