#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpinn {

/// Configuration rejected before any work started (bad sizes, counts, ranges).
class invalid_configuration : public std::runtime_error {
public:
    explicit invalid_configuration(const std::string& what) : std::runtime_error(what) {}
};

/// A runtime argument violated an operation's precondition.
class invalid_input : public std::runtime_error {
public:
    explicit invalid_input(const std::string& what) : std::runtime_error(what) {}
};

/// A computation produced or encountered a non-finite value, or an
/// iterative method failed to converge.
class numerical_failure : public std::runtime_error {
public:
    explicit numerical_failure(const std::string& what) : std::runtime_error(what) {}
};

/// A reference solution was requested outside its validity window
/// (e.g. characteristics past shock formation).
class out_of_validity : public std::runtime_error {
public:
    explicit out_of_validity(const std::string& what) : std::runtime_error(what) {}
};

/// A point in the two-axis computational domain. axis0 is always spatial x;
/// axis1 is time for unsteady problems and y for steady planar ones.
struct Point2 {
    double a0 = 0.0;
    double a1 = 0.0;
};

inline bool is_finite(double v) { return std::isfinite(v); }

/// Shortest decimal form that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Deterministic uniform double in [0,1) from a raw 64-bit generator draw.
/// Avoids std::uniform_real_distribution, whose output is
/// implementation-defined; this mapping is identical on every platform.
inline double u01_from_bits(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// splitmix64, used to derive independent per-cell seeds from a run seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::string point_str(const Point2& p) {
    return "(" + format_double(p.a0) + ", " + format_double(p.a1) + ")";
}

} // namespace dpinn
