#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace selftune::testing {

/// Seeded draw source for property tests.
struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    bool coin() { return integer(0, 1) == 1; }
};

/// Unit step response of wn^2 / (s^2 + 2 zeta wn s + wn^2), 0 < zeta < 1.
inline double second_order_step(double zeta, double wn, double t) {
    const double wd = wn * std::sqrt(1.0 - zeta * zeta);
    return 1.0 - std::exp(-zeta * wn * t) / std::sqrt(1.0 - zeta * zeta) * std::sin(wd * t + std::acos(zeta));
}

inline double second_order_overshoot(double zeta) {
    return std::exp(-M_PI * zeta / std::sqrt(1.0 - zeta * zeta));
}

}  // namespace selftune::testing
