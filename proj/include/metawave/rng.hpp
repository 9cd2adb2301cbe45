#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

#include <Eigen/Core>

namespace metawave {

// All randomness flows through RngStream so that simulations are exactly
// reproducible: uniforms and normals are built from the raw 64-bit engine
// output rather than std::*_distribution, whose algorithms are
// implementation-defined.

namespace detail {
    inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }
}

/// Derives a child seed from a master seed and a path of stream labels.
/// Each distinct path yields an independent stream; adding new labels never
/// perturbs the streams of existing ones.
inline std::uint64_t deriveSeed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = detail::splitmix64(master ^ 0x6d657461776176ull);
    for (auto p : path)
        h = detail::splitmix64(h ^ detail::splitmix64(p + 0x9e3779b97f4a7c15ull));
    return h;
}

class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t nextU64() { return gen_(); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; used where log(u) must stay finite.
    double uniformPos() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniformIndex(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do { x = gen_(); } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller; consumes exactly two engine draws.
    double normal() {
        const double u1 = uniformPos();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    Eigen::VectorXd normalVector(Eigen::Index d) {
        Eigen::VectorXd z(d);
        for (Eigen::Index i = 0; i < d; ++i)
            z[i] = normal();
        return z;
    }

    /// Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0)
            return gamma(shape + 1.0) * std::pow(uniformPos(), 1.0 / shape);
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniformPos();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
                return d * v;
        }
    }

  private:
    std::mt19937_64 gen_;
};

}
