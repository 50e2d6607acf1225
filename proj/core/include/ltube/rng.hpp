#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ltube/vec3.hpp"

namespace ltube {

/// SplitMix64 finalizer: a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based hash of (seed, index, stream). Gives O(1) random access to
/// the draw of any cell of the bi-infinite tube or any orbit of an ensemble.
constexpr std::uint64_t counter_hash(std::uint64_t seed, std::int64_t index, std::uint64_t stream) {
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(a ^ static_cast<std::uint64_t>(index));
    return splitmix64(b + stream);
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Seeded stream of uniforms. Draws are produced from raw 64-bit words so the
/// sequence is identical across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Stream for orbit `id` under `master`; independent of scheduling.
    static Rng for_stream(std::uint64_t master, std::int64_t id) {
        return Rng(counter_hash(master, id, 0x6F72626974ULL));
    }

    double uniform() { return to_unit(engine_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t bits() { return engine_(); }

    /// Standard normal by the polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2 * uniform() - 1;
            v = 2 * uniform() - 1;
            s = u * u + v * v;
        } while (s >= 1 || s == 0);
        const double f = std::sqrt(-2 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    Vec3 unit_vector() {
        Vec3 d{normal(), normal(), normal()};
        return d / norm(d);
    }

  private:
    std::mt19937_64 engine_;
    double spare_{0};
    bool has_spare_{false};
};

/// Direction with density proportional to cos(angle to `n`) on the
/// hemisphere around the unit vector `n`.
inline Vec3 cosine_weighted(const Vec3& n, Rng& rng) {
    const Vec3 t1 = any_orthogonal(n);
    const Vec3 t2 = cross(n, t1);
    const double c = std::sqrt(rng.uniform());
    const double s = std::sqrt(std::max(0.0, 1 - c * c));
    const double phi = 2 * M_PI * rng.uniform();
    return normalized(c * n + s * std::cos(phi) * t1 + s * std::sin(phi) * t2);
}

/// Uniform direction on the hemisphere around `n` (biased w.r.t. the
/// billiard section measure; used as a negative control).
inline Vec3 uniform_hemisphere(const Vec3& n, Rng& rng) {
    const Vec3 t1 = any_orthogonal(n);
    const Vec3 t2 = cross(n, t1);
    const double c = rng.uniform();
    const double s = std::sqrt(std::max(0.0, 1 - c * c));
    const double phi = 2 * M_PI * rng.uniform();
    return normalized(c * n + s * std::cos(phi) * t1 + s * std::sin(phi) * t2);
}

}  // namespace ltube
