#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace wdrt {

/// mt19937_64 with hand-rolled variate transforms, so that streams are
/// reproducible across standard libraries (std distributions are
/// implementation-defined).
struct Rng {
    std::mt19937_64 eng;

    explicit Rng(uint64_t seed) : eng(seed) {}

    /// Derive an independent stream for a named purpose.
    Rng fork(uint64_t tag) const {
        std::mt19937_64 copy = eng;
        uint64_t s = copy();
        s ^= 0x9e3779b97f4a7c15ULL * (tag + 1);
        return Rng(s);
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(eng() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Inclusive integer range.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(eng() % static_cast<uint64_t>(hi - lo + 1));
    }
    double normal() {  // Box-Muller, one value per call
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

/// Truncated normal: mean 0, given stddev, resampled outside +-2 stddev.
inline void truncated_normal_fill(Rng& rng, std::span<double> out, double stddev) {
    for (double& v : out) {
        double z = rng.normal();
        while (std::fabs(z) > 2.0) z = rng.normal();
        v = z * stddev;
    }
}

}  // namespace wdrt
