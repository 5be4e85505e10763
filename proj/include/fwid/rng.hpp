#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fwid {

// Deterministic random streams. The mt19937_64 engine is bit-exact by the
// standard; the uniform/normal mappings live here so draws are identical
// across standard libraries (std distributions are implementation-defined).

std::uint64_t splitmix64(std::uint64_t x);

// Stream for replication `rep` of a run with base seed `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t rep) {
    return splitmix64(seed ^ rep);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on (0,1): 53-bit mantissa, never exactly 0.
    double uniform01() {
        std::uint64_t u = engine_() >> 11;
        return (static_cast<double>(u) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; caches the second draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Chi-squared with integer degrees of freedom (all dfs in this project
    // are small integers).
    double chisq(int df) {
        double s = 0.0;
        for (int i = 0; i < df; ++i) {
            double z = normal();
            s += z * z;
        }
        return s;
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fwid
