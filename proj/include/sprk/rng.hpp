#pragma once

// Deterministic, platform-independent random streams. Each Monte Carlo path
// derives its own substream from (seed, path index), so results depend only
// on the seed, never on scheduling. Gaussian variates use an explicit
// Box-Muller transform; standard-library distributions are avoided because
// their output is implementation-defined.

#include <cmath>
#include <cstdint>

namespace sprk {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t st = seed ^ (0x632be59bd9b4e019ull * (stream + 1));
        for (auto& w : s_) w = splitmix64(st);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t next_u64() {
        // xoshiro256++
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in (0,1)
    double uniform() {
        std::uint64_t bits = next_u64() >> 11;
        double u = (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
        return u;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4] = {};
    double spare_ = 0;
    bool have_spare_ = false;
};

// Substream for one path of one study.
inline Rng path_rng(std::uint64_t seed, std::uint64_t path) { return Rng(seed, path); }

}  // namespace sprk
