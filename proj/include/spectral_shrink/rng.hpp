#pragma once

// Reproducible random number generation. Each replicate of an experiment
// draws from its own substream, derived by hashing (base seed, stream index),
// so results do not depend on scheduling or thread count.
//
// Generator: xoshiro256++ seeded through splitmix64. Gaussian variates by the
// Box-Muller transform on 53-bit uniforms (pairwise, deterministic).

#include <cmath>
#include <cstdint>

namespace spectral_shrink {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable substream derivation: hash of the base seed and a stream index.
inline std::uint64_t derive_stream_seed(std::uint64_t base_seed, std::uint64_t stream) {
    std::uint64_t s = base_seed;
    (void)splitmix64_next(s);
    s ^= 0x9e3779b97f4a7c15ULL * (stream + 1);
    return splitmix64_next(s);
}

class Xoshiro256pp {
  public:
    explicit Xoshiro256pp(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64_next(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on (0,1): (k + 0.5) / 2^53 with k the top 53 bits.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4] = {};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace spectral_shrink
