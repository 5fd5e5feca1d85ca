#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace hoigen {

/// Deterministic RNG (xoshiro256** + splitmix64 seeding) with an explicitly
/// serializable state, so checkpoints can resume the exact random stream.
/// Gaussian draws use Box-Muller with a cached spare.
class Rng {
public:
    Rng() : Rng(0x9e3779b97f4a7c15ull) {}

    explicit Rng(uint64_t seed) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
        has_spare_ = false;
        spare_ = 0.0;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        // multiply-shift with rejection-free bias small enough for our uses;
        // n is always tiny compared to 2^64 here.
        return static_cast<uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // avoid log(0)
        const double u = 1.0 - uniform();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Derive an independent child generator; mixing is order-free in `tag`.
    Rng fork(uint64_t tag) const {
        uint64_t x = state_[0] ^ rotl(state_[2], 13) ^ (tag * 0xbf58476d1ce4e5b9ull);
        return Rng(splitmix64(x));
    }

    struct State {
        uint64_t s[4];
        bool has_spare;
        double spare;
    };

    State save() const {
        State st{};
        for (int i = 0; i < 4; ++i) st.s[i] = state_[i];
        st.has_spare = has_spare_;
        st.spare = spare_;
        return st;
    }

    void restore(const State& st) {
        for (int i = 0; i < 4; ++i) state_[i] = st.s[i];
        has_spare_ = st.has_spare;
        spare_ = st.spare;
    }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// FNV-1a, used to derive per-name parameter seeds and procedural features.
    static uint64_t hash64(const std::string& s, uint64_t seed = 0xcbf29ce484222325ull) {
        uint64_t h = seed;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return h;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4]{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hoigen
