#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace aggdens {

// 64-bit finalizer from SplitMix64; bijective, good avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Identifies one independent random stream: a master seed plus a path of
// stream ids (cell, replication, split, ...). Deriving a child appends an id,
// so every (replication, split) pair gets its own stream and regeneration is
// bit-identical on any platform and at any parallelism level.
struct SeedPath {
    std::uint64_t master = 0;
    std::vector<std::uint64_t> path;

    SeedPath() = default;
    explicit SeedPath(std::uint64_t m) : master(m) {}
    SeedPath(std::uint64_t m, std::initializer_list<std::uint64_t> ids)
        : master(m), path(ids) {}

    SeedPath child(std::uint64_t id) const {
        SeedPath s(*this);
        s.path.push_back(id);
        return s;
    }

    std::uint64_t state() const {
        std::uint64_t s = mix64(master);
        for (std::uint64_t id : path) s = mix64(s ^ mix64(id));
        return s;
    }

    bool operator==(const SeedPath&) const = default;
};

// Counter-style generator seeded from a SeedPath. Deliberately avoids
// std::normal_distribution and friends, whose output is
// implementation-defined; all variate recipes below are fixed arithmetic so
// streams replay identically everywhere.
class StreamRng {
public:
    explicit StreamRng(const SeedPath& seed) : state_(seed.state()) {}
    explicit StreamRng(std::uint64_t raw_state) : state_(mix64(raw_state)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the cosine partner is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Unbiased integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace aggdens
