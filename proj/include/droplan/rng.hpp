// rng.hpp : counter-based deterministic random number generation.
//
// Experiment cells must produce identical draws no matter which thread or
// in which order they run, and across toolchains. std::shuffle and
// std::normal_distribution are implementation-defined, so sampling is done
// by hand on top of a splitmix64 counter generator.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace droplan {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Combines seed material into a new 64-bit key (order-sensitive).
inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// FNV-1a over a string, for deriving per-cell seeds from textual ids.
inline std::uint64_t hash_str(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Counter-based generator: draw i is a pure function of (key, i), so
/// streams can be split and evaluated in any order.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * (++ctr_)); }

    /// Uniform in the open interval (0,1); never returns 0 or 1, which keeps
    /// log() and Box-Muller safe.
    double next_uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (both values used, cached).
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n), n >= 1. Rejection-free modulo is fine here:
    /// n is tiny relative to 2^64, the bias is < n/2^64.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    /// Deterministic Fisher-Yates shuffle of index vector [0, n).
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(idx[i - 1], idx[j]);
        }
        return idx;
    }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace droplan
