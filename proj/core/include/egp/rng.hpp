#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

namespace egp {

/// Deterministic random source used by every stochastic operator.
///
/// Wraps std::mt19937_64 (whose raw output sequence is pinned by the
/// standard) and derives ints/reals with fixed algorithms instead of the
/// implementation-defined std distributions, so a given seed produces the
/// same stream on every platform and toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t u64() { return gen_(); }

    /// Uniform integer in [0, bound). bound must be > 0.
    /// Lemire multiply-shift with rejection, so the draw is unbiased.
    std::uint64_t below(std::uint64_t bound) {
        unsigned __int128 m = static_cast<unsigned __int128>(u64()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = -bound % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(u64()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Uniform real in [0, 1) with 53 random bits.
    double real01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    bool chance(double p) { return real01() < p; }

    /// k distinct values from {0..n-1}, uniformly, via partial Fisher-Yates.
    /// Result is sorted ascending.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + index(n - i)]);
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

private:
    std::mt19937_64 gen_;
};

/// splitmix64 finalizer; good avalanche for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Per-run seed for (base_seed, method, dataset, run). Each tuple is hashed
/// independently, so adding a method or dataset to an experiment never
/// perturbs the seeds of the others.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view method,
                                    std::string_view dataset, std::uint64_t run) {
    std::uint64_t h = mix64(base_seed);
    h = mix64(h ^ fnv1a64(method));
    h = mix64(h ^ fnv1a64(dataset));
    h = mix64(h ^ run);
    return h;
}

}  // namespace egp
