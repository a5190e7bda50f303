#pragma once

// Per-replicate and per-batch random streams.
//
// Seed derivation (fixed for the lifetime of the archive format):
//   seed = splitmix64_step(global_seed ^ fnv1a64(canonical_key))
// where fnv1a64 is 64-bit FNV-1a (offset 0xcbf29ce484222325, prime
// 0x100000001b3) over the UTF-8 key, and splitmix64_step(x) adds
// 0x9E3779B97F4A7C15 and applies the SplitMix64 finalizer
// (0xBF58476D1CE4E5B9, 0x94D049BB133111EB; shifts 30/27/31).
//
// Generator: xoshiro256** 1.0. Its four state words are the first four
// outputs of a SplitMix64 sequence started at the derived seed.
//
// Samplers: uniform doubles take the top 53 bits; normals use the polar
// Box-Muller method (the spare deviate is kept); Poisson uses sequential
// inversion for lambda <= 30 and Hormann's PTRS above; gamma uses
// Marsaglia-Tsang (shape < 1 via the U^(1/a) boost); beta is X/(X+Y) from two
// gammas; permutations are Fisher-Yates; multivariate normals use a PSD
// Cholesky factor.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "simengine/errors.hpp"
#include "simengine/levels.hpp"
#include "simengine/linalg.hpp"

namespace simengine {

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kSplitMixMul1 = 0xBF58476D1CE4E5B9ULL;
inline constexpr std::uint64_t kSplitMixMul2 = 0x94D049BB133111EBULL;
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * kSplitMixMul1;
    z = (z ^ (z >> 27)) * kSplitMixMul2;
    return z ^ (z >> 31);
}

/// One SplitMix64 step: the output for state `x` (state advanced by gamma).
constexpr std::uint64_t splitmix64_step(std::uint64_t x) noexcept { return splitmix64_mix(x + kSplitMixGamma); }

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : text) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

enum class StreamKind { replicate, batch };

struct StreamKey {
    StreamKind kind = StreamKind::replicate;
    std::string canonical_key;

    /// All level assignments (name-sorted) plus "rep=<rep_id>".
    static StreamKey replicate(const LevelCombo& combo, std::uint64_t rep_id) {
        return {StreamKind::replicate,
                canonical_assignments(combo, assignment_names(combo)) + "rep=" + std::to_string(rep_id)};
    }

    /// Batch-level assignments plus "rep=<rep_id>;block=<block_index>".
    static StreamKey batch(const LevelCombo& combo, const std::vector<std::string>& batch_names,
                           std::uint64_t rep_id, std::uint64_t block_index) {
        return {StreamKind::batch, canonical_assignments(combo, batch_names) + "rep=" + std::to_string(rep_id) +
                                       ";block=" + std::to_string(block_index)};
    }
};

inline std::uint64_t derive_seed(std::uint64_t global_seed, const StreamKey& key) noexcept {
    return splitmix64_step(global_seed ^ fnv1a64(key.canonical_key));
}

/// xoshiro256** with the samplers the engine and the bundled studies need.
/// Satisfies UniformRandomBitGenerator.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed) noexcept {
        std::uint64_t x = seed;
        for (auto& word : s_) {
            word = splitmix64_step(x);
            x += kSplitMixGamma;
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type next() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }
    result_type operator()() noexcept { return next(); }

    /// [0, 1)
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    /// (0, 1), safe for logarithms.
    double uniform_open() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) {
        if (!(lo <= hi)) throw DistributionError("uniform bounds must satisfy min <= max", "uniform(min, max)");
        return lo + (hi - lo) * uniform();
    }

    /// Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw DistributionError("range must be non-empty", "below(n)");
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % n;
    }

    double normal(double mean = 0.0, double sd = 1.0) {
        if (!(sd >= 0.0)) throw DistributionError("standard deviation must be non-negative", "normal(mean, sd)");
        return mean + sd * standard_normal();
    }

    std::vector<double> normal(std::size_t n, double mean = 0.0, double sd = 1.0) {
        std::vector<double> out(n);
        for (auto& x : out) x = normal(mean, sd);
        return out;
    }

    std::int64_t poisson(double lambda) {
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw DistributionError("Poisson rate must be positive and finite", "poisson(lambda)");
        return lambda <= 30.0 ? poisson_inversion(lambda) : poisson_ptrs(lambda);
    }

    std::vector<std::int64_t> poisson(std::size_t n, double lambda) {
        std::vector<std::int64_t> out(n);
        for (auto& x : out) x = poisson(lambda);
        return out;
    }

    double gamma(double shape, double scale = 1.0) {
        if (!(shape > 0.0) || !(scale > 0.0))
            throw DistributionError("gamma shape and scale must be positive", "gamma(shape, scale)");
        if (shape < 1.0) {
            const double boost = std::pow(uniform_open(), 1.0 / shape);
            return gamma(shape + 1.0, scale) * boost;
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = standard_normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_open();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    double beta(double a, double b) {
        if (!(a > 0.0) || !(b > 0.0)) throw DistributionError("Beta shapes must be positive", "beta(a, b)");
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Uniformly random permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> out(n);
        std::iota(out.begin(), out.end(), std::size_t{0});
        shuffle(std::span<std::size_t>(out));
        return out;
    }

    /// One draw from N(mean, sigma). Throws DistributionError with
    /// "'Sigma' is not positive definite" when sigma is not PSD.
    std::vector<double> mvnormal(std::span<const double> mean, const Matrix& sigma) {
        if (sigma.rows() != mean.size() || sigma.cols() != mean.size())
            throw DistributionError("'mu' and 'Sigma' have non-conforming sizes", "mvnormal(mu, Sigma)");
        Matrix lower;
        switch (cholesky_psd(sigma, lower)) {
        case FactorStatus::ok:
            break;
        case FactorStatus::not_symmetric:
            throw DistributionError("'Sigma' is not symmetric", "mvnormal(mu, Sigma)");
        case FactorStatus::not_psd:
            throw DistributionError("'Sigma' is not positive definite", "mvnormal(mu, Sigma)");
        }
        std::vector<double> z(mean.size());
        for (auto& v : z) v = standard_normal();
        std::vector<double> out(mean.begin(), mean.end());
        for (std::size_t i = 0; i < out.size(); ++i)
            for (std::size_t k = 0; k <= i; ++k) out[i] += lower(i, k) * z[k];
        return out;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    double standard_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    std::int64_t poisson_inversion(double lambda) {
        double p = std::exp(-lambda);
        double cdf = p;
        const double u = uniform();
        std::int64_t k = 0;
        // The tail cap guards against u landing above the rounded total mass.
        while (u > cdf && k < 1000) {
            ++k;
            p *= lambda / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

    // Hormann (1993), "The transformed rejection method for generating
    // Poisson random variables".
    std::int64_t poisson_ptrs(double lambda) {
        const double slam = std::sqrt(lambda);
        const double loglam = std::log(lambda);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform_open();
            const double us = 0.5 - std::abs(u);
            const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
                -lambda + k * loglam - std::lgamma(k + 1.0))
                return static_cast<std::int64_t>(k);
        }
    }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace simengine
