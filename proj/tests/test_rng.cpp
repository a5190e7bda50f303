#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "simengine/plan.hpp"
#include "simengine/rng.hpp"
#include "simengine/studies/poisson.hpp"

using namespace simengine;

namespace {

// Straight transcription of the public-domain reference code, kept apart
// from the library so the two can be compared.
struct RefSplitMix {
    std::uint64_t x;
    std::uint64_t next() {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
        z = (z ^ (z >> 27)) * 0x94d049bb133111eb;
        return z ^ (z >> 31);
    }
};

struct RefXoshiro {
    std::uint64_t s[4];
    explicit RefXoshiro(std::uint64_t seed) {
        RefSplitMix sm{seed};
        for (auto& w : s) w = sm.next();
    }
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t next() {
        const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }
};

}  // namespace

TEST(SplitMix, FirstOutputOfZeroSeed) {
    EXPECT_EQ(splitmix64_step(0), 0xE220A8397B1DCDAFULL);
    RefSplitMix ref{0};
    EXPECT_EQ(ref.next(), 0xE220A8397B1DCDAFULL);
}

TEST(SplitMix, MatchesReferenceSequence) {
    RefSplitMix ref{1234567};
    std::uint64_t x = 1234567;
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(splitmix64_step(x), ref.next());
        x += kSplitMixGamma;
    }
}

TEST(Fnv1a, PublishedVectors) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Xoshiro, MatchesReferenceImplementation) {
    for (std::uint64_t seed : {0ULL, 1ULL, 287577520ULL, 0xFFFFFFFFFFFFFFFFULL}) {
        RngStream rng(seed);
        RefXoshiro ref(seed);
        for (int i = 0; i < 1000; ++i) ASSERT_EQ(rng.next(), ref.next());
    }
}

TEST(DeriveSeed, IsDeterministic) {
    LevelCombo c{1, {{"n", LevelValue(10)}}};
    const auto key = StreamKey::replicate(c, 3);
    EXPECT_EQ(derive_seed(42, key), derive_seed(42, key));
    EXPECT_EQ(derive_seed(42, key), splitmix64_step(42 ^ fnv1a64(key.canonical_key)));
}

TEST(DeriveSeed, CanonicalKeyFormat) {
    LevelCombo c{1, {{"n", LevelValue(10)}, {"estimator", LevelValue("M")}, {"mu", LevelValue(3.0)}}};
    EXPECT_EQ(StreamKey::replicate(c, 2).canonical_key, R"("estimator"="M";"mu"=d:3.0;"n"=i:10;rep=2)");
    EXPECT_EQ(StreamKey::batch(c, {"n", "mu"}, 2, 1).canonical_key, R"("mu"=d:3.0;"n"=i:10;rep=2;block=1)");
}

TEST(DeriveSeed, PoissonGridSeedsAreDistinct) {
    const auto plan = build_plan(studies::poisson::levels(), studies::poisson::config());
    std::set<std::uint64_t> seeds;
    for (const auto& r : plan.replicates)
        seeds.insert(derive_seed(studies::poisson::kSeed, StreamKey::replicate(plan.combo(r.level_id), r.rep_id)));
    EXPECT_EQ(plan.replicates.size(), 600u);
    EXPECT_EQ(seeds.size(), 600u);
}

TEST(DeriveSeed, IndependentOfDeclarationOrder) {
    LevelSchema a, b;
    a.add("estimator", {"M", "V"}).add("n", {10, 100});
    b.add("n", {10, 100}).add("estimator", {"M", "V"});
    SimConfig cfg;
    cfg.num_sim = 3;
    const auto pa = build_plan(a, cfg), pb = build_plan(b, cfg);
    std::map<std::string, std::uint64_t> seeds_a;
    for (const auto& r : pa.replicates) {
        const auto key = StreamKey::replicate(pa.combo(r.level_id), r.rep_id);
        seeds_a[key.canonical_key] = derive_seed(9, key);
    }
    for (const auto& r : pb.replicates) {
        const auto key = StreamKey::replicate(pb.combo(r.level_id), r.rep_id);
        ASSERT_TRUE(seeds_a.count(key.canonical_key));
        EXPECT_EQ(seeds_a[key.canonical_key], derive_seed(9, key));
    }
    // level ids do differ: (M,10) then (V,10) vs (10,M) then (100,M)
    EXPECT_EQ(pa.combos[1].text("estimator"), "V");
    EXPECT_EQ(pb.combos[1].integer("n"), 100);
}

TEST(RngStream, ReplayReproducesDraws) {
    RngStream a(77), b(77);
    for (int i = 0; i < 50; ++i) {
        EXPECT_EQ(a.normal(), b.normal());
        EXPECT_EQ(a.poisson(45.0), b.poisson(45.0));
        EXPECT_EQ(a.beta(2.0, 3.0), b.beta(2.0, 3.0));
    }
}

TEST(RngStream, DegenerateNormal) {
    RngStream rng(5);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(rng.normal(3.0, 0.0), 3.0);
}

TEST(RngStream, RejectsBadParameters) {
    RngStream rng(5);
    EXPECT_THROW(rng.normal(0.0, -1.0), DistributionError);
    EXPECT_THROW(rng.poisson(0.0), DistributionError);
    EXPECT_THROW(rng.beta(0.0, 1.0), DistributionError);
    EXPECT_THROW(rng.below(0), DistributionError);
}

TEST(RngStream, UniformRange) {
    RngStream rng(11);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double v = rng.uniform_open();
        ASSERT_GT(v, 0.0);
        ASSERT_LT(v, 1.0);
        ASSERT_LT(rng.below(7), 7u);
    }
}

// 3 sigma CLT band: 20 +- 3 sqrt(20 / 1e5)
TEST(RngStream, PoissonMeanSmallRate) {
    RngStream rng(2024);
    const auto draws = rng.poisson(100000, 20.0);
    double mean = 0.0;
    for (auto d : draws) mean += static_cast<double>(d);
    mean /= static_cast<double>(draws.size());
    EXPECT_NEAR(mean, 20.0, 3.0 * std::sqrt(20.0 / 1e5));
}

TEST(RngStream, PoissonMomentsLargeRate) {
    RngStream rng(99);
    const double lambda = 250.0;
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = static_cast<double>(rng.poisson(lambda));
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    EXPECT_NEAR(mean, lambda, 3.0 * std::sqrt(lambda / n));
    // Var of the sample variance of a Poisson is about (2 lambda^2 + lambda) / n
    EXPECT_NEAR(var, lambda, 4.0 * std::sqrt((2.0 * lambda * lambda + lambda) / n));
}

TEST(RngStream, PoissonPmfSmallRate) {
    RngStream rng(3);
    const double lambda = 2.5;
    const int n = 200000;
    std::map<std::int64_t, int> counts;
    for (int i = 0; i < n; ++i) ++counts[rng.poisson(lambda)];
    double p = std::exp(-lambda);
    for (int k = 0; k <= 6; ++k) {
        if (k > 0) p *= lambda / k;
        EXPECT_NEAR(counts[k] / double(n), p, 4.0 * std::sqrt(p * (1 - p) / n)) << "k=" << k;
    }
}

TEST(RngStream, NormalMoments) {
    RngStream rng(8);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(1.5, 2.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    EXPECT_NEAR(mean, 1.5, 3.0 * 2.0 / std::sqrt(n));
    EXPECT_NEAR(var, 4.0, 4.0 * 4.0 * std::sqrt(2.0 / n));
}

TEST(RngStream, GammaAndBetaMeans) {
    RngStream rng(12);
    const int n = 100000;
    for (double shape : {0.5, 1.0, 3.7}) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += rng.gamma(shape, 2.0);
        // mean = shape * scale, var = shape * scale^2
        EXPECT_NEAR(sum / n, 2.0 * shape, 4.0 * std::sqrt(shape * 4.0 / n)) << "shape " << shape;
    }
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rng.beta(2.0, 5.0);
    const double var = 2.0 * 5.0 / (49.0 * 8.0);
    EXPECT_NEAR(sum / n, 2.0 / 7.0, 4.0 * std::sqrt(var / n));
}

TEST(RngStream, PermutationIsUniform) {
    RngStream rng(31);
    std::map<std::vector<std::size_t>, int> counts;
    const int n = 60000;
    for (int i = 0; i < n; ++i) ++counts[rng.permutation(3)];
    ASSERT_EQ(counts.size(), 6u);
    double chi2 = 0.0;
    for (const auto& [perm, c] : counts) chi2 += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
    EXPECT_LT(chi2, 20.5);  // chi-square(5) 0.999 quantile
}

TEST(RngStream, MvnormalNotPositiveDefinite) {
    RngStream rng(1);
    const std::vector<double> mu{0.0, 0.0};
    try {
        rng.mvnormal(mu, Matrix{{1, 2}, {2, 1}});
        FAIL() << "expected an error";
    } catch (const DistributionError& e) {
        EXPECT_NE(std::string(e.what()).find("not positive definite"), std::string::npos);
        EXPECT_EQ(std::string(e.what()), "'Sigma' is not positive definite");
    }
    EXPECT_THROW(rng.mvnormal(mu, Matrix{{1, 0.5}, {0.2, 1}}), DistributionError);
}

TEST(RngStream, MvnormalSingularAndCovariance) {
    RngStream rng(2);
    const std::vector<double> mu{1.0, -1.0};
    // Rank one: second coordinate is a copy of the first shifted by -2.
    for (int i = 0; i < 20; ++i) {
        const auto x = rng.mvnormal(mu, Matrix{{1, 1}, {1, 1}});
        EXPECT_NEAR(x[1] - x[0], -2.0, 1e-12);
    }
    const int n = 100000;
    double s01 = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto x = rng.mvnormal(mu, Matrix{{2, 0.6}, {0.6, 1}});
        s01 += (x[0] - 1.0) * (x[1] + 1.0);
    }
    EXPECT_NEAR(s01 / n, 0.6, 0.03);
}
