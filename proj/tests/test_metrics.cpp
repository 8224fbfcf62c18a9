#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oudiff/conditional.hpp"
#include "oudiff/error.hpp"
#include "oudiff/metrics.hpp"
#include "oudiff/moments.hpp"
#include "oudiff/rng.hpp"
#include "oudiff/sampler.hpp"

using namespace oudiff;

TEST(Wilson, Examples) {
    const Interval mid = wilson_interval(50, 100);
    EXPECT_NEAR(mid.low, 0.4038315, 1e-6);
    EXPECT_NEAR(mid.high, 0.5961685, 1e-6);
    EXPECT_EQ(wilson_interval(0, 20).low, 0.0);
    EXPECT_EQ(wilson_interval(20, 20).high, 1.0);
    EXPECT_THROW(wilson_interval(3, 2), Error);
    EXPECT_THROW(wilson_interval(0, 0), Error);
}

TEST(Wilson, ContainsEstimateAndNests) {
    for (std::size_t n : {1u, 7u, 100u, 640u})
        for (std::size_t k = 0; k <= n; k += std::max<std::size_t>(1, n / 13)) {
            const Interval a = wilson_interval(k, n, 0.95), b = wilson_interval(k, n, 0.99);
            const double p = double(k) / n;
            EXPECT_LE(a.low, p);
            EXPECT_GE(a.high, p);
            EXPECT_LE(b.low, a.low);
            EXPECT_GE(b.high, a.high);
            EXPECT_GE(a.low, 0.0);
            EXPECT_LE(a.high, 1.0);
        }
}

TEST(Wilson, WidthScalesWithBatch) {
    const double w1 = [] { auto i = wilson_interval(300, 640); return i.high - i.low; }();
    const double w4 = [] { auto i = wilson_interval(1200, 2560); return i.high - i.low; }();
    EXPECT_NEAR(w1 / w4, 2.0, 0.2);
}

TEST(ExcessAgreement, Endpoints) {
    EXPECT_EQ(excess_agreement(0.6, 0.6), 0.0);
    EXPECT_EQ(excess_agreement(1.0, 0.6), 1.0);
    EXPECT_LT(excess_agreement(0.7, 0.6), excess_agreement(0.8, 0.6));
    EXPECT_THROW(excess_agreement(0.5, 1.0), Error);
}

TEST(Cosine, Examples) {
    const std::vector<std::vector<std::vector<double>>> same{{{1, 2}, {1, 2}, {1, 2}}, {{0, 3}, {0, 3}, {0, 3}}};
    const CosineCurve c = cosine_to_final(same);
    for (double v : c.values) EXPECT_NEAR(v, 1.0, 1e-15);
    const std::vector<std::vector<std::vector<double>>> perp{{{0, 1}, {1, 0}}};
    EXPECT_NEAR(cosine_to_final(perp).values[0], 0.0, 1e-15);
}

TEST(Cosine, SweepIncreasesAndZeroExcluded) {
    std::vector<std::vector<double>> path;
    for (int k = 0; k <= 10; ++k) {
        const double a = 0.5 * std::numbers::pi * (1.0 - k / 10.0);
        path.push_back({std::cos(a), std::sin(a)});
    }
    const CosineCurve c = cosine_to_final({path});
    for (std::size_t k = 1; k < c.values.size(); ++k) EXPECT_GT(c.values[k], c.values[k - 1]);
    const CosineCurve z = cosine_to_final({{{0, 0}, {1, 0}}, {{1, 1}, {1, 0}}});
    EXPECT_EQ(z.counts[0], 1u);
    EXPECT_NEAR(z.values[0], std::sqrt(0.5), 1e-15);
    EXPECT_EQ(z.counts[1], 2u);
}

TEST(Crossing, StepCurvesRecoverOffsets) {
    std::vector<double> times;
    for (int i = 0; i <= 20; ++i) times.push_back(0.1 * i);
    auto step = [&](double at) {
        std::vector<double> c;
        for (double t : times) c.push_back(t <= at + 1e-12 ? 1.0 : 0.0);
        return c;
    };
    const auto cu = step(1.2), cv = step(0.7);
    EXPECT_NEAR(*crossing_time(times, cu, 0.9), 1.2, 1e-12);
    EXPECT_NEAR(*sync_gap(times, cu, cv, 0.9), 0.7 - 1.2, 1e-12);
    EXPECT_EQ(*sync_gap(times, cu, cu, 0.9), 0.0);
    EXPECT_FALSE(crossing_time(times, std::vector<double>(times.size(), 0.5), 0.9).has_value());
    EXPECT_FALSE(sync_gap(times, cu, std::vector<double>(times.size(), 0.5), 0.9).has_value());
}

TEST(Crossing, LinearInterpolationExact) {
    // piecewise linear, decreasing in t: c(t) = 1 - t/2
    std::vector<double> times{0.0, 0.5, 1.0, 1.5, 2.0};
    std::vector<double> c;
    for (double t : times) c.push_back(1.0 - 0.5 * t);
    for (double tau : {0.9, 0.75, 0.6, 0.55})
        EXPECT_NEAR(*crossing_time(times, c, tau, Interpolation::linear), 2.0 * (1.0 - tau), 1e-12);
    // grid order does not matter
    std::vector<double> rt(times.rbegin(), times.rend()), rc(c.rbegin(), c.rend());
    EXPECT_NEAR(*crossing_time(rt, rc, 0.6, Interpolation::linear), 0.8, 1e-12);
}

TEST(Ghosting, Examples) {
    const std::vector<double> one{1, 1, 1}, zero{0, 0, 0}, mix{0.2, 0.5, 1.0};
    for (double v : ghosting_index(mix, mix, mix)) EXPECT_EQ(v, 0.0);
    for (double v : ghosting_index(one, zero, zero)) EXPECT_EQ(v, 2.0);
    EXPECT_LT(std::abs(ghosting_index(mix, mix, one).back()), 1e-12);
    EXPECT_THROW(ghosting_index(one, zero, std::vector<double>{1}), Error);
}

namespace {

struct ToySetup {
    MixtureInit init = MixtureInit::angled(0.25, 0.25, 0.7, 1.0, 8);
    ModelSpec spec = ModelSpec::anisotropic(1.0, 0.0, 2.0, 8);
    MeanVectors mv = materialize_means(init);
    MomentState m0 = diffusion_kernel(spec, init, 0.0);
};

}  // namespace

TEST(ToyMetrics, ExactMeansGiveFullAccuracy) {
    ToySetup s;
    std::vector<ConditionalPair> pairs;
    for (int sign : {1, -1}) {
        ConditionalPair p;
        p.label = sign;
        for (int i = 0; i < 8; ++i) {
            p.x0.push_back(sign * s.mv.x[i]);
            p.y0.push_back(sign * s.mv.y[i]);
        }
        pairs.push_back(p);
    }
    const ToyMetrics m = toy_metrics(pairs, s.mv, s.m0);
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_EQ(m.mse, 0.0);
    EXPECT_EQ(m.n, 2u);
    EXPECT_THROW(toy_metrics({}, s.mv, s.m0), Error);
}

TEST(ToyMetrics, TrueConditionalNllIsEntropy) {
    // y0 drawn from P0(y | x0): mean NLL estimates the conditional entropy
    ToySetup s;
    const int n = 20000, d = 8;
    Rng rng(3);
    std::vector<ConditionalPair> pairs;
    double ref = 0.0, ref2 = 0.0;
    for (int k = 0; k < n; ++k) {
        ConditionalPair p;
        p.label = rng.sign();
        for (int i = 0; i < d; ++i) {
            p.x0.push_back(p.label * s.mv.x[i] + rng.normal());
            p.y0.push_back(p.label * s.mv.y[i] + rng.normal());
        }
        const double l = -conditional_log_density(s.m0, s.mv, p.x0, p.y0);
        ref += l;
        ref2 += l * l;
        pairs.push_back(std::move(p));
    }
    const ToyMetrics m = toy_metrics(pairs, s.mv, s.m0);
    const double mean = ref / n, sd = std::sqrt(ref2 / n - mean * mean);
    EXPECT_NEAR(m.nll, mean, 1e-9);
    // a two-component mixture lies between the component entropy and that plus ln 2
    const double gauss = 0.5 * d * std::log(2.0 * std::numbers::pi * std::numbers::e);
    const double mc = 4.0 * sd / std::sqrt(double(n));
    EXPECT_GE(m.nll, gauss - mc);
    EXPECT_LE(m.nll, gauss + std::numbers::ln2 + mc);
    EXPECT_GE(m.mse, 0.0);
    EXPECT_GE(m.accuracy, 0.0);
    EXPECT_LE(m.accuracy, 1.0);
}

TEST(ToyMetrics, RandomSignsAtChance) {
    ToySetup s;
    const int n = 10000, d = 8;
    Rng rng(4);
    std::vector<ConditionalPair> pairs;
    for (int k = 0; k < n; ++k) {
        ConditionalPair p;
        const int sx = rng.sign(), sy = rng.sign();
        for (int i = 0; i < d; ++i) {
            p.x0.push_back(sx * s.mv.x[i] + rng.normal());
            p.y0.push_back(sy * s.mv.y[i] + rng.normal());
        }
        pairs.push_back(std::move(p));
    }
    EXPECT_NEAR(toy_metrics(pairs, s.mv, s.m0).accuracy, 0.5, 4.0 * 0.5 / std::sqrt(double(n)));
}
