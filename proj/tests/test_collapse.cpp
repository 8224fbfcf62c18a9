#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oudiff/collapse.hpp"
#include "oudiff/error.hpp"

using namespace oudiff;

namespace {

CollapseParams params(double g, double alpha = 1.0, double ratio = 1.0) {
    return CollapseParams::from_ratio(alpha, ratio, ModelSpec::symmetric(1.0, g, 2.0));
}

CollapseParams aniso_params(double g, double alpha = 1.0) {
    return CollapseParams::from_ratio(alpha, 1.0, ModelSpec::anisotropic(1.0, g, 1.0));
}

// independent bisection on (1 + r tp/(e^{tp t}-1)) (1 + r tm/(e^{tm t}-1)) = e^{4 alpha}
double product_root(double tp, double tm, double alpha, double r) {
    auto f = [&](double t) {
        return (1.0 + r * tp / (std::exp(tp * t) - 1.0)) * (1.0 + r * tm / (std::exp(tm * t) - 1.0)) -
               std::exp(4.0 * alpha);
    };
    double lo = 1e-6, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

const double kE2 = std::exp(2.0) - 1.0;

template <class F>
Errc code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::io_failure;
}

}  // namespace

TEST(Alpha, FromSamples) {
    EXPECT_NEAR(alpha_from_samples(std::exp(8.0), 4), 1.0, 1e-15);
    EXPECT_EQ(alpha_from_samples(1.0, 10), 0.0);
}

TEST(Chi, Examples) {
    const Chi c = chi(params(0.0), 0.5 * std::numbers::ln2);
    EXPECT_NEAR(c.plus, 2.0, 1e-14);
    EXPECT_NEAR(c.minus, 2.0, 1e-14);
    const Chi far = chi(params(0.3), 1e3);
    EXPECT_NEAR(far.plus, 0.0, 1e-200);
    EXPECT_NEAR(far.minus, 0.0, 1e-200);
    for (double g : {0.1, 0.5, 0.9}) {
        const Chi x = chi(params(g), 0.4);
        EXPECT_GT(x.plus, x.minus);
    }
    EXPECT_EQ(code_of([] { chi(params(0.0), 0.0); }), Errc::invalid_argument);
}

TEST(Chi, DecreasingInTime) {
    Chi prev = chi(params(0.4), 1e-4);
    for (int i = 1; i < 200; ++i) {
        const Chi c = chi(params(0.4), 1e-4 + 0.02 * i);
        EXPECT_LT(c.plus, prev.plus);
        EXPECT_LT(c.minus, prev.minus);
        prev = c;
    }
}

TEST(Cgf, NormalizationSlopeConvexity) {
    std::mt19937_64 eng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const CollapseParams p = params(0.95 * (2.0 * u(eng) - 1.0), 1.0, 0.2 + 2.0 * u(eng));
        const double t = 0.01 + 3.0 * u(eng);
        EXPECT_EQ(cgf(p, 0.0, t), 0.0);
        const double h = 1e-5;
        const double slope = (cgf(p, 1.0 + h, t) - cgf(p, 1.0 - h, t)) / (2.0 * h);
        EXPECT_NEAR(-slope, 0.5, 1e-6);
        for (double b : {0.0, 0.5, 1.0, 2.0}) {
            const double hh = 1e-3;
            EXPECT_GE(cgf(p, b + hh, t) - 2.0 * cgf(p, b, t) + cgf(p, b - hh, t), -1e-10);
        }
        EXPECT_NEAR(rate_at_saddle(p, t), -cgf(p, 1.0, t) - 0.5, 1e-15);
    }
}

TEST(Cgf, DomainError) {
    const CollapseParams p = params(0.0);
    const double t = 0.5 * std::numbers::ln2;  // chi = 2
    EXPECT_EQ(code_of([&] { cgf(p, -0.5, t); }), Errc::cgf_domain);
    EXPECT_NO_THROW(cgf(p, -0.49, t));
}

TEST(CollapseTime, DecoupledExample) {
    const double expect = 0.5 * std::log(1.0 + 2.0 / kE2);
    EXPECT_NEAR(expect, 0.13617073445591585, 1e-15);
    const CollapseResult r = collapse_time_symmetric(params(0.0));
    EXPECT_NEAR(r.t_c, expect, 1e-12);
    EXPECT_LE(std::abs(r.residual), 1e-12);
    EXPECT_EQ(r.kind, CollapseKind::joint_symmetric);
}

TEST(CollapseTime, CoupledMatchesIndependentBisection) {
    for (double g : {-0.7, -0.2, 0.25, 0.5, 0.9}) {
        const double ref = product_root(2.0 * (1.0 - g), 2.0 * (1.0 + g), 1.0, 1.0);
        EXPECT_NEAR(collapse_time_symmetric(params(g)).t_c, ref, 1e-11) << g;
    }
    EXPECT_NEAR(collapse_time_symmetric(params(0.5)).t_c, 0.136, 1e-3);
}

TEST(CollapseTime, BelowBoundAndNoCollapse) {
    EXPECT_NEAR(collapse_bound(params(0.0)), 1.0 / kE2, 1e-15);
    EXPECT_NEAR(collapse_bound(params(0.0)), 0.15651764274966565, 1e-15);
    for (int i = 0; i <= 90; ++i) {
        const CollapseParams p = params(0.01 * i);
        EXPECT_LE(collapse_time_symmetric(p).t_c, collapse_bound(p));
    }
    EXPECT_EQ(code_of([] { collapse_time_symmetric(params(0.0, 0.0)); }), Errc::no_collapse);
    EXPECT_EQ(code_of([] { collapse_time_mode(params(0.0, -1.0), Mode::plus); }), Errc::no_collapse);
}

TEST(CollapseTime, PerModeClosedForm) {
    const CollapseParams p0 = params(0.0);
    const double expect0 = 0.5 * std::log(1.0 + 2.0 / kE2);
    EXPECT_NEAR(collapse_time_mode(p0, Mode::plus).t_c, expect0, 1e-14);
    EXPECT_NEAR(collapse_time_mode(p0, Mode::minus).t_c, expect0, 1e-14);
    const CollapseParams p = params(0.5);
    const double tp = std::log(1.0 + 1.0 / kE2);
    const double tm = std::log(1.0 + 3.0 / kE2) / 3.0;
    EXPECT_NEAR(tp, 0.1454134579, 1e-10);
    EXPECT_NEAR(tm, 0.1283194080, 1e-10);
    const CollapseResult rp = collapse_time_mode(p, Mode::plus);
    const CollapseResult rm = collapse_time_mode(p, Mode::minus);
    EXPECT_NEAR(rp.t_c, tp, 1e-14);
    EXPECT_NEAR(rm.t_c, tm, 1e-14);
    EXPECT_EQ(rp.kind, CollapseKind::mode_plus);
    EXPECT_EQ(rm.kind, CollapseKind::mode_minus);
    for (double g : {0.1, 0.4, 0.8})
        EXPECT_GT(collapse_time_mode(params(g), Mode::plus).t_c, collapse_time_mode(params(g), Mode::minus).t_c);
}

TEST(CollapseTime, DeterminantRouteMatchesJoint) {
    for (double g : {0.0, 0.3, 0.6, 0.9}) {
        const CollapseParams p = params(g, 0.7, 1.3);
        EXPECT_NEAR(collapse_time_det(p).t_c, collapse_time_symmetric(p).t_c, 1e-10) << g;
    }
}

TEST(CollapseTime, AnisotropicRoutes) {
    const double expect0 = 0.5 * std::log(1.0 + 2.0 / kE2);
    EXPECT_NEAR(collapse_time_det(aniso_params(0.0)).t_c, expect0, 1e-11);
    EXPECT_NEAR(collapse_time_conditional(aniso_params(0.0)).t_c, expect0, 1e-11);
    const CollapseResult j = collapse_time_det(aniso_params(1.0));
    const CollapseResult c = collapse_time_conditional(aniso_params(1.0));
    EXPECT_EQ(j.kind, CollapseKind::joint_aniso);
    EXPECT_EQ(c.kind, CollapseKind::conditional_y_given_x);
    // frozen from an independent scalar implementation of the closed-form moments
    EXPECT_NEAR(j.t_c, 0.136120, 2e-6);
    EXPECT_NEAR(c.t_c, 0.136069, 2e-6);
    EXPECT_EQ(code_of([] { collapse_time_conditional(params(0.2)); }), Errc::unsupported_shape);
}
