#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <vector>

#include "oudiff/error.hpp"
#include "oudiff/moments.hpp"

using namespace oudiff;

namespace {

// e^{Ms} written out by hand, independent of mat_exp
Block2 explicit_exp(const ModelSpec& spec, double s) {
    const double e = std::exp(-spec.beta * s);
    if (spec.kind == CouplingKind::symmetric) {
        const double ch = std::cosh(spec.g * s), sh = std::sinh(spec.g * s);
        return {e * ch, e * sh, e * sh, e * ch};
    }
    return {e, 0.0, e * spec.g * s, e};
}

Block2 quadrature_q(const ModelSpec& spec, double t) {
    using boost::math::quadrature::gauss_kronrod;
    auto entry = [&](int which) {
        auto f = [&, which](double s) {
            const Block2 e = explicit_exp(spec, s);
            const Block2 v = spec.sigma_w2 * (e * e.transposed());
            return which == 0 ? v.a11 : which == 1 ? v.a12 : v.a22;
        };
        return gauss_kronrod<double, 61>::integrate(f, 0.0, t, 20, 1e-15);
    };
    return Block2::symmetric(entry(0), entry(1), entry(2));
}

// dense RK4 on C' = MC + CM^T + sigma_w2 I from Sigma0
Block2 lyapunov_rk4(const ModelSpec& spec, const Block2& c0, double t, int steps = 4000) {
    const Block2 m = spec.drift();
    auto rhs = [&](const Block2& c) { return m * c + c * m.transposed() + spec.sigma_w2 * Block2::identity(); };
    Block2 c = c0;
    const double h = t / steps;
    for (int i = 0; i < steps; ++i) {
        const Block2 k1 = rhs(c);
        const Block2 k2 = rhs(c + 0.5 * h * k1);
        const Block2 k3 = rhs(c + 0.5 * h * k2);
        const Block2 k4 = rhs(c + h * k3);
        c = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return c;
}

std::vector<double> uniform_grid(double T, int n) {
    std::vector<double> g(n + 1);
    for (int k = 0; k <= n; ++k) g[k] = T * k / n;
    return g;
}

}  // namespace

TEST(IncompleteGamma, SeriesMatchesClosedFormAcrossSwitch) {
    for (int a = 1; a <= 3; ++a) {
        const double below = incomplete_gamma_p(a, std::nextafter(2.0, 0.0));
        const double above = incomplete_gamma_p(a, 2.0);
        EXPECT_NEAR(below, above, 1e-14);
    }
    EXPECT_NEAR(incomplete_gamma_p(3, 1e-3), 1e-9 / 6.0 * std::exp(-1e-3) * (1 + 1e-3 / 4 + 1e-6 / 20), 1e-20);
    EXPECT_NEAR(incomplete_gamma_p(1, 50.0), 1.0, 1e-15);
}

TEST(MeanAt, Examples) {
    const Vec2 mu{0.3, -0.4};
    const Vec2 m0 = mean_at(ModelSpec::symmetric(1.0, 0.5, 2.0), mu, 0.0);
    EXPECT_DOUBLE_EQ(m0.x, mu.x);
    EXPECT_DOUBLE_EQ(m0.y, mu.y);
    const Vec2 a = mean_at(ModelSpec::anisotropic(1.0, 1.0, 2.0), {1.0, 0.0}, 1.0);
    EXPECT_NEAR(a.x, std::exp(-1.0), 1e-15);
    EXPECT_NEAR(a.y, std::exp(-1.0), 1e-15);
    const double r = 1.0 / std::sqrt(2.0);
    for (double t : {0.3, 1.0, 4.0}) {
        const Vec2 p = mean_at(ModelSpec::symmetric(1.0, 0.5, 2.0), {r, r}, t);
        EXPECT_NEAR(p.x, r * std::exp(-0.5 * t), 1e-15);
        EXPECT_NEAR(p.y, r * std::exp(-0.5 * t), 1e-15);
    }
    EXPECT_THROW(mean_at(ModelSpec::symmetric(1.0, 0.5, 2.0), mu, -1.0), Error);
}

TEST(TransitionCov, ZeroAtOriginAndLimits) {
    EXPECT_EQ(transition_cov(ModelSpec::symmetric(1.0, 0.5, 2.0), 0.0).max_abs(), 0.0);
    EXPECT_EQ(transition_cov(ModelSpec::anisotropic(1.0, 0.5, 2.0), 0.0).max_abs(), 0.0);
    const Block2 q = transition_cov(ModelSpec::anisotropic(1.0, 1.0, 1.0), 60.0);
    EXPECT_NEAR(q.a11, 0.5, 1e-14);
    EXPECT_NEAR(q.a12, 0.25, 1e-14);
    EXPECT_NEAR(q.a22, 0.75, 1e-14);
    EXPECT_LT(max_abs_diff(stationary_cov(ModelSpec::anisotropic(1.0, 1.0, 1.0)), q), 1e-14);
}

TEST(TransitionCov, MatchesQuadrature) {
    for (double beta : {0.5, 1.0, 2.0})
        for (double gf : {-0.8, 0.0, 0.3, 0.9})
            for (double t : {1e-3, 0.2, 1.0, 3.0}) {
                const ModelSpec s = ModelSpec::symmetric(beta, gf * beta, 1.7);
                const ModelSpec a = ModelSpec::anisotropic(beta, 2.0 * gf, 1.7);
                EXPECT_LT(max_abs_diff(transition_cov(s, t), quadrature_q(s, t)), 1e-8);
                EXPECT_LT(max_abs_diff(transition_cov(a, t), quadrature_q(a, t)), 1e-8);
            }
}

TEST(TransitionCov, MonotoneAccumulation) {
    for (const ModelSpec& s : {ModelSpec::symmetric(1.0, 0.6, 2.0), ModelSpec::anisotropic(1.0, 1.5, 2.0)}) {
        Block2 prev = transition_cov(s, 0.0);
        for (int k = 1; k <= 50; ++k) {
            const Block2 q = transition_cov(s, 0.1 * k);
            const Block2 dq = q - prev;
            EXPECT_GE(dq.a11, 0.0);
            EXPECT_GE(dq.a22, 0.0);
            EXPECT_GE(dq.det(), -1e-15);
            prev = q;
        }
    }
}

TEST(DiffusionKernel, InitialAndVariancePreserving) {
    const MixtureInit init = MixtureInit::modes(1.0, 0.5, 1.0);
    const MomentState s0 = diffusion_kernel(ModelSpec::anisotropic(1.0, 0.7, 2.0), init, 0.0);
    EXPECT_LT(max_abs_diff(s0.c, init.initial_cov()), 1e-15);
    for (double t : {0.0, 0.1, 1.0, 5.0}) {
        const Block2 c = diffusion_kernel(ModelSpec::symmetric(1.0, 0.0, 2.0), init, t).c;
        EXPECT_NEAR(c.a11, 1.0, 1e-15);
        EXPECT_NEAR(c.a22, 1.0, 1e-15);
        EXPECT_NEAR(c.a12, 0.0, 1e-15);
    }
}

TEST(DiffusionKernel, MatchesLyapunovRk4) {
    MixtureInit init = MixtureInit::angled(1.0, 0.5, 1.0, 0.7);
    init.sigma2_y = 1.4;
    for (double g : {-1.0, 0.0, 0.5, 2.0})
        for (double t : {0.1, 0.8, 2.5}) {
            const ModelSpec a = ModelSpec::anisotropic(1.2, g, 1.5);
            EXPECT_LT(max_abs_diff(diffusion_kernel(a, init, t).c, lyapunov_rk4(a, init.initial_cov(), t)), 1e-8);
        }
}

TEST(DiffusionKernel, SymmetricCommutesWithModes) {
    const MixtureInit init = MixtureInit::modes(1.0, 0.0, 0.8);
    const ModelSpec s = ModelSpec::symmetric(1.0, 0.6, 2.0);
    for (double t : {0.0, 0.3, 2.0}) {
        const Block2 c = diffusion_kernel(s, init, t).c;
        const Block2 off = ModeDecomposition::projector_plus() * c * ModeDecomposition::projector_minus();
        EXPECT_LT(off.max_abs(), 1e-12);
    }
}

TEST(ModeKernels, Examples) {
    const MixtureInit init = MixtureInit::modes(1.0, 0.0, 1.0);
    const ModelSpec s = ModelSpec::symmetric(1.0, 0.5, 2.0);
    const ModeKernels c0 = mode_kernels(s, init, 0.0);
    EXPECT_DOUBLE_EQ(c0.c_plus, 1.0);
    EXPECT_DOUBLE_EQ(c0.c_minus, 1.0);
    EXPECT_NEAR(mode_kernels(s, init, 1.0).c_plus, 2.0 - std::exp(-1.0), 1e-14);
    const ModeKernels inf = mode_kernels(s, init, 80.0);
    EXPECT_NEAR(inf.c_plus, 2.0, 1e-12);
    EXPECT_NEAR(inf.c_minus, 2.0 / 3.0, 1e-12);
    const Block2 c = diffusion_kernel(s, init, 1.3).c;
    const ModeKernels mk = mode_kernels(s, init, 1.3);
    EXPECT_LT(max_abs_diff(c, ModeDecomposition::compose(mk.c_plus, mk.c_minus)), 1e-14);
}

TEST(ModeKernels, RejectsUnsupported) {
    MixtureInit init = MixtureInit::modes(1.0, 0.0, 1.0);
    EXPECT_THROW(mode_kernels(ModelSpec::anisotropic(1.0, 0.5, 2.0), init, 1.0), Error);
    init.sigma2_y = 2.0;
    try {
        mode_kernels(ModelSpec::symmetric(1.0, 0.5, 2.0), init, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::unsupported_shape);
    }
}

TEST(KernelK, MatchesBlockComposition) {
    const MixtureInit init = MixtureInit::angled(1.0, 1.0, 0.4, 1.0);
    for (double g : {-1.5, -0.3, 0.0, 0.8, 1.7})
        for (double t : {0.0, 0.05, 0.7, 3.0}) {
            const ModelSpec a = ModelSpec::anisotropic(1.0, g, 2.0);
            const Block2 c = diffusion_kernel(a, init, t).c;
            const Block2 ci = block_inverse(c);
            const Block2 direct = ci * block_inverse(a.drift() + a.sigma_w2 * ci) * ci;
            const Block2 k = kernel_K(a, init, t);
            EXPECT_LT(max_abs_diff(k, direct), 1e-10 * direct.max_abs());
        }
}

TEST(KernelK, DiagonalWithoutCoupling) {
    const Block2 k = kernel_K(ModelSpec::anisotropic(1.0, 0.0, 2.0), MixtureInit::angled(1, 1, 0, 1.0), 0.5);
    EXPECT_EQ(k.a12, 0.0);
    EXPECT_EQ(k.a21, 0.0);
}

TEST(KernelK, ReproducesKappaZeroFormula) {
    const MixtureInit init = MixtureInit::angled(1.0, 1.0, 0.0, 1.0);
    for (double g : {0.0, 0.5, 1.2}) {
        const ModelSpec a = ModelSpec::anisotropic(1.0, g, 2.0);
        const double k0 = a.sigma_w2 * frobenius_dot(kernel_K(a, init, 0.0), init.mean_gram());
        EXPECT_NEAR(k0, 4.0 - 2.0 * g, 1e-12);
    }
}

TEST(MomentsOde, ConstantScheduleMatchesClosedForm) {
    const MixtureInit init = MixtureInit::angled(0.09, 0.09, 1.0, 1.0, 4);
    const std::vector<double> grid = uniform_grid(2.0, 800);
    const ScheduleSpec sched{ScheduleKind::constant, 0.7, 1.0, 2.0};
    const auto states = moments_ode(ModelSpec::scheduled(1.0, sched, 2.0), init, grid);
    const ModelSpec a = ModelSpec::anisotropic(1.0, 0.7, 2.0);
    for (std::size_t k = 0; k < grid.size(); k += 40) {
        const MomentState ref = diffusion_kernel(a, init, grid[k]);
        EXPECT_LT(max_abs_diff(states[k].c, ref.c), 1e-8);
        EXPECT_LT(max_abs_diff(states[k].q, ref.q), 1e-8);
        EXPECT_LT(max_abs_diff(states[k].propagator, ref.propagator), 1e-8);
        EXPECT_LT(max_abs_diff(states[k].mean_gram, ref.mean_gram), 1e-8);
    }
}

TEST(MomentsOde, ZeroScheduleDecouples) {
    const ScheduleSpec sched{ScheduleKind::constant, 0.0, 1.0, 2.0};
    const auto states = moments_ode(ModelSpec::scheduled(1.0, sched, 2.0), MixtureInit::modes(1, 0, 1), uniform_grid(2.0, 100));
    for (const MomentState& s : states) {
        EXPECT_EQ(s.q.a12, 0.0);
        EXPECT_EQ(s.c.a12, 0.0);
    }
}

TEST(MomentsOde, LateScheduleMatchesPiecewiseClosedForm) {
    const MixtureInit init = MixtureInit::angled(1.0, 1.0, 0.3, 1.0);
    const ScheduleSpec sched{ScheduleKind::late, 0.5, 1.0, 2.0};
    const std::vector<double> grid = uniform_grid(2.0, 800);
    const auto states = moments_ode(ModelSpec::scheduled(1.0, sched, 2.0), init, grid);
    const ModelSpec on = ModelSpec::anisotropic(1.0, 0.5, 2.0);
    const ModelSpec off = ModelSpec::anisotropic(1.0, 0.0, 2.0);
    const Block2 c_switch = diffusion_kernel(on, init, 1.0).c;
    for (std::size_t k = 0; k < grid.size(); k += 20) {
        const double t = grid[k];
        Block2 ref;
        if (t <= 1.0) {
            ref = diffusion_kernel(on, init, t).c;
        } else {
            const Block2 e = explicit_exp(off, t - 1.0);
            ref = e * c_switch * e.transposed() + transition_cov(off, t - 1.0);
        }
        EXPECT_LT(max_abs_diff(states[k].c, ref), 1e-8) << "t=" << t;
    }
}

TEST(MomentsOde, SplitsStepsAtSwitch) {
    // a grid that does not contain t0 still tracks the piecewise solution
    const MixtureInit init = MixtureInit::angled(1.0, 1.0, 0.0, 1.0);
    const ScheduleSpec sched{ScheduleKind::early, 1.0, 0.9995, 2.0};
    const std::vector<double> grid = uniform_grid(2.0, 800);
    const auto states = moments_ode(ModelSpec::scheduled(1.0, sched, 2.0), init, grid);
    const ModelSpec off = ModelSpec::anisotropic(1.0, 0.0, 2.0);
    const ModelSpec on = ModelSpec::anisotropic(1.0, 1.0, 2.0);
    const Block2 c_switch = diffusion_kernel(off, init, 0.9995).c;
    const Block2 e = explicit_exp(on, 1.0005);
    const Block2 ref = e * c_switch * e.transposed() + transition_cov(on, 1.0005);
    EXPECT_LT(max_abs_diff(states.back().c, ref), 1e-8);
}

TEST(MomentsOde, RejectsNonMonotoneGrid) {
    const std::vector<double> bad{0.0, 0.5, 0.4};
    try {
        moments_ode(ModelSpec::anisotropic(1.0, 0.5, 2.0), MixtureInit::modes(1, 0, 1), bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::invalid_argument);
    }
}
