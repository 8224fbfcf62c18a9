#include "oudiff/moments.hpp"

#include <cmath>

#include "oudiff/error.hpp"

namespace oudiff {

namespace {

void check_time(double t, const char* who) {
    if (!(t >= 0.0) || !std::isfinite(t)) fail(Errc::invalid_argument, std::string(who) + ": t must be >= 0");
}

void require_closed_form(const ModelSpec& spec, const char* who) {
    spec.validate();
    if (spec.kind == CouplingKind::scheduled)
        fail(Errc::unsupported_shape, std::string(who) + ": scheduled coupling needs moments_ode");
}

// Q' = M Q + Q M^T + sigma_w2 I
Block2 lyapunov_rhs(const Block2& m, const Block2& q, double sigma_w2) {
    return m * q + q * m.transposed() + sigma_w2 * Block2::identity();
}

}  // namespace

double decay_integral(double tau, double t) {
    const double x = tau * t;
    if (std::abs(x) < 1e-8) return t * (1.0 - 0.5 * x + x * x / 6.0);
    return -std::expm1(-x) / tau;
}

double incomplete_gamma_p(int a, double x) {
    if (a < 1 || a > 3) fail(Errc::invalid_argument, "incomplete_gamma_p: a must be 1, 2 or 3");
    if (!(x >= 0.0)) fail(Errc::invalid_argument, "incomplete_gamma_p: x must be >= 0");
    if (x == 0.0) return 0.0;
    if (x < 2.0) {
        // x^a e^{-x} sum_n x^n / (a+n)!
        double fact = 1.0;
        for (int i = 2; i <= a; ++i) fact *= i;
        double term = 1.0 / fact;
        double sum = term;
        for (int n = 1; n < 60; ++n) {
            term *= x / (a + n);
            sum += term;
            if (term < 1e-18 * sum) break;
        }
        return std::pow(x, a) * std::exp(-x) * sum;
    }
    const double e = std::exp(-x);
    switch (a) {
        case 1: return -std::expm1(-x);
        case 2: return 1.0 - e * (1.0 + x);
        default: return 1.0 - e * (1.0 + x + 0.5 * x * x);
    }
}

Block2 propagator(const ModelSpec& spec, double t) {
    require_closed_form(spec, "propagator");
    check_time(t, "propagator");
    return mat_exp(spec.drift(), t);
}

Vec2 mean_at(const ModelSpec& spec, const Vec2& mu0, double t) { return propagator(spec, t) * mu0; }

Block2 transition_cov(const ModelSpec& spec, double t) {
    require_closed_form(spec, "transition_cov");
    check_time(t, "transition_cov");
    const double sw = spec.sigma_w2;
    const double b = spec.beta;
    const double g = spec.g;
    if (spec.kind == CouplingKind::symmetric) {
        const ModeDecomposition md = spectral_decompose(spec.drift());
        return ModeDecomposition::compose(sw * decay_integral(md.tau_plus, t),
                                          sw * decay_integral(md.tau_minus, t));
    }
    const double x = 2.0 * b * t;
    const double u = incomplete_gamma_p(1, x);
    const double k = incomplete_gamma_p(2, x);
    const double h = incomplete_gamma_p(3, x);
    const double q11 = sw * u / (2.0 * b);
    const double q12 = sw * g * k / (4.0 * b * b);
    const double q22 = sw * (u / (2.0 * b) + g * g * h / (4.0 * b * b * b));
    return Block2::symmetric(q11, q12, q22);
}

MomentState diffusion_kernel(const ModelSpec& spec, const MixtureInit& init, double t) {
    init.validate();
    MomentState st;
    st.t = t;
    st.propagator = propagator(spec, t);
    st.mean_gram = congruence(st.propagator, init.mean_gram());
    st.s = congruence(st.propagator, init.initial_cov());
    st.q = transition_cov(spec, t);
    st.c = st.s + st.q;
    return st;
}

ModeKernels mode_kernels(const ModelSpec& spec, const MixtureInit& init, double t) {
    require_closed_form(spec, "mode_kernels");
    check_time(t, "mode_kernels");
    if (spec.kind != CouplingKind::symmetric)
        fail(Errc::unsupported_shape, "mode_kernels: symmetric coupling required");
    if (!init.equal_variances()) fail(Errc::unsupported_shape, "mode_kernels: requires sigma_x = sigma_y");
    const ModeDecomposition md = spectral_decompose(spec.drift());
    auto c = [&](double tau) {
        return init.sigma2_x * std::exp(-tau * t) + spec.sigma_w2 * decay_integral(tau, t);
    };
    return {c(md.tau_plus), c(md.tau_minus)};
}

Block2 kernel_K(const ModelSpec& spec, const MixtureInit& init, double t) {
    if (spec.kind != CouplingKind::anisotropic)
        fail(Errc::unsupported_shape, "kernel_K: anisotropic coupling required");
    const Block2 c = diffusion_kernel(spec, init, t).c;
    const double b = spec.beta;
    const double g = spec.g;
    const double sw = spec.sigma_w2;
    const double c11 = c.a11, c12 = c.a12, c22 = c.a22;
    const double delta = c.det();
    if (!(delta > 0.0)) fail(Errc::not_positive_definite, "kernel_K: C(t) not positive definite");
    const double dd = b * b * delta - b * sw * (c11 + c22) + g * sw * c12 + sw * sw;
    const double scale = b * b * delta + b * sw * (c11 + c22) + std::abs(g * sw * c12) + sw * sw;
    if (std::abs(dd) <= 1e-14 * scale)
        throw Error(Errc::degenerate_drift, "kernel_K: D(t) = 0", t);
    const double n11 = sw * c22 - b * (c22 * c22 + c12 * c12) + g * c12 * c22;
    const double n12 = c12 * (b * (c11 + c22) - g * c12 - sw);
    const double n21 = b * c12 * (c11 + c22) - sw * c12 - g * c11 * c22;
    const double n22 = sw * c11 - b * (c11 * c11 + c12 * c12) + g * c11 * c12;
    const double inv = 1.0 / (delta * dd);
    return {n11 * inv, n12 * inv, n21 * inv, n22 * inv};
}

std::vector<MomentState> moments_ode(const ModelSpec& spec, const MixtureInit& init,
                                     std::span<const double> grid) {
    spec.validate();
    init.validate();
    if (grid.empty()) fail(Errc::invalid_argument, "moments_ode: empty grid");
    if (!(grid[0] >= 0.0)) fail(Errc::invalid_argument, "moments_ode: grid must start at t >= 0");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) fail(Errc::invalid_argument, "moments_ode: grid must be strictly increasing");

    const bool has_switch = spec.kind == CouplingKind::scheduled && spec.schedule.kind != ScheduleKind::constant;
    const double t_switch = spec.schedule.t0;
    const double sw = spec.sigma_w2;
    const Block2 sigma0 = init.initial_cov();
    const Block2 gram0 = init.mean_gram();

    Block2 phi = Block2::identity();
    Block2 q;

    auto rk4 = [&](double a, double b) {
        const double h = b - a;
        const Block2 m = spec.drift(0.5 * (a + b));
        const Block2 p1 = m * phi;
        const Block2 q1 = lyapunov_rhs(m, q, sw);
        const Block2 p2 = m * (phi + 0.5 * h * p1);
        const Block2 q2 = lyapunov_rhs(m, q + 0.5 * h * q1, sw);
        const Block2 p3 = m * (phi + 0.5 * h * p2);
        const Block2 q3 = lyapunov_rhs(m, q + 0.5 * h * q2, sw);
        const Block2 p4 = m * (phi + h * p3);
        const Block2 q4 = lyapunov_rhs(m, q + h * q3, sw);
        phi = phi + (h / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
        q = q + (h / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
    };
    auto advance = [&](double a, double b) {
        if (has_switch && t_switch > a && t_switch < b) {
            rk4(a, t_switch);
            rk4(t_switch, b);
        } else {
            rk4(a, b);
        }
    };

    std::vector<MomentState> out;
    out.reserve(grid.size());
    double prev = 0.0;
    for (double t : grid) {
        if (t > prev) advance(prev, t);
        prev = t;
        MomentState st;
        st.t = t;
        st.propagator = phi;
        st.mean_gram = congruence(phi, gram0);
        st.s = congruence(phi, sigma0);
        st.q = q;
        st.c = st.s + st.q;
        out.push_back(st);
    }
    return out;
}

Block2 stationary_cov(const ModelSpec& spec) {
    spec.validate();
    const double sw = spec.sigma_w2;
    const double b = spec.beta;
    if (spec.kind == CouplingKind::symmetric) {
        if (!spec.is_stable()) fail(Errc::invalid_argument, "stationary_cov: requires beta > |g|");
        const ModeDecomposition md = spectral_decompose(spec.drift());
        return ModeDecomposition::compose(sw / md.tau_plus, sw / md.tau_minus);
    }
    const double g = spec.kind == CouplingKind::scheduled ? coupling_value(spec.schedule, spec.schedule.horizon)
                                                          : spec.g;
    return Block2::symmetric(sw / (2.0 * b), sw * g / (4.0 * b * b),
                             sw * (1.0 / (2.0 * b) + g * g / (4.0 * b * b * b)));
}

}  // namespace oudiff
