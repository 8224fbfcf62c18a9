#include "oudiff/collapse.hpp"

#include <cmath>
#include <functional>

#include "oudiff/error.hpp"
#include "oudiff/moments.hpp"

namespace oudiff {

namespace {

void check_alpha(const CollapseParams& p) {
    if (!std::isfinite(p.alpha)) fail(Errc::invalid_argument, "collapse: alpha must be finite");
    if (!(p.alpha > 0.0)) fail(Errc::no_collapse, "collapse: alpha <= 0 gives no finite collapse time");
}

ModeDecomposition symmetric_modes(const CollapseParams& p) {
    p.spec.validate();
    p.init.validate();
    if (p.spec.kind != CouplingKind::symmetric) fail(Errc::unsupported_shape, "collapse: symmetric coupling required");
    if (!p.init.equal_variances()) fail(Errc::unsupported_shape, "collapse: requires sigma_x = sigma_y");
    if (!p.spec.is_stable()) fail(Errc::invalid_argument, "collapse: requires beta > |g|");
    if (!(p.spec.sigma_w2 > 0.0)) fail(Errc::invalid_argument, "collapse: sigma_w2 must be positive");
    return spectral_decompose(p.spec.drift());
}

double chi_mode(double ratio, double tau, double t) { return ratio * tau / std::expm1(tau * t); }

// root of a decreasing f on [lo, hi] with f(lo) > 0 > f(hi)
std::pair<double, double> bisect_decreasing(const std::function<double(double)>& f, double lo, double hi) {
    double best = lo, best_f = std::abs(f(lo));
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double v = f(mid);
        if (std::abs(v) < best_f) {
            best = mid;
            best_f = std::abs(v);
        }
        if (best_f <= 1e-13) break;
        if (v > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return {best, best_f};
}

// bracket [lo, hi] for a log-ratio criterion that diverges at 0 and decays to -alpha
std::pair<double, double> collapse_bracket(const CollapseParams& p, const std::function<double(double)>& f,
                                           const std::function<bool(double)>& defined) {
    double lo = 1e-12 / p.spec.beta;
    for (int i = 0; i < 30 && !defined(lo); ++i) lo *= 10.0;
    if (!defined(lo)) fail(Errc::singular_matrix, "collapse: Q(t) singular near t = 0");
    double hi = p.ratio() / std::expm1(2.0 * p.alpha) + 1.0 / p.spec.beta;
    for (int i = 0; i < 60 && f(hi) > 0.0; ++i) hi *= 2.0;
    if (!(f(lo) > 0.0) || !(f(hi) <= 0.0)) fail(Errc::no_collapse, "collapse: no sign change in bracket");
    return {lo, hi};
}

}  // namespace

CollapseParams CollapseParams::from_ratio(double alpha, double ratio, const ModelSpec& spec) {
    if (!(ratio > 0.0) || !std::isfinite(ratio)) fail(Errc::invalid_argument, "collapse: ratio must be positive");
    CollapseParams p;
    p.alpha = alpha;
    p.spec = spec;
    p.init = MixtureInit::modes(0.0, 0.0, ratio * spec.sigma_w2);
    return p;
}

double alpha_from_samples(double n, int d) {
    if (!(n >= 1.0) || d < 1) fail(Errc::invalid_argument, "alpha_from_samples: need n >= 1, d >= 1");
    return std::log(n) / (2.0 * d);
}

std::string_view to_string(CollapseKind kind) {
    switch (kind) {
        case CollapseKind::joint_symmetric: return "joint_symmetric";
        case CollapseKind::mode_plus: return "mode_plus";
        case CollapseKind::mode_minus: return "mode_minus";
        case CollapseKind::joint_aniso: return "joint_aniso";
        case CollapseKind::conditional_y_given_x: return "conditional_y_given_x";
    }
    return "unknown";
}

Chi chi(const CollapseParams& params, double t) {
    if (!(t > 0.0) || !std::isfinite(t)) fail(Errc::invalid_argument, "chi: t must be positive");
    const ModeDecomposition md = symmetric_modes(params);
    const double r = params.ratio();
    return {chi_mode(r, md.tau_plus, t), chi_mode(r, md.tau_minus, t)};
}

double cgf(const CollapseParams& params, double beta_rem, double t) {
    const Chi c = chi(params, t);
    const double ap = 1.0 + beta_rem * c.plus;
    const double am = 1.0 + beta_rem * c.minus;
    if (!(ap > 0.0 && am > 0.0)) fail(Errc::cgf_domain, "cgf: 1 + beta chi must be positive");
    return -0.25 * std::log(ap) - 0.25 * std::log(am) - 0.25 * beta_rem * (1.0 + c.plus) / ap -
           0.25 * beta_rem * (1.0 + c.minus) / am;
}

double rate_at_saddle(const CollapseParams& params, double t) { return -cgf(params, 1.0, t) - 0.5; }

CollapseResult collapse_time_symmetric(const CollapseParams& params) {
    check_alpha(params);
    const ModeDecomposition md = symmetric_modes(params);
    const double r = params.ratio();
    auto f = [&](double t) {
        return std::log1p(chi_mode(r, md.tau_plus, t)) + std::log1p(chi_mode(r, md.tau_minus, t)) -
               4.0 * params.alpha;
    };
    const double lo = 1e-12 / params.spec.beta;
    const double hi = collapse_bound(params) + 1.0 / params.spec.beta;
    auto [t, res] = bisect_decreasing(f, lo, hi);
    return {t, res, CollapseKind::joint_symmetric};
}

CollapseResult collapse_time_mode(const CollapseParams& params, Mode mode) {
    check_alpha(params);
    const ModeDecomposition md = symmetric_modes(params);
    const double tau = mode == Mode::plus ? md.tau_plus : md.tau_minus;
    const double r = params.ratio();
    const double t = std::log1p(r * tau / std::expm1(2.0 * params.alpha)) / tau;
    const double res = std::abs(std::log1p(chi_mode(r, tau, t)) - 2.0 * params.alpha);
    return {t, res, mode == Mode::plus ? CollapseKind::mode_plus : CollapseKind::mode_minus};
}

double collapse_bound(const CollapseParams& params) {
    check_alpha(params);
    return params.ratio() / std::expm1(2.0 * params.alpha);
}

CollapseResult collapse_time_det(const CollapseParams& params) {
    check_alpha(params);
    params.spec.validate();
    params.init.validate();
    if (params.spec.kind == CouplingKind::scheduled)
        fail(Errc::unsupported_shape, "collapse_time_det: scheduled coupling not supported");
    if (params.spec.kind == CouplingKind::symmetric && !params.spec.is_stable())
        fail(Errc::invalid_argument, "collapse: requires beta > |g|");
    auto defined = [&](double t) { return transition_cov(params.spec, t).det() > 0.0; };
    auto f = [&](double t) {
        const MomentState st = diffusion_kernel(params.spec, params.init, t);
        return 0.25 * (std::log(st.c.det()) - std::log(st.q.det())) - params.alpha;
    };
    auto [lo, hi] = collapse_bracket(params, f, defined);
    auto [t, res] = bisect_decreasing(f, lo, hi);
    const CollapseKind kind =
        params.spec.kind == CouplingKind::symmetric ? CollapseKind::joint_symmetric : CollapseKind::joint_aniso;
    return {t, res, kind};
}

CollapseResult collapse_time_conditional(const CollapseParams& params) {
    check_alpha(params);
    params.spec.validate();
    params.init.validate();
    if (params.spec.kind != CouplingKind::anisotropic)
        fail(Errc::unsupported_shape, "collapse_time_conditional: anisotropic coupling required");
    auto defined = [&](double t) {
        const Block2 q = transition_cov(params.spec, t);
        return q.a11 > 0.0 && q.det() > 0.0;
    };
    auto f = [&](double t) {
        const MomentState st = diffusion_kernel(params.spec, params.init, t);
        const double cy = schur_conditional(st.c).c_y_given_x;
        const double qy = schur_conditional(st.q).c_y_given_x;
        return 0.5 * (std::log(cy) - std::log(qy)) - params.alpha;
    };
    auto [lo, hi] = collapse_bracket(params, f, defined);
    auto [t, res] = bisect_decreasing(f, lo, hi);
    return {t, res, CollapseKind::conditional_y_given_x};
}

}  // namespace oudiff
