#include "oudiff/conditional.hpp"

#include <cmath>
#include <numbers>

#include "oudiff/error.hpp"
#include "oudiff/parallel.hpp"

namespace oudiff {

namespace {

struct CondGeometry {
    double c11;
    double gain;
    double cyx;
    Block2 e;
};

CondGeometry geometry(const MomentState& m) {
    if (!(m.c.a11 > 0.0)) fail(Errc::not_positive_definite, "conditional_score: C11 <= 0");
    const SchurConditional sc = schur_conditional(m.c);
    return {m.c.a11, sc.gain, sc.c_y_given_x, m.propagator};
}

// logit between the two components given x and y, plus a = mu_y - gain mu_x
double component_logit(const CondGeometry& g, const MeanVectors& mv, std::span<const double> x,
                       std::span<const double> y, std::vector<double>* a_out) {
    const std::size_t d = x.size();
    double lx = 0.0, ab = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double mx = g.e.a11 * mv.x[i] + g.e.a12 * mv.y[i];
        const double my = g.e.a21 * mv.x[i] + g.e.a22 * mv.y[i];
        const double a = my - g.gain * mx;
        const double b = g.gain * x[i] - y[i];
        lx += mx * x[i];
        ab += a * b;
        if (a_out) (*a_out)[i] = a;
    }
    return 2.0 * lx / g.c11 - 2.0 * ab / g.cyx;
}

void check_sizes(const MeanVectors& mv, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || mv.x.size() != x.size() || mv.y.size() != x.size())
        fail(Errc::invalid_argument, "conditional_score: dimension mismatch");
}

}  // namespace

void conditional_score(const MomentState& moments, const MeanVectors& means, std::span<const double> x,
                       std::span<const double> y, std::span<double> out) {
    check_sizes(means, x, y);
    const CondGeometry g = geometry(moments);
    std::vector<double> a(x.size());
    const double l = component_logit(g, means, x, y, &a);
    const double th = std::tanh(0.5 * l);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (th * a[i] + g.gain * x[i] - y[i]) / g.cyx;
}

std::vector<double> conditional_score(const MomentState& moments, const MeanVectors& means,
                                      std::span<const double> x, std::span<const double> y) {
    std::vector<double> out(x.size());
    conditional_score(moments, means, x, y, out);
    return out;
}

double conditional_log_density(const MomentState& moments, const MeanVectors& means, std::span<const double> x,
                               std::span<const double> y) {
    check_sizes(means, x, y);
    const CondGeometry g = geometry(moments);
    const std::size_t d = x.size();
    // log sum_k w_k N(y; gain x + s_k a, cyx), w_k from the x-marginal
    double lx = 0.0, dp = 0.0, dm = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double mx = g.e.a11 * means.x[i] + g.e.a12 * means.y[i];
        const double my = g.e.a21 * means.x[i] + g.e.a22 * means.y[i];
        const double a = my - g.gain * mx;
        const double rp = y[i] - g.gain * x[i] - a;
        const double rm = y[i] - g.gain * x[i] + a;
        lx += mx * x[i];
        dp += rp * rp;
        dm += rm * rm;
    }
    const double ell = 2.0 * lx / g.c11;
    // log w_plus = -log(1 + e^{-ell}), log w_minus = -log(1 + e^{ell})
    auto log_sigmoid = [](double v) { return v >= 0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v)); };
    const double lp = log_sigmoid(ell) - 0.5 * dp / g.cyx;
    const double lm = log_sigmoid(-ell) - 0.5 * dm / g.cyx;
    const double mx = std::max(lp, lm);
    return mx + std::log(std::exp(lp - mx) + std::exp(lm - mx)) -
           0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * g.cyx);
}

void ToyConfig::validate() const {
    require(dim >= 2, "toy: dim must be >= 2");
    require(std::isfinite(beta) && beta > 0.0, "toy: beta must be positive");
    require(std::isfinite(sigma_w2) && sigma_w2 > 0.0, "toy: sigma_w2 must be positive");
    require(std::isfinite(horizon) && horizon > 0.0, "toy: horizon must be positive");
    require(steps >= 1, "toy: steps must be >= 1");
    require(std::isfinite(sigma2) && sigma2 > 0.0, "toy: sigma2 must be positive");
    require(std::isfinite(m) && m >= 0.0, "toy: m must be >= 0");
    require(theta >= 0.0 && theta <= std::numbers::pi, "toy: theta must lie in [0, pi]");
    require(trials >= 1, "toy: trials must be >= 1");
    require(schedule.horizon == horizon, "toy: schedule horizon must equal the sampler horizon");
    schedule.validate();
}

ModelSpec ToyConfig::model() const { return ModelSpec::scheduled(beta, schedule, sigma_w2, dim); }

MixtureInit ToyConfig::mixture() const { return MixtureInit::angled(m * m, m * m, theta, sigma2, dim); }

std::vector<ConditionalPair> conditional_reverse_sample(const ToyConfig& config, int jobs) {
    config.validate();
    const ModelSpec spec = config.model();
    const MixtureInit init = config.mixture();
    const MeanVectors means = materialize_means(init);
    const int d = config.dim;
    const int n = config.steps;
    const double h = config.horizon / n;

    std::vector<double> grid(n + 1);
    for (int k = 0; k <= n; ++k) grid[k] = config.horizon * k / n;
    const std::vector<MomentState> moments = moments_ode(spec, init, grid);
    std::vector<double> g_at(n + 1);
    for (int k = 0; k <= n; ++k) g_at[k] = coupling_value(config.schedule, grid[k]);

    // exact X transition over one step
    const double decay = std::exp(-config.beta * h);
    const double x_sd = std::sqrt(config.sigma_w2 * decay_integral(2.0 * config.beta, h));
    // stationary conditional of y given x for the coupling in force at T
    const SchurConditional stat = schur_conditional(stationary_cov(spec));
    const double y_sd = std::sqrt(stat.c_y_given_x);
    const double amp = std::sqrt(config.sigma_w2 * h);
    const double sx = std::sqrt(config.sigma2);

    std::vector<ConditionalPair> out(config.trials);
    parallel_for(out.size(), jobs, [&](std::size_t trial) {
        Rng rng(derive_seed(config.seed, {config.stream, trial}));
        ConditionalPair& pair = out[trial];
        const int s = rng.sign();
        pair.label = s;
        pair.x0.resize(d);
        for (int i = 0; i < d; ++i) pair.x0[i] = s * means.x[i] + sx * rng.normal();

        std::vector<double> xs(static_cast<std::size_t>(n + 1) * d);
        std::copy(pair.x0.begin(), pair.x0.end(), xs.begin());
        for (int k = 0; k < n; ++k) {
            const double* prev = &xs[static_cast<std::size_t>(k) * d];
            double* next = &xs[static_cast<std::size_t>(k + 1) * d];
            for (int i = 0; i < d; ++i) next[i] = decay * prev[i] + x_sd * rng.normal();
        }

        std::vector<double> y(d), score(d);
        const double* x_t = &xs[static_cast<std::size_t>(n) * d];
        for (int i = 0; i < d; ++i) y[i] = stat.gain * x_t[i] + y_sd * rng.normal();
        for (int k = n; k >= 1; --k) {
            x_t = &xs[static_cast<std::size_t>(k) * d];
            std::span<const double> xk(x_t, d);
            conditional_score(moments[k], means, xk, y, score);
            for (int i = 0; i < d; ++i)
                y[i] += h * (config.beta * y[i] - g_at[k] * x_t[i] + config.sigma_w2 * score[i]);
            if (k > 1 || config.final_step_noise)
                for (int i = 0; i < d; ++i) y[i] += amp * rng.normal();
        }
        pair.y0 = std::move(y);
    });
    return out;
}

}  // namespace oudiff
