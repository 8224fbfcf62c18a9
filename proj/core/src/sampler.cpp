#include "oudiff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "oudiff/error.hpp"
#include "oudiff/moments.hpp"

namespace oudiff {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double log_cosh(double a) {
    const double x = std::abs(a);
    return x + std::log1p(std::exp(-2.0 * x)) - std::numbers::ln2;
}

void check_state(std::span<const double> z, int dim, const char* who) {
    if (static_cast<int>(z.size()) != 2 * dim)
        fail(Errc::invalid_argument, std::string(who) + ": state has wrong length");
}

void require_noise(const ModelSpec& spec, const char* who) {
    if (!(spec.sigma_w2 > 0.0))
        fail(Errc::invalid_argument, std::string(who) + ": sigma_w2 must be positive (score undefined)");
}

void require_forward_stable(const ModelSpec& spec, const char* who) {
    spec.validate();
    if (!spec.is_stable()) fail(Errc::invalid_argument, std::string(who) + ": symmetric coupling needs beta > |g|");
}

void add_noise(State& z, int d, double amp, const NoiseMode& noise, Rng& rng) {
    if (noise.kind == NoiseMode::Kind::isotropic) {
        for (double& v : z) v += amp * rng.normal();
        return;
    }
    const NoisePair e = mode_shaped_noise(noise.g, d, rng);
    for (int i = 0; i < d; ++i) {
        z[i] += amp * e.a[i];
        z[d + i] += amp * e.b[i];
    }
}

std::set<int> scan_indices(const SampleOptions& opts, bool reverse) {
    std::set<int> out;
    const double h = opts.step();
    for (double t : opts.scan_times) {
        const double pos = reverse ? (opts.horizon - t) / h : t / h;
        out.insert(std::clamp(static_cast<int>(std::lround(pos)), 0, opts.steps));
    }
    return out;
}

Trajectory run_reverse(const ModelSpec& spec, const ScoreField& score, const SampleOptions& opts, Rng& rng,
                       State z, int k0) {
    const int d = score.dim();
    const int n = opts.steps;
    const double h = opts.step();
    const double amp = std::sqrt(spec.sigma_w2 * h);
    const std::set<int> scans = scan_indices(opts, true);

    Trajectory tr;
    tr.times.push_back(opts.reverse_time(k0));
    tr.states.push_back(z);
    State s(z.size());
    for (int k = k0; k < n; ++k) {
        const double t = opts.reverse_time(k);
        if (scans.count(k)) tr.scan_cache[t] = z;
        try {
            score.score(z, t, s);
        } catch (const Error& e) {
            throw Error(e.code(), std::string(e.what()) + " (reverse step " + std::to_string(k) + ")", t);
        }
        const Block2 m = spec.drift(t);
        for (int i = 0; i < d; ++i) {
            const double x = z[i], y = z[d + i];
            z[i] += h * (-(m.a11 * x + m.a12 * y) + spec.sigma_w2 * s[i]);
            z[d + i] += h * (-(m.a21 * x + m.a22 * y) + spec.sigma_w2 * s[d + i]);
        }
        if (k + 1 < n || opts.final_step_noise) add_noise(z, d, amp, opts.noise, rng);
        if (opts.record == Record::full) {
            tr.times.push_back(opts.reverse_time(k + 1));
            tr.states.push_back(z);
        }
    }
    if (scans.count(n)) tr.scan_cache[0.0] = z;
    if (opts.record == Record::endpoints) {
        tr.times.push_back(0.0);
        tr.states.push_back(z);
    }
    return tr;
}

}  // namespace

MeanVectors materialize_means(const MixtureInit& init) {
    init.validate();
    const int d = init.dim;
    const Block2 gram = init.mean_gram();
    const double mx = std::sqrt(gram.a11);
    const double my = std::sqrt(gram.a22);
    double cosv = (mx > 0.0 && my > 0.0) ? gram.a12 / (mx * my) : 1.0;
    cosv = std::clamp(cosv, -1.0, 1.0);
    if (1.0 - std::abs(cosv) < 1e-12) cosv = std::copysign(1.0, cosv);  // rounding in the Gram entries
    const double sinv = std::sqrt(std::max(0.0, 1.0 - cosv * cosv));
    if (d < 2 && sinv > 1e-12 && my > 0.0)
        fail(Errc::invalid_argument, "materialize_means: a non-collinear mean pair needs dim >= 2");
    const double sd = std::sqrt(static_cast<double>(d));
    MeanVectors mv{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    mv.x[0] = sd * mx;
    mv.y[0] = sd * my * cosv;
    if (d >= 2) mv.y[1] = sd * my * sinv;
    return mv;
}

ModeVectors materialize_mode_means(const MixtureInit& init) {
    init.validate();
    const int d = init.dim;
    const ModeMeans m = init.mode_norms();
    const double sd = std::sqrt(static_cast<double>(d));
    ModeVectors mv{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    mv.plus[0] = sd * std::sqrt(m.m_plus2);
    mv.minus[0] = sd * std::sqrt(m.m_minus2);
    return mv;
}

ModePair mode_projection(std::span<const double> z) {
    const std::size_t d = z.size() / 2;
    ModePair p{std::vector<double>(d), std::vector<double>(d)};
    for (std::size_t i = 0; i < d; ++i) {
        p.u[i] = kInvSqrt2 * (z[i] + z[d + i]);
        p.v[i] = kInvSqrt2 * (z[i] - z[d + i]);
    }
    return p;
}

State from_modes(std::span<const double> u, std::span<const double> v) {
    const std::size_t d = u.size();
    State z(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        z[i] = kInvSqrt2 * (u[i] + v[i]);
        z[d + i] = kInvSqrt2 * (u[i] - v[i]);
    }
    return z;
}

NoisePair mode_shaped_noise(double g, int dim, Rng& rng) {
    if (!(g >= 0.0 && g < 1.0)) fail(Errc::invalid_argument, "mode_shaped_noise: g must lie in [0, 1)");
    if (dim < 1) fail(Errc::invalid_argument, "mode_shaped_noise: dim must be >= 1");
    const double su = std::sqrt(1.0 - g), sv = std::sqrt(1.0 + g);
    NoisePair out{std::vector<double>(dim), std::vector<double>(dim)};
    for (int i = 0; i < dim; ++i) {
        const double eu = su * rng.normal();
        const double ev = sv * rng.normal();
        out.a[i] = kInvSqrt2 * (eu + ev);
        out.b[i] = kInvSqrt2 * (eu - ev);
    }
    return out;
}

void DatasetEmpirical::validate() const {
    if (points.empty()) fail(Errc::invalid_argument, "dataset: need at least one point");
    const std::size_t n = points.front().size();
    if (n == 0 || n % 2) fail(Errc::invalid_argument, "dataset: points must have even length 2d");
    for (const State& p : points) {
        if (p.size() != n) fail(Errc::invalid_argument, "dataset: ragged points");
        for (double v : p)
            if (!std::isfinite(v)) fail(Errc::invalid_argument, "dataset: non-finite entry");
    }
    if (!labels.empty() && labels.size() != points.size())
        fail(Errc::invalid_argument, "dataset: labels do not match points");
}

State draw_initial(const MixtureInit& init, Rng& rng, std::array<int, 2>* labels) {
    init.validate();
    const int d = init.dim;
    if (init.layout == LabelLayout::per_mode) {
        if (!init.equal_variances()) fail(Errc::unsupported_shape, "draw_initial: per-mode labels need sigma_x = sigma_y");
        const ModeVectors mv = materialize_mode_means(init);
        const int su = rng.sign(), sv = rng.sign();
        const double sd = std::sqrt(init.sigma2_x);
        std::vector<double> u(d), v(d);
        for (int i = 0; i < d; ++i) u[i] = su * mv.plus[i] + sd * rng.normal();
        for (int i = 0; i < d; ++i) v[i] = sv * mv.minus[i] + sd * rng.normal();
        if (labels) *labels = {su, sv};
        return from_modes(u, v);
    }
    const MeanVectors mv = materialize_means(init);
    const int s = rng.sign();
    const double sx = std::sqrt(init.sigma2_x), sy = std::sqrt(init.sigma2_y);
    State z(2 * d);
    for (int i = 0; i < d; ++i) z[i] = s * mv.x[i] + sx * rng.normal();
    for (int i = 0; i < d; ++i) z[d + i] = s * mv.y[i] + sy * rng.normal();
    if (labels) *labels = {s, s};
    return z;
}

DatasetEmpirical draw_dataset(const MixtureInit& init, std::size_t n, Rng& rng) {
    DatasetEmpirical data;
    data.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::array<int, 2> lab{};
        data.points.push_back(draw_initial(init, rng, &lab));
        data.labels.push_back(lab[0]);
    }
    return data;
}

PopulationScore::PopulationScore(const ModelSpec& spec, const MixtureInit& init)
    : PopulationScore(spec, init,
                      init.layout == LabelLayout::shared ? materialize_means(init) : MeanVectors{}) {}

PopulationScore::PopulationScore(const ModelSpec& spec, const MixtureInit& init, MeanVectors means)
    : spec_(spec), init_(init), means_(std::move(means)), dim_(init.dim) {
    spec_.validate();
    init_.validate();
    if (spec_.kind == CouplingKind::scheduled)
        fail(Errc::unsupported_shape, "PopulationScore: scheduled coupling needs the conditional sampler");
    if (init_.layout == LabelLayout::per_mode) {
        if (spec_.kind != CouplingKind::symmetric || !init_.equal_variances())
            fail(Errc::unsupported_shape, "PopulationScore: per-mode labels need symmetric coupling, sigma_x = sigma_y");
        mode_means_ = materialize_mode_means(init_);
    } else if (static_cast<int>(means_.x.size()) != dim_ || static_cast<int>(means_.y.size()) != dim_) {
        fail(Errc::invalid_argument, "PopulationScore: mean vectors have wrong length");
    }
}

void PopulationScore::score(std::span<const double> z, double t, std::span<double> out) const {
    check_state(z, dim_, "population_score");
    const int d = dim_;
    if (init_.layout == LabelLayout::per_mode) {
        const ModeKernels c = mode_kernels(spec_, init_, t);
        const ModeDecomposition md = spectral_decompose(spec_.drift());
        const double ep = std::exp(md.lambda_plus * t), em = std::exp(md.lambda_minus * t);
        double ap = 0.0, am = 0.0;
        for (int i = 0; i < d; ++i) {
            ap += mode_means_.plus[i] * (z[i] + z[d + i]);
            am += mode_means_.minus[i] * (z[i] - z[d + i]);
        }
        const double tp = std::tanh(ep * kInvSqrt2 * ap / c.c_plus);
        const double tm = std::tanh(em * kInvSqrt2 * am / c.c_minus);
        for (int i = 0; i < d; ++i) {
            const double u = kInvSqrt2 * (z[i] + z[d + i]);
            const double v = kInvSqrt2 * (z[i] - z[d + i]);
            const double su = (-u + ep * mode_means_.plus[i] * tp) / c.c_plus;
            const double sv = (-v + em * mode_means_.minus[i] * tm) / c.c_minus;
            out[i] = kInvSqrt2 * (su + sv);
            out[d + i] = kInvSqrt2 * (su - sv);
        }
        return;
    }
    const MomentState st = diffusion_kernel(spec_, init_, t);
    if (!(st.c.a11 > 0.0 && st.c.det() > 0.0))
        fail(Errc::not_positive_definite, "population_score: C(t) is not positive definite");
    const Block2 ci = block_inverse(st.c);
    const Block2& e = st.propagator;
    double a = 0.0;
    for (int i = 0; i < d; ++i) {
        const double mx = e.a11 * means_.x[i] + e.a12 * means_.y[i];
        const double my = e.a21 * means_.x[i] + e.a22 * means_.y[i];
        a += mx * (ci.a11 * z[i] + ci.a12 * z[d + i]) + my * (ci.a21 * z[i] + ci.a22 * z[d + i]);
    }
    const double th = std::tanh(a);
    for (int i = 0; i < d; ++i) {
        const double mx = e.a11 * means_.x[i] + e.a12 * means_.y[i];
        const double my = e.a21 * means_.x[i] + e.a22 * means_.y[i];
        const double x = z[i], y = z[d + i];
        out[i] = -(ci.a11 * x + ci.a12 * y) + th * (ci.a11 * mx + ci.a12 * my);
        out[d + i] = -(ci.a21 * x + ci.a22 * y) + th * (ci.a21 * mx + ci.a22 * my);
    }
}

double PopulationScore::log_density(std::span<const double> z, double t) const {
    check_state(z, dim_, "population_log_density");
    const int d = dim_;
    const double log2pi = std::log(2.0 * std::numbers::pi);
    if (init_.layout == LabelLayout::per_mode) {
        const ModeKernels c = mode_kernels(spec_, init_, t);
        const ModeDecomposition md = spectral_decompose(spec_.drift());
        const double ep = std::exp(md.lambda_plus * t), em = std::exp(md.lambda_minus * t);
        double uu = 0, vv = 0, mu = 0, mv = 0, pp = 0, qq = 0;
        for (int i = 0; i < d; ++i) {
            const double u = kInvSqrt2 * (z[i] + z[d + i]);
            const double v = kInvSqrt2 * (z[i] - z[d + i]);
            const double mp = ep * mode_means_.plus[i], mm = em * mode_means_.minus[i];
            uu += u * u;
            vv += v * v;
            mu += mp * u;
            mv += mm * v;
            pp += mp * mp;
            qq += mm * mm;
        }
        return -0.5 * d * (2.0 * log2pi + std::log(c.c_plus) + std::log(c.c_minus)) -
               0.5 * (uu + pp) / c.c_plus - 0.5 * (vv + qq) / c.c_minus + log_cosh(mu / c.c_plus) +
               log_cosh(mv / c.c_minus);
    }
    const MomentState st = diffusion_kernel(spec_, init_, t);
    const double det = st.c.det();
    if (!(st.c.a11 > 0.0 && det > 0.0))
        fail(Errc::not_positive_definite, "population_log_density: C(t) is not positive definite");
    const Block2 ci = block_inverse(st.c);
    const Block2& e = st.propagator;
    double zz = 0.0, mm = 0.0, mz = 0.0;
    for (int i = 0; i < d; ++i) {
        const double mx = e.a11 * means_.x[i] + e.a12 * means_.y[i];
        const double my = e.a21 * means_.x[i] + e.a22 * means_.y[i];
        const double x = z[i], y = z[d + i];
        zz += x * (ci.a11 * x + ci.a12 * y) + y * (ci.a21 * x + ci.a22 * y);
        mm += mx * (ci.a11 * mx + ci.a12 * my) + my * (ci.a21 * mx + ci.a22 * my);
        mz += mx * (ci.a11 * x + ci.a12 * y) + my * (ci.a21 * x + ci.a22 * y);
    }
    return -d * log2pi - 0.5 * d * std::log(det) - 0.5 * zz - 0.5 * mm + log_cosh(mz);
}

EmpiricalScore::EmpiricalScore(const ModelSpec& spec, DatasetEmpirical data) : spec_(spec), data_(std::move(data)) {
    spec_.validate();
    data_.validate();
    if (spec_.kind == CouplingKind::scheduled)
        fail(Errc::unsupported_shape, "EmpiricalScore: scheduled coupling not supported");
}

namespace {

struct KernelGeometry {
    Block2 e;
    Block2 qi;
    double log_det_q;
};

KernelGeometry kernel_geometry(const ModelSpec& spec, double t) {
    if (!(t > 0.0)) throw Error(Errc::kernel_degenerate, "empirical score: Q(0) = 0", t);
    const Block2 q = transition_cov(spec, t);
    const double det = q.det();
    if (!(q.a11 > 0.0 && det > 0.0)) throw Error(Errc::kernel_degenerate, "empirical score: Q(t) singular", t);
    return {propagator(spec, t), block_inverse(q), std::log(det)};
}

// unnormalised log-kernels -1/2 r^T Q^{-1} r, r = z - E z_i
std::vector<double> log_kernels(const DatasetEmpirical& data, const KernelGeometry& kg, std::span<const double> z) {
    const std::size_t d = z.size() / 2;
    std::vector<double> lk(data.points.size());
    for (std::size_t n = 0; n < data.points.size(); ++n) {
        const State& p = data.points[n];
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double rx = z[i] - (kg.e.a11 * p[i] + kg.e.a12 * p[d + i]);
            const double ry = z[d + i] - (kg.e.a21 * p[i] + kg.e.a22 * p[d + i]);
            acc += rx * (kg.qi.a11 * rx + kg.qi.a12 * ry) + ry * (kg.qi.a21 * rx + kg.qi.a22 * ry);
        }
        lk[n] = -0.5 * acc;
    }
    return lk;
}

double softmax_inplace(std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : v) x /= sum;
    return mx + std::log(sum);
}

}  // namespace

std::vector<double> EmpiricalScore::weights(std::span<const double> z, double t) const {
    check_state(z, data_.dim(), "empirical_score");
    std::vector<double> w = log_kernels(data_, kernel_geometry(spec_, t), z);
    softmax_inplace(w);
    return w;
}

void EmpiricalScore::score(std::span<const double> z, double t, std::span<double> out) const {
    check_state(z, data_.dim(), "empirical_score");
    const KernelGeometry kg = kernel_geometry(spec_, t);
    std::vector<double> w = log_kernels(data_, kg, z);
    softmax_inplace(w);
    const std::size_t d = z.size() / 2;
    std::fill(out.begin(), out.end(), 0.0);
    // Q^{-1}(E zbar - z) with zbar the posterior-weighted training mean
    for (std::size_t n = 0; n < w.size(); ++n) {
        const State& p = data_.points[n];
        for (std::size_t i = 0; i < 2 * d; ++i) out[i] += w[n] * p[i];
    }
    for (std::size_t i = 0; i < d; ++i) {
        const double rx = kg.e.a11 * out[i] + kg.e.a12 * out[d + i] - z[i];
        const double ry = kg.e.a21 * out[i] + kg.e.a22 * out[d + i] - z[d + i];
        out[i] = kg.qi.a11 * rx + kg.qi.a12 * ry;
        out[d + i] = kg.qi.a21 * rx + kg.qi.a22 * ry;
    }
}

double EmpiricalScore::log_density(std::span<const double> z, double t) const {
    check_state(z, data_.dim(), "empirical_log_density");
    const KernelGeometry kg = kernel_geometry(spec_, t);
    std::vector<double> lk = log_kernels(data_, kg, z);
    const double d = static_cast<double>(data_.dim());
    const double lse = softmax_inplace(lk);
    return lse - std::log(static_cast<double>(lk.size())) - d * std::log(2.0 * std::numbers::pi) -
           0.5 * d * kg.log_det_q;
}

State population_score(const ModelSpec& spec, const MixtureInit& init, std::span<const double> z, double t) {
    State out(z.size());
    PopulationScore(spec, init).score(z, t, out);
    return out;
}

double population_log_density(const ModelSpec& spec, const MixtureInit& init, std::span<const double> z, double t) {
    return PopulationScore(spec, init).log_density(z, t);
}

EmpiricalScoreValue empirical_score(const DatasetEmpirical& data, const ModelSpec& spec, std::span<const double> z,
                                    double t) {
    EmpiricalScore es(spec, data);
    EmpiricalScoreValue v{State(z.size()), es.weights(z, t)};
    es.score(z, t, v.score);
    return v;
}

void SampleOptions::validate() const {
    require(std::isfinite(horizon) && horizon > 0.0, "sample: horizon must be positive");
    require(steps >= 1, "sample: steps must be >= 1");
    for (double t : scan_times) require(t >= 0.0 && t <= horizon, "sample: scan time outside [0, T]");
    if (noise.kind == NoiseMode::Kind::mode_shaped)
        require(noise.g >= 0.0 && noise.g < 1.0, "sample: mode-shaped noise needs g in [0, 1)");
}

int reverse_index(const SampleOptions& opts, double t) {
    return std::clamp(static_cast<int>(std::lround((opts.horizon - t) / opts.step())), 0, opts.steps);
}

Trajectory forward_sample(const ModelSpec& spec, const State& z0, const SampleOptions& opts, Rng& rng) {
    require_forward_stable(spec, "forward_sample");
    opts.validate();
    const int d = spec.dim;
    check_state(z0, d, "forward_sample");
    const int n = opts.steps;
    const double h = opts.step();
    const double amp = std::sqrt(spec.sigma_w2 * h);
    const std::set<int> scans = scan_indices(opts, false);

    Trajectory tr;
    State z = z0;
    tr.times.push_back(0.0);
    tr.states.push_back(z);
    for (int k = 0; k < n; ++k) {
        const double t = opts.forward_time(k);
        if (scans.count(k)) tr.scan_cache[t] = z;
        const Block2 m = spec.drift(t);
        for (int i = 0; i < d; ++i) {
            const double x = z[i], y = z[d + i];
            z[i] += h * (m.a11 * x + m.a12 * y);
            z[d + i] += h * (m.a21 * x + m.a22 * y);
        }
        if (amp > 0.0) add_noise(z, d, amp, opts.noise, rng);
        if (opts.record == Record::full) {
            tr.times.push_back(opts.forward_time(k + 1));
            tr.states.push_back(z);
        }
    }
    if (scans.count(n)) tr.scan_cache[opts.horizon] = z;
    if (opts.record == Record::endpoints) {
        tr.times.push_back(opts.horizon);
        tr.states.push_back(z);
    }
    return tr;
}

Trajectory forward_sample(const ModelSpec& spec, const MixtureInit& init, const SampleOptions& opts, Rng& rng) {
    if (init.dim != spec.dim) fail(Errc::invalid_argument, "forward_sample: spec and init dimensions differ");
    std::array<int, 2> labels{};
    const State z0 = draw_initial(init, rng, &labels);
    Trajectory tr = forward_sample(spec, z0, opts, rng);
    tr.labels = labels;
    return tr;
}

State draw_stationary(const ModelSpec& spec, Rng& rng) {
    const Block2 l = cholesky(stationary_cov(spec));
    const int d = spec.dim;
    State z(2 * d);
    for (int i = 0; i < d; ++i) {
        const double a = rng.normal(), b = rng.normal();
        z[i] = l.a11 * a;
        z[d + i] = l.a21 * a + l.a22 * b;
    }
    return z;
}

Trajectory reverse_sample(const ModelSpec& spec, const ScoreField& score, const SampleOptions& opts, Rng& rng) {
    require_forward_stable(spec, "reverse_sample");
    require_noise(spec, "reverse_sample");
    opts.validate();
    if (score.dim() != spec.dim) fail(Errc::invalid_argument, "reverse_sample: score and spec dimensions differ");
    return run_reverse(spec, score, opts, rng, draw_stationary(spec, rng), 0);
}

Trajectory reverse_continue(const ModelSpec& spec, const ScoreField& score, const SampleOptions& opts, Rng& rng,
                            const State& start, int start_index) {
    spec.validate();
    require_noise(spec, "reverse_continue");
    opts.validate();
    check_state(start, score.dim(), "reverse_continue");
    if (start_index < 0 || start_index > opts.steps)
        fail(Errc::invalid_argument, "reverse_continue: start index outside the grid");
    return run_reverse(spec, score, opts, rng, start, start_index);
}

Trajectory flow_sample(const ModelSpec& spec, const ScoreField& score, const SampleOptions& opts, const State& start) {
    spec.validate();
    require_noise(spec, "flow_sample");
    opts.validate();
    const int d = score.dim();
    check_state(start, d, "flow_sample");
    const int n = opts.steps;
    const double h = opts.step();
    const std::set<int> scans = scan_indices(opts, true);

    // forward-time vector field M z - sigma_w2/2 score
    State sbuf(start.size());
    auto field = [&](const State& z, double t, State& out) {
        score.score(z, t, sbuf);
        const Block2 m = spec.drift(t);
        for (int i = 0; i < d; ++i) {
            out[i] = m.a11 * z[i] + m.a12 * z[d + i] - 0.5 * spec.sigma_w2 * sbuf[i];
            out[d + i] = m.a21 * z[i] + m.a22 * z[d + i] - 0.5 * spec.sigma_w2 * sbuf[d + i];
        }
    };

    Trajectory tr;
    State z = start, k1(z.size()), k2(z.size()), k3(z.size()), k4(z.size()), tmp(z.size());
    tr.times.push_back(opts.horizon);
    tr.states.push_back(z);
    for (int k = 0; k < n; ++k) {
        const double t = opts.reverse_time(k);
        const double tm = t - 0.5 * h;
        const double tn = opts.reverse_time(k + 1);
        if (scans.count(k)) tr.scan_cache[t] = z;
        field(z, t, k1);
        for (std::size_t i = 0; i < z.size(); ++i) tmp[i] = z[i] - 0.5 * h * k1[i];
        field(tmp, tm, k2);
        for (std::size_t i = 0; i < z.size(); ++i) tmp[i] = z[i] - 0.5 * h * k2[i];
        field(tmp, tm, k3);
        for (std::size_t i = 0; i < z.size(); ++i) tmp[i] = z[i] - h * k3[i];
        field(tmp, tn, k4);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (opts.record == Record::full) {
            tr.times.push_back(tn);
            tr.states.push_back(z);
        }
    }
    if (scans.count(n)) tr.scan_cache[0.0] = z;
    if (opts.record == Record::endpoints) {
        tr.times.push_back(0.0);
        tr.states.push_back(z);
    }
    return tr;
}

}  // namespace oudiff
