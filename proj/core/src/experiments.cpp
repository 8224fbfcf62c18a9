#include "oudiff/experiments.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "oudiff/error.hpp"
#include "oudiff/parallel.hpp"

namespace oudiff {

std::string_view to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::constant: return "const";
        case ScheduleKind::late: return "late";
        case ScheduleKind::early: return "early";
    }
    return "unknown";
}

std::optional<ScheduleKind> parse_schedule(std::string_view name) {
    if (name == "const" || name == "constant") return ScheduleKind::constant;
    if (name == "late") return ScheduleKind::late;
    if (name == "early") return ScheduleKind::early;
    return std::nullopt;
}

namespace {

ToyMetrics evaluate(const ToyConfig& config, int jobs) {
    const std::vector<ConditionalPair> pairs = conditional_reverse_sample(config, jobs);
    const MixtureInit init = config.mixture();
    const MeanVectors means = materialize_means(init);
    MomentState m0;
    m0.c = init.initial_cov();
    m0.s = m0.c;
    m0.mean_gram = init.mean_gram();
    return toy_metrics(pairs, means, m0);
}

void fill_deltas(ToyRecord& r) {
    r.d_accuracy = r.coupled.accuracy - r.baseline.accuracy;
    r.d_mse = r.coupled.mse - r.baseline.mse;
    r.d_nll = r.coupled.nll - r.baseline.nll;
    r.acc_ci = wilson_interval(r.coupled.correct, r.coupled.n);
}

ToyConfig baseline_of(ToyConfig c) {
    c.schedule.kind = ScheduleKind::constant;
    c.schedule.g0 = 0.0;
    return c;
}

}  // namespace

ToyRecord run_toy_cell(const ToyConfig& config, int jobs) {
    ToyRecord r;
    r.theta = config.theta;
    r.g0 = config.schedule.g0;
    r.schedule = config.schedule.kind;
    r.baseline = evaluate(baseline_of(config), jobs);
    r.coupled = evaluate(config, jobs);
    fill_deltas(r);
    return r;
}

std::vector<double> ToyExperimentConfig::default_thetas(int count) {
    std::vector<double> th(count);
    for (int i = 0; i < count; ++i) th[i] = count == 1 ? 0.0 : std::numbers::pi * i / (count - 1);
    return th;
}

std::vector<ToyRecord> run_toy_experiment(const ToyExperimentConfig& config) {
    const std::vector<double> thetas = config.thetas.empty() ? ToyExperimentConfig::default_thetas() : config.thetas;
    const double t0 = config.t0 < 0.0 ? 0.5 * config.base.horizon : config.t0;
    std::vector<ToyRecord> rows;
    for (std::size_t it = 0; it < thetas.size(); ++it) {
        ToyConfig cell = config.base;
        cell.theta = thetas[it];
        cell.stream = it;
        cell.schedule.horizon = cell.horizon;
        cell.schedule.t0 = t0;
        std::optional<ToyMetrics> base;
        std::string base_error;
        try {
            base = evaluate(baseline_of(cell), config.jobs);
        } catch (const std::exception& e) {
            base_error = e.what();
        }
        for (double g0 : config.g0s) {
            for (ScheduleKind kind : config.schedules) {
                ToyRecord r;
                r.theta = cell.theta;
                r.g0 = g0;
                r.schedule = kind;
                if (!base) {
                    r.error = "baseline failed: " + base_error;
                    rows.push_back(r);
                    continue;
                }
                try {
                    ToyConfig c = cell;
                    c.schedule.kind = kind;
                    c.schedule.g0 = g0;
                    r.baseline = *base;
                    r.coupled = evaluate(c, config.jobs);
                    fill_deltas(r);
                } catch (const std::exception& e) {
                    r.error = e.what();
                }
                rows.push_back(r);
            }
        }
    }
    return rows;
}

void CloneConfig::validate() const {
    require(dim >= 1, "clone: dim must be >= 1");
    require(std::isfinite(beta) && beta > 0.0, "clone: beta must be positive");
    require(std::isfinite(sigma_w2) && sigma_w2 > 0.0, "clone: sigma_w2 must be positive");
    require(std::isfinite(sigma2) && sigma2 > 0.0, "clone: sigma2 must be positive");
    require(std::isfinite(m2) && m2 > 0.0, "clone: m2 must be positive");
    require(std::isfinite(horizon) && horizon > 0.0, "clone: horizon must be positive");
    require(steps >= 1, "clone: steps must be >= 1");
    require(!scan_times.empty(), "clone: need at least one scan time");
    for (double t : scan_times) require(t >= 0.0 && t <= horizon, "clone: scan time outside [0, T]");
    require(repeats >= 1 && batch >= 1 && baseline_factor >= 1, "clone: counts must be >= 1");
    require(phi_star > 0.0 && phi_star < 1.0, "clone: phi_star must lie in (0, 1)");
    require(conf > 0.0 && conf < 1.0, "clone: conf must lie in (0, 1)");
}

ModelSpec CloneConfig::model(double g) const { return ModelSpec::symmetric(beta, g, sigma_w2, dim); }

MixtureInit CloneConfig::mixture() const {
    MixtureInit init = MixtureInit::modes(m2, m2, sigma2, dim);
    init.layout = LabelLayout::per_mode;
    return init;
}

std::vector<double> CloneConfig::default_scan_times(int count, double lo, double hi) {
    std::vector<double> ts(count);
    for (int i = 0; i < count; ++i) ts[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    return ts;
}

std::optional<double> AgreementCurve::ci_width() const {
    if (!crossing_low || !crossing_high) return std::nullopt;
    return *crossing_high - *crossing_low;
}

std::optional<double> CloneOutcome::gap() const {
    if (!u.crossing || !v.crossing) return std::nullopt;
    return *u.crossing - *v.crossing;
}

std::optional<double> CloneOutcome::combined_ci_width() const {
    const auto wu = u.ci_width(), wv = v.ci_width();
    if (!wu || !wv) return std::nullopt;
    return *wu + *wv;
}

namespace {

std::array<int, 2> mode_labels(const State& z, const ModeVectors& mv) {
    const ModePair p = mode_projection(z);
    const double pu = std::inner_product(p.u.begin(), p.u.end(), mv.plus.begin(), 0.0);
    const double pv = std::inner_product(p.v.begin(), p.v.end(), mv.minus.begin(), 0.0);
    return {pu >= 0.0 ? 1 : -1, pv >= 0.0 ? 1 : -1};
}

AgreementCurve finish_curve(const std::vector<double>& scan_times, std::vector<std::size_t> agree, std::size_t n,
                            std::size_t base_agree, std::size_t base_n, const CloneConfig& cfg) {
    AgreementCurve c;
    c.scan_times = scan_times;
    c.agree = std::move(agree);
    c.n_pairs = n;
    c.baseline_agree = base_agree;
    c.baseline_pairs = base_n;
    c.baseline = static_cast<double>(base_agree) / base_n;
    for (std::size_t j = 0; j < scan_times.size(); ++j) {
        const double phi = static_cast<double>(c.agree[j]) / n;
        const Interval iv = wilson_interval(c.agree[j], n, cfg.conf);
        c.phi_raw.push_back(phi);
        c.wilson_low.push_back(iv.low);
        c.wilson_high.push_back(iv.high);
        c.phi_excess.push_back(excess_agreement(phi, c.baseline));
        c.excess_low.push_back(excess_agreement(iv.low, c.baseline));
        c.excess_high.push_back(excess_agreement(iv.high, c.baseline));
    }
    c.crossing = crossing_time(scan_times, c.phi_excess, cfg.phi_star, Interpolation::linear);
    c.crossing_low = crossing_time(scan_times, c.excess_low, cfg.phi_star, Interpolation::linear);
    c.crossing_high = crossing_time(scan_times, c.excess_high, cfg.phi_star, Interpolation::linear);
    return c;
}

}  // namespace

CloneOutcome clone_agreement(const ModelSpec& spec, const MixtureInit& init, const CloneConfig& cfg) {
    cfg.validate();
    if (spec.kind != CouplingKind::symmetric) fail(Errc::unsupported_shape, "clone_agreement: symmetric coupling required");
    const ModeVectors mv = materialize_mode_means(init);
    auto nonzero = [](const std::vector<double>& v) {
        return std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
    };
    if (!nonzero(mv.plus) || !nonzero(mv.minus))
        fail(Errc::undefined_label, "clone_agreement: a mode has no mean direction to label against");

    const PopulationScore score(spec, init);
    SampleOptions opts;
    opts.horizon = cfg.horizon;
    opts.steps = cfg.steps;
    opts.scan_times = cfg.scan_times;
    const std::size_t ns = cfg.scan_times.size();
    const std::size_t pairs = static_cast<std::size_t>(cfg.repeats) * cfg.batch;
    const std::size_t base_pairs = pairs * cfg.baseline_factor;

    // agreement flags per master, per scan, per mode
    std::vector<std::array<unsigned char, 2>> flags(pairs * ns);
    parallel_for(pairs, cfg.jobs, [&](std::size_t i) {
        Rng rng(derive_seed(cfg.seed, {0, i}));
        const Trajectory master = reverse_sample(spec, score, opts, rng);
        for (std::size_t j = 0; j < ns; ++j) {
            const int k = reverse_index(opts, cfg.scan_times[j]);
            const State& start = master.scan_cache.at(opts.reverse_time(k));
            std::array<std::array<int, 2>, 2> lab{};
            for (std::uint64_t c = 0; c < 2; ++c) {
                Rng crng(derive_seed(cfg.seed, {1, i, j, c}));
                lab[c] = mode_labels(reverse_continue(spec, score, opts, crng, start, k).final_state(), mv);
            }
            flags[i * ns + j] = {static_cast<unsigned char>(lab[0][0] == lab[1][0]),
                                 static_cast<unsigned char>(lab[0][1] == lab[1][1])};
        }
    });
    std::vector<std::array<unsigned char, 2>> base_flags(base_pairs);
    parallel_for(base_pairs, cfg.jobs, [&](std::size_t i) {
        std::array<std::array<int, 2>, 2> lab{};
        for (std::uint64_t c = 0; c < 2; ++c) {
            Rng rng(derive_seed(cfg.seed, {2, i, c}));
            lab[c] = mode_labels(reverse_sample(spec, score, opts, rng).final_state(), mv);
        }
        base_flags[i] = {static_cast<unsigned char>(lab[0][0] == lab[1][0]),
                         static_cast<unsigned char>(lab[0][1] == lab[1][1])};
    });

    CloneOutcome out;
    out.g = spec.g;
    for (int m = 0; m < 2; ++m) {
        std::vector<std::size_t> agree(ns, 0);
        for (std::size_t i = 0; i < pairs; ++i)
            for (std::size_t j = 0; j < ns; ++j) agree[j] += flags[i * ns + j][m];
        std::size_t base_agree = 0;
        for (const auto& f : base_flags) base_agree += f[m];
        AgreementCurve curve = finish_curve(cfg.scan_times, std::move(agree), pairs, base_agree, base_pairs, cfg);
        (m == 0 ? out.u : out.v) = std::move(curve);
    }
    return out;
}

std::vector<CloneOutcome> run_clone_experiment(const CloneConfig& config, const std::vector<double>& g_values) {
    config.validate();
    std::vector<CloneOutcome> out;
    out.reserve(g_values.size());
    for (double g : g_values) out.push_back(clone_agreement(config.model(g), config.mixture(), config));
    return out;
}

}  // namespace oudiff
