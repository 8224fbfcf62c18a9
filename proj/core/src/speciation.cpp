#include "oudiff/speciation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oudiff/error.hpp"
#include "oudiff/moments.hpp"
#include "oudiff/parallel.hpp"

namespace oudiff {

namespace {

Block2 tail_operator(const ModelSpec& spec, const Block2& c) {
    return spec.drift() + spec.sigma_w2 * block_inverse(c);
}

bool is_tail_stable(const Block2& h) { return h.trace() > 0.0 && h.det() > 0.0; }

double default_window(const ModelSpec& spec, double t_max) { return t_max > 0.0 ? t_max : 10.0 / spec.beta; }

std::vector<double> search_grid(double t_max) {
    // 256 uniform + 256 geometric points, t = 0 included
    std::vector<double> grid;
    grid.reserve(513);
    grid.push_back(0.0);
    for (int i = 1; i <= 256; ++i) grid.push_back(t_max * i / 256.0);
    const double lo = t_max * 1e-6;
    for (int i = 0; i < 256; ++i) grid.push_back(lo * std::pow(t_max / lo, i / 255.0));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

// golden-section maximisation of kappa on [a, b]
std::pair<double, double> refine_max(const ModelSpec& spec, const MixtureInit& init, double a, double b) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = kappa(spec, init, x1), f2 = kappa(spec, init, x2);
    for (int i = 0; i < 80 && b - a > 1e-14 * std::max(1.0, b); ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = kappa(spec, init, x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = kappa(spec, init, x1);
        }
    }
    return f1 > f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

}  // namespace

std::string_view to_string(Regime regime) {
    switch (regime) {
        case Regime::speciates: return "speciates";
        case Regime::no_speciation: return "no_speciation";
        case Regime::unstable: return "unstable";
    }
    return "unknown";
}

bool tail_stable(const ModelSpec& spec, const MixtureInit& init, double t) {
    return is_tail_stable(tail_operator(spec, diffusion_kernel(spec, init, t).c));
}

double kappa(const ModelSpec& spec, const MixtureInit& init, double t) {
    const MomentState st = diffusion_kernel(spec, init, t);
    const Block2 h = tail_operator(spec, st.c);
    if (!is_tail_stable(h)) throw Error(Errc::unstable_at_time, "kappa: tail stability violated", t);
    Block2 k;
    if (spec.kind == CouplingKind::anisotropic) {
        k = kernel_K(spec, init, t);
    } else {
        const Block2 ci = block_inverse(st.c);
        k = ci * block_inverse(h) * ci;
    }
    return spec.sigma_w2 * frobenius_dot(k, st.mean_gram);
}

double kappa_symmetric_closed(const ModelSpec& spec, const MixtureInit& init, double t) {
    const ModeKernels c = mode_kernels(spec, init, t);
    const ModeDecomposition md = spectral_decompose(spec.drift());
    const ModeMeans m = init.mode_norms();
    const double sw = spec.sigma_w2;
    const double hp = md.lambda_plus * c.c_plus + sw;
    const double hm = md.lambda_minus * c.c_minus + sw;
    if (!(hp > 0.0 && hm > 0.0)) throw Error(Errc::unstable_at_time, "kappa: tail stability violated", t);
    return sw * (std::exp(-md.tau_plus * t) * m.m_plus2 / (c.c_plus * hp) +
                 std::exp(-md.tau_minus * t) * m.m_minus2 / (c.c_minus * hm));
}

double kappa0_aniso(const ModelSpec& spec, const MixtureInit& init) {
    init.validate();
    if (!init.equal_variances()) fail(Errc::unsupported_shape, "kappa0_aniso: requires sigma_x = sigma_y");
    const Block2 gram = init.mean_gram();
    const double s2 = init.sigma2_x;
    const double r = spec.sigma_w2 / s2;
    const double gap = r - spec.beta;
    if (std::abs(gap) <= 1e-12 * std::max(r, spec.beta)) fail(Errc::degenerate_rate, "kappa0_aniso: r = beta");
    return r * (gram.a11 + gram.a22) / (s2 * gap) - r * spec.g * gram.a12 / (s2 * gap * gap);
}

StabilityVerdict stability_check(const ModelSpec& spec, const MixtureInit& init, double t_end, int points) {
    StabilityVerdict v;
    v.sigma2 = std::max(init.sigma2_x, init.sigma2_y);
    v.variance_bound = spec.sigma_w2 / (spec.beta + std::abs(spec.g));
    v.stable = spec.is_stable() && v.sigma2 < v.variance_bound;
    t_end = default_window(spec, t_end);
    for (int i = 0; i < points; ++i) {
        const double t = t_end * i / (points - 1);
        bool ok = false;
        try {
            ok = tail_stable(spec, init, t);
        } catch (const Error&) {
            ok = false;
        }
        if (!ok) {
            v.first_violation = t;
            break;
        }
    }
    return v;
}

SpeciationResult speciation_time(const ModelSpec& spec, const MixtureInit& init, double t_max_search) {
    spec.validate();
    init.validate();
    if (spec.kind == CouplingKind::scheduled)
        fail(Errc::unsupported_shape, "speciation_time: scheduled coupling not supported");
    const double t_max = default_window(spec, t_max_search);
    SpeciationResult res;
    if (!spec.is_stable()) {
        res.regime = Regime::unstable;
        res.violation_time = 0.0;
        res.kappa0 = std::numeric_limits<double>::quiet_NaN();
        res.sup_kappa = res.kappa0;
        return res;
    }

    std::vector<double> ts = search_grid(t_max);
    std::vector<double> ks(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        try {
            ks[i] = kappa(spec, init, ts[i]);
        } catch (const Error& e) {
            if (e.code() != Errc::unstable_at_time) throw;
            res.regime = Regime::unstable;
            res.violation_time = ts[i];
            res.kappa0 = i > 0 ? ks[0] : std::numeric_limits<double>::quiet_NaN();
            res.sup_kappa = i > 0 ? *std::max_element(ks.begin(), ks.begin() + i) : res.kappa0;
            return res;
        }
    }
    res.kappa0 = ks[0];

    std::size_t arg = std::max_element(ks.begin(), ks.end()) - ks.begin();
    res.sup_kappa = ks[arg];
    if (arg > 0 && arg + 1 < ts.size()) {
        auto [tm, km] = refine_max(spec, init, ts[arg - 1], ts[arg + 1]);
        if (km > res.sup_kappa) {
            res.sup_kappa = km;
            auto pos = std::upper_bound(ts.begin(), ts.end(), tm) - ts.begin();
            if (ts[pos - 1] != tm) {
                ts.insert(ts.begin() + pos, tm);
                ks.insert(ks.begin() + pos, km);
            }
        }
    }
    if (res.sup_kappa <= 1.0 + 1e-12) {
        res.regime = Regime::no_speciation;
        return res;
    }

    std::size_t last = ks.size();
    for (std::size_t i = ks.size(); i-- > 0;) {
        if (ks[i] > 1.0) {
            last = i;
            break;
        }
    }
    if (last + 1 >= ks.size())
        fail(Errc::invalid_argument, "speciation_time: kappa > 1 at the end of the search window");

    double lo = ts[last], hi = ts[last + 1];
    double f_lo = ks[last] - 1.0, f_hi = ks[last + 1] - 1.0;
    double best = std::abs(f_hi) < std::abs(f_lo) ? hi : lo;
    double best_f = std::min(std::abs(f_lo), std::abs(f_hi));
    for (int it = 0; it < 80 && best_f > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double f = kappa(spec, init, mid) - 1.0;
        if (std::abs(f) < best_f) {
            best = mid;
            best_f = std::abs(f);
        }
        if (f > 0.0) {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
            f_hi = f;
        }
    }
    res.t_s = best;
    res.regime = Regime::speciates;
    return res;
}

std::optional<double> speciation_time_pure_mode(const ModelSpec& spec, const MixtureInit& init, Mode mode) {
    spec.validate();
    init.validate();
    if (spec.kind != CouplingKind::symmetric)
        fail(Errc::unsupported_shape, "speciation_time_pure_mode: symmetric coupling required");
    if (!init.equal_variances())
        fail(Errc::unsupported_shape, "speciation_time_pure_mode: requires sigma_x = sigma_y");
    if (!spec.is_stable()) fail(Errc::invalid_argument, "speciation_time_pure_mode: requires beta > |g|");
    const ModeMeans m = init.mode_norms();
    const double m2 = mode == Mode::plus ? m.m_plus2 : m.m_minus2;
    const double other = mode == Mode::plus ? m.m_minus2 : m.m_plus2;
    if (other != 0.0) fail(Errc::invalid_argument, "speciation_time_pure_mode: other mode must carry no mean");
    if (m2 == 0.0) return std::nullopt;
    const ModeDecomposition md = spectral_decompose(spec.drift());
    const double tau = mode == Mode::plus ? md.tau_plus : md.tau_minus;
    const double sw = spec.sigma_w2;
    const double b = init.sigma2_x - sw / tau;
    // positive root of tau B^2 x^2 + 2 sw m^2 x - sw^2 / tau = 0, x = e^{-tau t}
    const double x = sw / (tau * (std::hypot(m2, b) + m2));
    if (!(x < 1.0)) return std::nullopt;
    return -std::log(x) / tau;
}

std::optional<double> critical_coupling(const ModelSpec& spec, const MixtureInit& init) {
    const Block2 gram = init.mean_gram();
    if (!(gram.a12 > 1e-15 * std::max(1.0, gram.a11 + gram.a22))) return std::nullopt;
    ModelSpec s = spec;
    s.g = 0.0;
    const double a = kappa0_aniso(s, init);
    s.g = 1.0;
    const double slope = a - kappa0_aniso(s, init);  // kappa0(g) = a - slope g
    return (a - 1.0) / slope;
}

std::optional<double> no_speciation_boundary(const ModelSpec& spec, const MixtureInit& init, double g_lo,
                                             double g_hi, double t_max_search) {
    auto excess = [&](double g) {
        ModelSpec s = spec;
        s.g = g;
        const SpeciationResult r = speciation_time(s, init, t_max_search);
        if (r.regime == Regime::unstable) fail(Errc::unstable_at_time, "no_speciation_boundary: unstable cell");
        return r.sup_kappa - 1.0;
    };
    double f_lo = excess(g_lo);
    const double f_hi = excess(g_hi);
    if ((f_lo > 1e-12) == (f_hi > 1e-12)) return std::nullopt;
    for (int it = 0; it < 60 && g_hi - g_lo > 1e-12; ++it) {
        const double mid = 0.5 * (g_lo + g_hi);
        const double f = excess(mid);
        if ((f > 1e-12) == (f_lo > 1e-12)) {
            g_lo = mid;
            f_lo = f;
        } else {
            g_hi = mid;
        }
    }
    return 0.5 * (g_lo + g_hi);
}

std::vector<PhaseCell> phase_diagram(const PhaseDiagramRequest& request) {
    const std::size_t ng = request.g_grid.size();
    const std::size_t nt = request.theta_grid.size();
    std::vector<PhaseCell> cells(ng * nt);
    parallel_for(cells.size(), request.jobs, [&](std::size_t idx) {
        PhaseCell& cell = cells[idx];
        cell.g_index = idx / nt;
        cell.theta_index = idx % nt;
        cell.g = request.g_grid[cell.g_index];
        cell.theta = request.theta_grid[cell.theta_index];
        try {
            ModelSpec spec = request.spec;
            spec.g = cell.g;
            MixtureInit init = request.init;
            auto* angled = std::get_if<AngledMeans>(&init.means);
            if (!angled) fail(Errc::invalid_argument, "phase_diagram: angled means required");
            angled->theta = cell.theta;
            cell.result = speciation_time(spec, init, request.t_max_search);
            if (spec.kind == CouplingKind::anisotropic) cell.g_crit = critical_coupling(spec, init);
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    });
    return cells;
}

}  // namespace oudiff
