#include "oudiff/model.hpp"

#include <cmath>
#include <numbers>

#include "oudiff/error.hpp"

namespace oudiff {

void ScheduleSpec::validate() const {
    require(std::isfinite(g0), "schedule: g0 must be finite");
    require(std::isfinite(horizon) && horizon > 0.0, "schedule: horizon must be positive");
    require(std::isfinite(t0) && t0 >= 0.0 && t0 <= horizon, "schedule: t0 must lie in [0, T]");
}

double coupling_value(const ScheduleSpec& schedule, double t) {
    if (!(t >= 0.0 && t <= schedule.horizon))
        fail(Errc::invalid_argument, "coupling_value: t outside [0, T]");
    switch (schedule.kind) {
        case ScheduleKind::constant: return schedule.g0;
        case ScheduleKind::late: return t <= schedule.t0 ? schedule.g0 : 0.0;
        case ScheduleKind::early: return t >= schedule.t0 ? schedule.g0 : 0.0;
    }
    return 0.0;
}

ModelSpec ModelSpec::symmetric(double beta, double g, double sigma_w2, int dim) {
    ModelSpec s;
    s.beta = beta;
    s.g = g;
    s.sigma_w2 = sigma_w2;
    s.kind = CouplingKind::symmetric;
    s.dim = dim;
    return s;
}

ModelSpec ModelSpec::anisotropic(double beta, double g, double sigma_w2, int dim) {
    ModelSpec s = symmetric(beta, g, sigma_w2, dim);
    s.kind = CouplingKind::anisotropic;
    return s;
}

ModelSpec ModelSpec::scheduled(double beta, const ScheduleSpec& schedule, double sigma_w2, int dim) {
    ModelSpec s = symmetric(beta, 0.0, sigma_w2, dim);
    s.kind = CouplingKind::scheduled;
    s.schedule = schedule;
    return s;
}

void ModelSpec::validate() const {
    require(std::isfinite(beta) && beta > 0.0, "model: beta must be positive");
    require(std::isfinite(sigma_w2) && sigma_w2 >= 0.0, "model: sigma_w2 must be non-negative");
    require(std::isfinite(g), "model: g must be finite");
    require(dim >= 1, "model: dim must be >= 1");
    if (kind == CouplingKind::scheduled) schedule.validate();
}

bool ModelSpec::is_stable() const {
    if (kind == CouplingKind::symmetric) return beta > std::abs(g);
    return beta > 0.0;
}

double ModelSpec::coupling_at(double t) const {
    return kind == CouplingKind::scheduled ? coupling_value(schedule, t) : g;
}

Block2 ModelSpec::drift(double t) const {
    const double gt = coupling_at(t);
    if (kind == CouplingKind::symmetric) return {-beta, gt, gt, -beta};
    return {-beta, 0.0, gt, -beta};
}

MixtureInit MixtureInit::modes(double m_plus2, double m_minus2, double sigma2, int dim) {
    MixtureInit m;
    m.sigma2_x = m.sigma2_y = sigma2;
    m.means = ModeMeans{m_plus2, m_minus2};
    m.dim = dim;
    return m;
}

MixtureInit MixtureInit::angled(double m_x2, double m_y2, double theta, double sigma2, int dim) {
    MixtureInit m;
    m.sigma2_x = m.sigma2_y = sigma2;
    m.means = AngledMeans{m_x2, m_y2, theta};
    m.dim = dim;
    return m;
}

void MixtureInit::validate() const {
    require(std::isfinite(sigma2_x) && sigma2_x > 0.0, "mixture: sigma2_x must be positive");
    require(std::isfinite(sigma2_y) && sigma2_y > 0.0, "mixture: sigma2_y must be positive");
    require(dim >= 1, "mixture: dim must be >= 1");
    if (const auto* m = std::get_if<ModeMeans>(&means)) {
        require(std::isfinite(m->m_plus2) && m->m_plus2 >= 0.0, "mixture: m_plus2 must be >= 0");
        require(std::isfinite(m->m_minus2) && m->m_minus2 >= 0.0, "mixture: m_minus2 must be >= 0");
    } else {
        const auto& a = std::get<AngledMeans>(means);
        require(std::isfinite(a.m_x2) && a.m_x2 >= 0.0, "mixture: m_x2 must be >= 0");
        require(std::isfinite(a.m_y2) && a.m_y2 >= 0.0, "mixture: m_y2 must be >= 0");
        require(a.theta >= 0.0 && a.theta <= std::numbers::pi, "mixture: theta must lie in [0, pi]");
        require(layout == LabelLayout::shared, "mixture: per-mode labels need mode means");
    }
}

Block2 MixtureInit::mean_gram() const {
    if (const auto* m = std::get_if<ModeMeans>(&means)) {
        // mu = mu_+ (x) v_+ + mu_- (x) v_-, with mu_+ . mu_- = 0
        const double s = 0.5 * (m->m_plus2 + m->m_minus2);
        const double d = 0.5 * (m->m_plus2 - m->m_minus2);
        return {s, d, d, s};
    }
    const auto& a = std::get<AngledMeans>(means);
    const double xy = std::sqrt(a.m_x2 * a.m_y2) * std::cos(a.theta);
    return {a.m_x2, xy, xy, a.m_y2};
}

ModeMeans MixtureInit::mode_norms() const {
    const Block2 gram = mean_gram();
    // |mu_+|^2 = (|mu_x|^2 + 2 mu_x.mu_y + |mu_y|^2) / 2
    return {0.5 * (gram.a11 + gram.a12 + gram.a21 + gram.a22),
            0.5 * (gram.a11 - gram.a12 - gram.a21 + gram.a22)};
}

}  // namespace oudiff
