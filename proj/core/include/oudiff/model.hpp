#pragma once

#include <variant>

#include "oudiff/block2.hpp"

namespace oudiff {

enum class CouplingKind { symmetric, anisotropic, scheduled };

enum class ScheduleKind { constant, late, early };

// g(t) for the time-dependent lower-triangular coupling. Forward-time clock.
struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::constant;
    double g0 = 0.0;
    double t0 = 1.0;
    double horizon = 2.0;  // T; coupling_value rejects t outside [0, T]

    void validate() const;
};

// Late: g0 on [0, t0]; Early: g0 on [t0, T]. Both include t0.
double coupling_value(const ScheduleSpec& schedule, double t);

struct ModelSpec {
    double beta = 1.0;
    double sigma_w2 = 2.0;
    CouplingKind kind = CouplingKind::symmetric;
    double g = 0.0;         // symmetric / anisotropic coupling
    ScheduleSpec schedule;  // scheduled kind only
    int dim = 1;

    static ModelSpec symmetric(double beta, double g, double sigma_w2, int dim = 1);
    static ModelSpec anisotropic(double beta, double g, double sigma_w2, int dim = 1);
    static ModelSpec scheduled(double beta, const ScheduleSpec& schedule, double sigma_w2, int dim = 1);

    // finite, beta > 0, sigma_w2 >= 0, dim >= 1. Stability is checked separately.
    void validate() const;
    bool is_stable() const;  // symmetric: beta > |g|; otherwise beta > 0

    double coupling_at(double t) const;
    Block2 drift(double t = 0.0) const;  // M(t)
};

struct ModeMeans {
    double m_plus2 = 0.0;
    double m_minus2 = 0.0;
};

struct AngledMeans {
    double m_x2 = 0.0;
    double m_y2 = 0.0;
    double theta = 0.0;
};

// shared: one sign s for the whole state, z0 = s mu + noise.
// per_mode: independent signs on the common and difference modes.
enum class LabelLayout { shared, per_mode };

struct MixtureInit {
    double sigma2_x = 1.0;
    double sigma2_y = 1.0;
    std::variant<ModeMeans, AngledMeans> means = ModeMeans{};
    int dim = 1;
    LabelLayout layout = LabelLayout::shared;

    static MixtureInit modes(double m_plus2, double m_minus2, double sigma2, int dim = 1);
    static MixtureInit angled(double m_x2, double m_y2, double theta, double sigma2, int dim = 1);

    void validate() const;
    bool equal_variances() const { return sigma2_x == sigma2_y; }
    Block2 initial_cov() const { return Block2::diagonal(sigma2_x, sigma2_y); }
    // per-dimension Gram matrix of (mu_x, mu_y) in the x/y basis
    Block2 mean_gram() const;
    // per-dimension squared norms on the common / difference modes
    ModeMeans mode_norms() const;
};

}  // namespace oudiff
