#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oudiff/model.hpp"

namespace oudiff {

enum class Regime { speciates, no_speciation, unstable };
std::string_view to_string(Regime regime);

struct SpeciationResult {
    std::optional<double> t_s;
    double kappa0 = 0.0;
    double sup_kappa = 0.0;
    Regime regime = Regime::no_speciation;
    std::optional<double> violation_time;  // set when regime == unstable
};

enum class Mode { plus, minus };

// M + sigma_w2 C(t)^{-1} has both eigenvalues in the right half-plane
bool tail_stable(const ModelSpec& spec, const MixtureInit& init, double t);

double kappa(const ModelSpec& spec, const MixtureInit& init, double t);
double kappa_symmetric_closed(const ModelSpec& spec, const MixtureInit& init, double t);
double kappa0_aniso(const ModelSpec& spec, const MixtureInit& init);

struct StabilityVerdict {
    bool stable = false;
    double variance_bound = 0.0;  // sigma_w2 / (beta + |g|)
    double sigma2 = 0.0;
    std::optional<double> first_violation;
};
// t_end <= 0 selects 10/beta
StabilityVerdict stability_check(const ModelSpec& spec, const MixtureInit& init, double t_end = 0.0,
                                 int points = 1024);

// t_max_search <= 0 selects 10/beta
SpeciationResult speciation_time(const ModelSpec& spec, const MixtureInit& init, double t_max_search = 0.0);

// empty when the mode never reaches kappa = 1 (kappa(0) <= 1)
std::optional<double> speciation_time_pure_mode(const ModelSpec& spec, const MixtureInit& init, Mode mode);

// g at which kappa(0) = 1 for angled means; empty when cos(theta) <= 0
std::optional<double> critical_coupling(const ModelSpec& spec, const MixtureInit& init);

// coupling in [g_lo, g_hi] where sup_t kappa crosses 1; empty without a sign change
std::optional<double> no_speciation_boundary(const ModelSpec& spec, const MixtureInit& init, double g_lo,
                                             double g_hi, double t_max_search = 0.0);

struct PhaseCell {
    std::size_t g_index = 0;
    std::size_t theta_index = 0;
    double g = 0.0;
    double theta = 0.0;
    SpeciationResult result;
    std::optional<double> g_crit;
    std::string error;  // non-empty when the cell failed
};

struct PhaseDiagramRequest {
    ModelSpec spec;    // coupling kind and rates; g is overwritten per cell
    MixtureInit init;  // angled means; theta is overwritten per cell
    std::vector<double> g_grid;
    std::vector<double> theta_grid;
    double t_max_search = 0.0;
    int jobs = 1;
};

// cells in (g, theta) row-major order
std::vector<PhaseCell> phase_diagram(const PhaseDiagramRequest& request);

}  // namespace oudiff
