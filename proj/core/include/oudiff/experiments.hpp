#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oudiff/conditional.hpp"
#include "oudiff/metrics.hpp"

namespace oudiff {

std::string_view to_string(ScheduleKind kind);
std::optional<ScheduleKind> parse_schedule(std::string_view name);

// ---- conditional generation sweep ----

struct ToyRecord {
    double theta = 0.0;
    double g0 = 0.0;
    ScheduleKind schedule = ScheduleKind::constant;
    ToyMetrics coupled;
    ToyMetrics baseline;  // g = 0 with the same trial streams
    double d_accuracy = 0.0;
    double d_mse = 0.0;
    double d_nll = 0.0;
    Interval acc_ci;  // Wilson interval of the coupled accuracy
    std::string error;
};

// One cell against its g = 0 baseline. `config.schedule` carries (kind, g0, t0).
ToyRecord run_toy_cell(const ToyConfig& config, int jobs = 1);

struct ToyExperimentConfig {
    ToyConfig base;  // theta, schedule and stream are set per cell
    std::vector<double> thetas;
    std::vector<double> g0s{0.2, 0.5, 1.0};
    std::vector<ScheduleKind> schedules{ScheduleKind::constant, ScheduleKind::late, ScheduleKind::early};
    double t0 = -1.0;  // negative selects T/2
    int jobs = 1;

    // 9 uniform angles on [0, pi]
    static std::vector<double> default_thetas(int count = 9);
};

// rows ordered by (theta, g0, schedule) index; failures are recorded per row
std::vector<ToyRecord> run_toy_experiment(const ToyExperimentConfig& config);

// ---- cloning protocol on the two eigenmodes ----

struct CloneConfig {
    int dim = 16;
    double beta = 1.0;
    double sigma_w2 = 2.0;
    double sigma2 = 0.1;
    double m2 = 0.5;  // m_plus^2 = m_minus^2, independent labels per mode
    double horizon = 3.0;
    int steps = 800;
    std::vector<double> scan_times = default_scan_times();
    int repeats = 5;
    int batch = 128;
    int baseline_factor = 4;
    double phi_star = 0.55;
    double conf = 0.95;
    std::uint64_t seed = 1;
    int jobs = 1;

    void validate() const;
    ModelSpec model(double g) const;
    MixtureInit mixture() const;
    static std::vector<double> default_scan_times(int count = 12, double lo = 0.2, double hi = 2.4);
};

struct AgreementCurve {
    std::vector<double> scan_times;
    std::vector<std::size_t> agree;
    std::size_t n_pairs = 0;
    std::vector<double> phi_raw;
    std::vector<double> wilson_low;
    std::vector<double> wilson_high;
    std::vector<double> phi_excess;
    std::vector<double> excess_low;
    std::vector<double> excess_high;
    std::size_t baseline_agree = 0;
    std::size_t baseline_pairs = 0;
    double baseline = 0.0;
    std::optional<double> crossing;       // censored when absent
    std::optional<double> crossing_low;   // from the lower Wilson curve
    std::optional<double> crossing_high;  // from the upper Wilson curve

    std::optional<double> ci_width() const;
};

struct CloneOutcome {
    double g = 0.0;
    AgreementCurve u;
    AgreementCurve v;

    // t_spec_u - t_spec_v
    std::optional<double> gap() const;
    // sum of the two crossing-interval widths
    std::optional<double> combined_ci_width() const;
};

// Master reverse paths are cached at the scan times; two clones continue from
// each snapshot with fresh noise. Labels: sign of the final mode projection on
// the mode's mean direction.
CloneOutcome clone_agreement(const ModelSpec& spec, const MixtureInit& init, const CloneConfig& config);

std::vector<CloneOutcome> run_clone_experiment(const CloneConfig& config, const std::vector<double>& g_values);

}  // namespace oudiff
