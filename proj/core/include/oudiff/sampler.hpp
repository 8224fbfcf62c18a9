#pragma once

#include <array>
#include <map>
#include <span>
#include <vector>

#include "oudiff/model.hpp"
#include "oudiff/rng.hpp"

namespace oudiff {

// A state in R^{2d}: x block in [0, d), y block in [d, 2d).
using State = std::vector<double>;

struct MeanVectors {
    std::vector<double> x;
    std::vector<double> y;
};

// Shared layout: mu_x = sqrt(d) m_x e1, mu_y = sqrt(d) m_y (cos(theta) e1 + sin(theta) e2),
// so the per-dimension norms and the angle reproduce MixtureInit::mean_gram.
MeanVectors materialize_means(const MixtureInit& init);

// Mean directions on the common (u) and difference (v) modes, sqrt(d) m_pm e1 each.
struct ModeVectors {
    std::vector<double> plus;
    std::vector<double> minus;
};
ModeVectors materialize_mode_means(const MixtureInit& init);

// u = (x + y)/sqrt2, v = (x - y)/sqrt2
struct ModePair {
    std::vector<double> u;
    std::vector<double> v;
};
ModePair mode_projection(std::span<const double> z);
State from_modes(std::span<const double> u, std::span<const double> v);

// Noise with Var(eps_u) = 1 - g, Var(eps_v) = 1 + g, returned in the x/y basis
struct NoisePair {
    std::vector<double> a;
    std::vector<double> b;
};
NoisePair mode_shaped_noise(double g, int dim, Rng& rng);

struct DatasetEmpirical {
    std::vector<State> points;
    std::vector<int> labels;

    int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size() / 2); }
    void validate() const;
};

// z0 ~ p0 with its label(s): {s, s} for shared layout, {s_u, s_v} for per-mode
State draw_initial(const MixtureInit& init, Rng& rng, std::array<int, 2>* labels = nullptr);
DatasetEmpirical draw_dataset(const MixtureInit& init, std::size_t n, Rng& rng);

class ScoreField {
public:
    virtual ~ScoreField() = default;
    virtual int dim() const = 0;
    virtual void score(std::span<const double> z, double t, std::span<double> out) const = 0;
    virtual double log_density(std::span<const double> z, double t) const = 0;
};

// Exact score of the forward-evolved mixture. Shared layout: two components
// +-mu(t) with covariance C(t). Per-mode layout: product over the two modes.
class PopulationScore final : public ScoreField {
public:
    PopulationScore(const ModelSpec& spec, const MixtureInit& init);
    PopulationScore(const ModelSpec& spec, const MixtureInit& init, MeanVectors means);

    int dim() const override { return dim_; }
    void score(std::span<const double> z, double t, std::span<double> out) const override;
    double log_density(std::span<const double> z, double t) const override;

private:
    ModelSpec spec_;
    MixtureInit init_;
    MeanVectors means_;
    ModeVectors mode_means_;
    int dim_;
};

class EmpiricalScore final : public ScoreField {
public:
    EmpiricalScore(const ModelSpec& spec, DatasetEmpirical data);

    int dim() const override { return data_.dim(); }
    void score(std::span<const double> z, double t, std::span<double> out) const override;
    double log_density(std::span<const double> z, double t) const override;
    // posterior weights over training points, sum to 1
    std::vector<double> weights(std::span<const double> z, double t) const;
    const DatasetEmpirical& data() const { return data_; }

private:
    ModelSpec spec_;
    DatasetEmpirical data_;
};

State population_score(const ModelSpec& spec, const MixtureInit& init, std::span<const double> z, double t);
double population_log_density(const ModelSpec& spec, const MixtureInit& init, std::span<const double> z, double t);

struct EmpiricalScoreValue {
    State score;
    std::vector<double> weights;
};
EmpiricalScoreValue empirical_score(const DatasetEmpirical& data, const ModelSpec& spec, std::span<const double> z,
                                    double t);

enum class Record { endpoints, full };

struct NoiseMode {
    enum class Kind { isotropic, mode_shaped } kind = Kind::isotropic;
    double g = 0.0;  // mode_shaped only
};

struct SampleOptions {
    double horizon = 2.0;  // T
    int steps = 800;       // N, h = T / N
    Record record = Record::endpoints;
    std::vector<double> scan_times;  // snapshots, snapped to the nearest grid time
    NoiseMode noise;
    bool final_step_noise = false;  // reverse samplers: noise on the step that lands on t = 0

    void validate() const;
    double step() const { return horizon / steps; }
    double forward_time(int k) const { return horizon * k / steps; }
    double reverse_time(int k) const { return horizon * (steps - k) / steps; }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<State> states;
    std::map<double, State> scan_cache;
    std::array<int, 2> labels{0, 0};

    const State& final_state() const { return states.back(); }
};

// grid index of the snapshot taken for scan time t on the reverse grid
int reverse_index(const SampleOptions& opts, double t);

Trajectory forward_sample(const ModelSpec& spec, const State& z0, const SampleOptions& opts, Rng& rng);
Trajectory forward_sample(const ModelSpec& spec, const MixtureInit& init, const SampleOptions& opts, Rng& rng);

// Start from the stationary law of the forward process.
Trajectory reverse_sample(const ModelSpec& spec, const ScoreField& score, const SampleOptions& opts, Rng& rng);
// Continue from `start` located at reverse grid index `start_index`.
Trajectory reverse_continue(const ModelSpec& spec, const ScoreField& score, const SampleOptions& opts, Rng& rng,
                            const State& start, int start_index);

// Probability-flow ODE, RK4 from T to 0. Deterministic given `start`.
Trajectory flow_sample(const ModelSpec& spec, const ScoreField& score, const SampleOptions& opts, const State& start);

State draw_stationary(const ModelSpec& spec, Rng& rng);

}  // namespace oudiff
