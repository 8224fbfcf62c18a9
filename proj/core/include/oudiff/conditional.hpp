#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oudiff/model.hpp"
#include "oudiff/moments.hpp"
#include "oudiff/sampler.hpp"

namespace oudiff {

// grad_y log P_t(y | x) for the two-component mixture, given the joint
// moments at t. The mixture stays Gaussian in y with variance C_{y|x}.
void conditional_score(const MomentState& moments, const MeanVectors& means, std::span<const double> x,
                       std::span<const double> y, std::span<double> out);
std::vector<double> conditional_score(const MomentState& moments, const MeanVectors& means,
                                      std::span<const double> x, std::span<const double> y);
double conditional_log_density(const MomentState& moments, const MeanVectors& means, std::span<const double> x,
                               std::span<const double> y);

struct ToyConfig {
    int dim = 32;
    double beta = 1.0;
    double sigma_w2 = 2.0;
    double horizon = 2.0;
    int steps = 800;
    double sigma2 = 1.0;  // data variance on both channels
    double m = 0.3;       // per-dimension mean norm of mu_x and mu_y
    double theta = 0.0;   // angle between mu_x and mu_y
    ScheduleSpec schedule{ScheduleKind::constant, 0.0, 1.0, 2.0};
    int trials = 2000;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;  // trial streams derive from (seed, stream, trial)
    bool final_step_noise = false;

    void validate() const;
    ModelSpec model() const;
    MixtureInit mixture() const;
};

struct ConditionalPair {
    State x0;
    State y0;  // generated y at t = 0
    int label = 0;
};

// Per trial: X is simulated forward with exact OU transitions, then Y is
// integrated backward from the stationary conditional given X_T.
std::vector<ConditionalPair> conditional_reverse_sample(const ToyConfig& config, int jobs = 1);

}  // namespace oudiff
