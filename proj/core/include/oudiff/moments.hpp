#pragma once

#include <span>
#include <vector>

#include "oudiff/block2.hpp"
#include "oudiff/model.hpp"

namespace oudiff {

// Exact moments of the forward process at time t. The mixture means are
// tracked through the propagator: mu(t) = propagator * mu(0).
struct MomentState {
    double t = 0.0;
    Block2 propagator = Block2::identity();  // e^{Mt}, or the ODE fundamental matrix
    Block2 mean_gram;                        // per-dimension Gram of (mu_x(t), mu_y(t))
    Block2 s;                                // e^{Mt} Sigma0 e^{M^T t}
    Block2 q;                                // transition covariance
    Block2 c;                                // s + q

    Vec2 mean(const Vec2& mu0) const { return propagator * mu0; }
};

// (1 - e^{-tau t}) / tau, continuous through tau = 0
double decay_integral(double tau, double t);

// regularised lower incomplete gamma P(a, x) for a = 1, 2, 3
double incomplete_gamma_p(int a, double x);

Block2 propagator(const ModelSpec& spec, double t);
Vec2 mean_at(const ModelSpec& spec, const Vec2& mu0, double t);
Block2 transition_cov(const ModelSpec& spec, double t);
MomentState diffusion_kernel(const ModelSpec& spec, const MixtureInit& init, double t);

struct ModeKernels {
    double c_plus = 0.0;
    double c_minus = 0.0;
};
ModeKernels mode_kernels(const ModelSpec& spec, const MixtureInit& init, double t);

// K(t) = C^{-1} (M + sigma_w2 C^{-1})^{-1} C^{-1}, anisotropic closed form
Block2 kernel_K(const ModelSpec& spec, const MixtureInit& init, double t);

// RK4 on mu' = M(t) mu, Q' = MQ + QM^T + sigma_w2 I. Steps that straddle the
// schedule switch are split there, and each piece uses its midpoint coupling.
std::vector<MomentState> moments_ode(const ModelSpec& spec, const MixtureInit& init,
                                     std::span<const double> grid);

// Q(infinity) for the coupling in force at the horizon (or the constant one)
Block2 stationary_cov(const ModelSpec& spec);

}  // namespace oudiff
