#pragma once

#include <string_view>

#include "oudiff/model.hpp"
#include "oudiff/speciation.hpp"

namespace oudiff {

struct CollapseParams {
    double alpha = 1.0;  // log n / (2d)
    ModelSpec spec;
    MixtureInit init;

    double ratio() const { return init.sigma2_x / spec.sigma_w2; }

    // sigma^2 = ratio * sigma_w2 on both channels, no means (collapse ignores them)
    static CollapseParams from_ratio(double alpha, double ratio, const ModelSpec& spec);
};

double alpha_from_samples(double n, int d);

enum class CollapseKind { joint_symmetric, mode_plus, mode_minus, joint_aniso, conditional_y_given_x };
std::string_view to_string(CollapseKind kind);

struct CollapseResult {
    double t_c = 0.0;
    double residual = 0.0;
    CollapseKind kind = CollapseKind::joint_symmetric;
};

struct Chi {
    double plus = 0.0;
    double minus = 0.0;
};

Chi chi(const CollapseParams& params, double t);
// Lambda_t(beta_rem)
double cgf(const CollapseParams& params, double beta_rem, double t);
// I_t(u_min) = -Lambda_t(1) - 1/2
double rate_at_saddle(const CollapseParams& params, double t);

CollapseResult collapse_time_symmetric(const CollapseParams& params);
CollapseResult collapse_time_mode(const CollapseParams& params, Mode mode);
double collapse_bound(const CollapseParams& params);
// alpha = 1/4 log(det C / det Q)
CollapseResult collapse_time_det(const CollapseParams& params);
// alpha = 1/2 log(C_{y|x} / Q_{y|x})
CollapseResult collapse_time_conditional(const CollapseParams& params);

}  // namespace oudiff
