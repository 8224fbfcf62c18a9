#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "oudiff/sampler.hpp"

namespace oudiff {

struct Interval {
    double low = 0.0;
    double high = 1.0;
};

Interval wilson_interval(std::size_t k, std::size_t n, double conf = 0.95);

// (phi - baseline) / (1 - baseline)
double excess_agreement(double phi, double baseline);

struct CosineCurve {
    std::vector<double> values;
    std::vector<std::size_t> counts;  // paths contributing at each time
};

// series[path][time] is a mode vector; the last time is the final snapshot.
// Paths whose vector (or final vector) is zero are left out at that time.
CosineCurve cosine_to_final(const std::vector<std::vector<std::vector<double>>>& series);

enum class Interpolation { none, linear };

// max{t : curve(t) >= tau}. With linear interpolation the crossing is placed
// between that point and the next larger time. Empty when never reached.
std::optional<double> crossing_time(std::span<const double> times, std::span<const double> curve, double tau,
                                    Interpolation interp = Interpolation::none);

// t_v(tau) - t_u(tau); empty if either crossing is censored
std::optional<double> sync_gap(std::span<const double> times, std::span<const double> cu,
                               std::span<const double> cv, double tau);

std::vector<double> ghosting_index(std::span<const double> cu, std::span<const double> ca,
                                   std::span<const double> cb);

struct ToyMetrics {
    double accuracy = 0.0;
    double mse = 0.0;
    double nll = 0.0;
    std::size_t correct = 0;
    std::size_t n = 0;
};

struct ConditionalPair;
struct MomentState;

// moments: the joint moments at t = 0 (C(0) = Sigma0)
ToyMetrics toy_metrics(std::span<const ConditionalPair> pairs, const MeanVectors& means, const MomentState& moments0);

}  // namespace oudiff
