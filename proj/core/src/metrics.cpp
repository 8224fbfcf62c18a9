#include "oudiff/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>

#include "oudiff/conditional.hpp"
#include "oudiff/error.hpp"

namespace oudiff {

Interval wilson_interval(std::size_t k, std::size_t n, double conf) {
    if (n == 0 || k > n) fail(Errc::invalid_argument, "wilson_interval: need 0 <= k <= n, n >= 1");
    if (!(conf > 0.0 && conf < 1.0)) fail(Errc::invalid_argument, "wilson_interval: conf must lie in (0, 1)");
    const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * conf);
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double centre = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    Interval iv{std::clamp(centre - half, 0.0, 1.0), std::clamp(centre + half, 0.0, 1.0)};
    if (k == 0) iv.low = 0.0;
    if (k == n) iv.high = 1.0;
    return iv;
}

double excess_agreement(double phi, double baseline) {
    if (!(baseline < 1.0)) fail(Errc::invalid_argument, "excess_agreement: baseline must be < 1");
    return (phi - baseline) / (1.0 - baseline);
}

CosineCurve cosine_to_final(const std::vector<std::vector<std::vector<double>>>& series) {
    if (series.empty()) fail(Errc::invalid_argument, "cosine_to_final: empty batch");
    const std::size_t nt = series.front().size();
    CosineCurve out{std::vector<double>(nt, 0.0), std::vector<std::size_t>(nt, 0)};
    for (const auto& path : series) {
        if (path.size() != nt) fail(Errc::invalid_argument, "cosine_to_final: ragged time series");
        const auto& fin = path.back();
        const double nf = std::sqrt(std::inner_product(fin.begin(), fin.end(), fin.begin(), 0.0));
        if (nf == 0.0) continue;
        for (std::size_t t = 0; t < nt; ++t) {
            const auto& v = path[t];
            if (v.size() != fin.size()) fail(Errc::invalid_argument, "cosine_to_final: dimension mismatch");
            const double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
            if (nv == 0.0) continue;
            const double c = std::inner_product(v.begin(), v.end(), fin.begin(), 0.0) / (nv * nf);
            out.values[t] += std::clamp(c, -1.0, 1.0);
            ++out.counts[t];
        }
    }
    for (std::size_t t = 0; t < nt; ++t)
        out.values[t] = out.counts[t] ? out.values[t] / out.counts[t] : std::nan("");
    return out;
}

std::optional<double> crossing_time(std::span<const double> times, std::span<const double> curve, double tau,
                                    Interpolation interp) {
    if (times.size() != curve.size()) fail(Errc::invalid_argument, "crossing_time: grid mismatch");
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    for (std::size_t r = order.size(); r-- > 0;) {
        const std::size_t i = order[r];
        if (!(curve[i] >= tau)) continue;
        if (interp == Interpolation::none || r + 1 == order.size()) return times[i];
        const std::size_t j = order[r + 1];
        const double c0 = curve[i], c1 = curve[j];
        if (!std::isfinite(c1) || c0 == c1) return times[i];
        return times[i] + (c0 - tau) / (c0 - c1) * (times[j] - times[i]);
    }
    return std::nullopt;
}

std::optional<double> sync_gap(std::span<const double> times, std::span<const double> cu,
                               std::span<const double> cv, double tau) {
    const auto tu = crossing_time(times, cu, tau);
    const auto tv = crossing_time(times, cv, tau);
    if (!tu || !tv) return std::nullopt;
    return *tv - *tu;
}

std::vector<double> ghosting_index(std::span<const double> cu, std::span<const double> ca,
                                   std::span<const double> cb) {
    if (cu.size() != ca.size() || cu.size() != cb.size())
        fail(Errc::invalid_argument, "ghosting_index: grid mismatch");
    std::vector<double> gi(cu.size());
    for (std::size_t i = 0; i < cu.size(); ++i) gi[i] = 2.0 * cu[i] - ca[i] - cb[i];
    return gi;
}

ToyMetrics toy_metrics(std::span<const ConditionalPair> pairs, const MeanVectors& means,
                       const MomentState& moments0) {
    if (pairs.empty()) fail(Errc::invalid_argument, "toy_metrics: no pairs");
    ToyMetrics m;
    m.n = pairs.size();
    double se = 0.0, nll = 0.0;
    for (const ConditionalPair& p : pairs) {
        const double px = std::inner_product(p.x0.begin(), p.x0.end(), means.x.begin(), 0.0);
        const double py = std::inner_product(p.y0.begin(), p.y0.end(), means.y.begin(), 0.0);
        const int sx = px >= 0.0 ? 1 : -1;
        const int sy = py >= 0.0 ? 1 : -1;
        if (sx == sy) ++m.correct;
        for (std::size_t i = 0; i < p.y0.size(); ++i) {
            const double r = p.y0[i] - sx * means.y[i];
            se += r * r;
        }
        nll -= conditional_log_density(moments0, means, p.x0, p.y0);
    }
    const double n = static_cast<double>(m.n);
    m.accuracy = m.correct / n;
    m.mse = 0.5 * se / n;
    m.nll = nll / n;
    return m;
}

}  // namespace oudiff
