#include "oudiff/block2.hpp"

#include <algorithm>
#include <cmath>

#include "oudiff/error.hpp"

namespace oudiff {

namespace {

constexpr double kSingularScale = 1e-300;

bool equal_diagonal(const Block2& m) {
    return std::abs(m.a11 - m.a22) <= 1e-15 * std::max(std::abs(m.a11), std::abs(m.a22));
}

}  // namespace

bool Block2::is_finite() const {
    return std::isfinite(a11) && std::isfinite(a12) && std::isfinite(a21) && std::isfinite(a22);
}

bool Block2::is_symmetric(double tol) const {
    return std::abs(a12 - a21) <= tol * std::max(1.0, max_abs());
}

double Block2::max_abs() const {
    return std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
}

Block2 operator+(const Block2& a, const Block2& b) {
    return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
}

Block2 operator-(const Block2& a, const Block2& b) {
    return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
}

Block2 operator*(const Block2& a, const Block2& b) {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

Block2 operator*(double s, const Block2& a) { return {s * a.a11, s * a.a12, s * a.a21, s * a.a22}; }

Vec2 operator*(const Block2& a, const Vec2& v) {
    return {a.a11 * v.x + a.a12 * v.y, a.a21 * v.x + a.a22 * v.y};
}

double max_abs_diff(const Block2& a, const Block2& b) { return (a - b).max_abs(); }

double frobenius_dot(const Block2& a, const Block2& b) {
    return a.a11 * b.a11 + a.a12 * b.a12 + a.a21 * b.a21 + a.a22 * b.a22;
}

Block2 congruence(const Block2& a, const Block2& b) { return a * b * a.transposed(); }

Block2 ModeDecomposition::compose(double c_plus, double c_minus) {
    const double s = 0.5 * (c_plus + c_minus);
    const double d = 0.5 * (c_plus - c_minus);
    return {s, d, d, s};
}

ModeDecomposition spectral_decompose(const Block2& m) {
    if (!m.is_finite()) fail(Errc::invalid_argument, "spectral_decompose: non-finite entries");
    if (m.a12 != m.a21 || !equal_diagonal(m))
        fail(Errc::unsupported_shape, "spectral_decompose: expected [[a,b],[b,a]]");
    ModeDecomposition out;
    out.lambda_plus = m.a11 + m.a12;
    out.lambda_minus = m.a11 - m.a12;
    const double r = 1.0 / std::sqrt(2.0);
    out.v_plus = {r, r};
    out.v_minus = {r, -r};
    out.tau_plus = -2.0 * out.lambda_plus;
    out.tau_minus = -2.0 * out.lambda_minus;
    return out;
}

Block2 mat_exp(const Block2& m, double t) {
    if (!m.is_finite() || !std::isfinite(t)) fail(Errc::invalid_argument, "mat_exp: non-finite input");
    if (m.a12 == m.a21 && equal_diagonal(m)) {
        const ModeDecomposition md = spectral_decompose(m);
        return ModeDecomposition::compose(std::exp(md.lambda_plus * t), std::exp(md.lambda_minus * t));
    }
    if (m.a12 == 0.0 && equal_diagonal(m)) {
        // a I + N with N nilpotent
        const double e = std::exp(m.a11 * t);
        return {e, 0.0, e * m.a21 * t, e};
    }
    fail(Errc::unsupported_shape, "mat_exp: expected symmetric or lower-triangular block with equal diagonal");
}

Block2 block_inverse(const Block2& m) {
    if (!m.is_finite()) fail(Errc::invalid_argument, "block_inverse: non-finite entries");
    const double det = m.det();
    const double scale = m.max_abs();
    if (!(std::abs(det) >= kSingularScale * scale * scale) || scale == 0.0)
        fail(Errc::singular_matrix, "block_inverse: determinant below threshold");
    const double inv = 1.0 / det;
    return {m.a22 * inv, -m.a12 * inv, -m.a21 * inv, m.a11 * inv};
}

SchurConditional schur_conditional(const Block2& c) {
    if (!(c.a11 > 0.0) || !(c.det() > 0.0))
        fail(Errc::not_positive_definite, "schur_conditional: block is not positive definite");
    const double gain = c.a21 / c.a11;
    return {c.a22 - gain * c.a12, gain};
}

Block2 cholesky(const Block2& c) {
    if (!(c.a11 > 0.0)) fail(Errc::not_positive_definite, "cholesky: c11 <= 0");
    const double l11 = std::sqrt(c.a11);
    const double l21 = c.a21 / l11;
    const double rem = c.a22 - l21 * l21;
    if (rem < 0.0) fail(Errc::not_positive_definite, "cholesky: negative Schur complement");
    return {l11, 0.0, l21, std::sqrt(rem)};
}

}  // namespace oudiff
