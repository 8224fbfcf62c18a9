#pragma once

// 2x2 blocks standing for B (x) I_d. Every block in the model acts identically
// on each of the d coordinates, so the d-fold factor is never stored.

#include <array>

namespace oudiff {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Block2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    static constexpr Block2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Block2 diagonal(double a, double b) { return {a, 0.0, 0.0, b}; }
    static constexpr Block2 symmetric(double a11, double a12, double a22) {
        return {a11, a12, a12, a22};
    }

    double det() const { return a11 * a22 - a12 * a21; }
    double trace() const { return a11 + a22; }
    Block2 transposed() const { return {a11, a21, a12, a22}; }
    bool is_finite() const;
    bool is_symmetric(double tol = 0.0) const;
    bool is_lower_triangular() const { return a12 == 0.0; }
    // max |entry|, used as the scale for singularity tests
    double max_abs() const;
};

Block2 operator+(const Block2& a, const Block2& b);
Block2 operator-(const Block2& a, const Block2& b);
Block2 operator*(const Block2& a, const Block2& b);
Block2 operator*(double s, const Block2& a);
Vec2 operator*(const Block2& a, const Vec2& v);

double max_abs_diff(const Block2& a, const Block2& b);
// sum_ij a_ij b_ij
double frobenius_dot(const Block2& a, const Block2& b);
// a b a^T
Block2 congruence(const Block2& a, const Block2& b);

struct ModeDecomposition {
    double lambda_plus = 0.0;
    double lambda_minus = 0.0;
    Vec2 v_plus;
    Vec2 v_minus;
    double tau_plus = 0.0;   // -2 lambda_plus
    double tau_minus = 0.0;  // -2 lambda_minus

    static Block2 projector_plus() { return {0.5, 0.5, 0.5, 0.5}; }
    static Block2 projector_minus() { return {0.5, -0.5, -0.5, 0.5}; }
    // c_plus P_plus + c_minus P_minus
    static Block2 compose(double c_plus, double c_minus);
};

Block2 mat_exp(const Block2& m, double t);
ModeDecomposition spectral_decompose(const Block2& m);
Block2 block_inverse(const Block2& m);

struct SchurConditional {
    double c_y_given_x = 0.0;
    double gain = 0.0;
};
SchurConditional schur_conditional(const Block2& c);

// Cholesky factor L (lower) with L L^T = c
Block2 cholesky(const Block2& c);

}  // namespace oudiff
