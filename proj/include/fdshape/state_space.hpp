#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "fdshape/errors.hpp"

namespace fdshape {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

// Continuous-time LTI system x' = Ax + Bu, y = Cx + Du.
// n = 0 (static gain) is allowed everywhere.
struct StateSpace {
    Matrix A, B, C, D;

    StateSpace() = default;
    StateSpace(Matrix A_, Matrix B_, Matrix C_, Matrix D_);

    // Static gain.
    explicit StateSpace(Matrix D_);

    Eigen::Index order() const { return A.rows(); }
    Eigen::Index inputs() const { return B.cols(); }
    Eigen::Index outputs() const { return C.rows(); }
};

// Margin used by every internal stability decision: Re(lambda) < -margin.
inline constexpr double kStabilityMargin = 1e-9;

bool is_hurwitz(const Matrix& A, double margin = kStabilityMargin);
bool is_hurwitz(const StateSpace& sys, double margin = kStabilityMargin);

// G(s0) = C (s0 I - A)^{-1} B + D at an arbitrary complex point.
// Throws SingularResolvent if s0 is (numerically) an eigenvalue of A.
ComplexMatrix evaluate(const StateSpace& sys, Complex s0);

// Frequency response at s = i*omega.
ComplexMatrix freq_response(const StateSpace& sys, double omega);

// y = b(a(u)), states of a first.
StateSpace series(const StateSpace& a, const StateSpace& b);
StateSpace add(const StateSpace& a, const StateSpace& b);
StateSpace negate(const StateSpace& sys);
// [a; b]: shared input, stacked outputs.
StateSpace vertcat(const StateSpace& a, const StateSpace& b);
// [a, b]: stacked inputs, shared output dimension (summed outputs are NOT
// implied; inputs are independent).
StateSpace horzcat(const StateSpace& a, const StateSpace& b);

// Output scaling: (alpha*C, alpha*D).
StateSpace scale_output(const StateSpace& sys, double alpha);

// Deterministic power-of-two diagonal state scaling that balances the row
// and column norms of [A B; C 0]. Exact similarity, transfer is preserved
// bit-for-bit up to the (exact) scalings.
StateSpace balance_states(const StateSpace& sys);

// Log-spaced evaluation grid; always kept sorted ascending, omega >= 0.
struct FrequencyGrid {
    std::vector<double> omegas;

    static FrequencyGrid logspace(double lo, double hi, int count);
    // {0} + 400 points on [1e-3, 1e4] rad/s.
    static FrequencyGrid standard();
};

}  // namespace fdshape
