#pragma once

#include <vector>

#include "fdshape/state_space.hpp"

namespace fdshape {

// SISO rational transfer function. Coefficients in descending powers of s,
// denominator kept monic. Improper fractions are representable; only the
// realization step insists on properness.
struct RationalTF {
    std::vector<double> num{0.0};
    std::vector<double> den{1.0};

    RationalTF() = default;
    RationalTF(std::vector<double> num_, std::vector<double> den_);
    static RationalTF constant(double k);

    int num_degree() const { return static_cast<int>(num.size()) - 1; }
    int den_degree() const { return static_cast<int>(den.size()) - 1; }
    bool is_proper() const { return num_degree() <= den_degree(); }
    bool is_strictly_proper() const { return num_degree() < den_degree(); }
    bool is_zero() const { return num.size() == 1 && num[0] == 0.0; }

    Complex evaluate(Complex s) const;
    double evaluate_mag(double omega) const;
};

// Polynomial helpers (descending coefficients).
std::vector<double> poly_mul(const std::vector<double>& a,
                             const std::vector<double>& b);
std::vector<double> poly_add(const std::vector<double>& a,
                             const std::vector<double>& b);
std::vector<double> poly_trim(std::vector<double> a);
std::vector<Complex> poly_roots(const std::vector<double>& a);

// Relative root-matching tolerance used by every cancellation decision:
// two roots r1, r2 coincide when |r1 - r2| <= tol * (1 + |r1|).
inline constexpr double kCancelTol = 1e-7;

// Exact pole-zero cancellation at the rational level (root pairing, then
// real-coefficient reconstruction). Conjugate closure is preserved.
RationalTF cancel(const RationalTF& f);

RationalTF tf_add(const RationalTF& a, const RationalTF& b);
RationalTF tf_sub(const RationalTF& a, const RationalTF& b);
RationalTF tf_mul(const RationalTF& a, const RationalTF& b);
RationalTF tf_scale(const RationalTF& a, double k);
RationalTF tf_inv(const RationalTF& a);
RationalTF tf_div(const RationalTF& a, const RationalTF& b);
// g / (1 + g*c), the negative-feedback closure.
RationalTF tf_feedback(const RationalTF& g, const RationalTF& c);

// Controllable-canonical realization. Throws ImproperTransfer.
StateSpace tf_to_ss(const RationalTF& f);

// Single-input realization of a column [e_0; e_1; ...] over the least common
// denominator of the entries (shared dynamics are realized once). Throws
// ImproperTransfer if any entry is improper.
StateSpace tf_column_to_ss(const std::vector<RationalTF>& entries);

// Zero-pole-gain data for a SISO system.
struct ZpkForm {
    std::vector<Complex> zeros;
    std::vector<Complex> poles;
    double gain = 0.0;

    bool is_proper() const { return zeros.size() <= poles.size(); }
};

// Extraction from a SISO realization (poles from the state matrix, zeros
// from the system pencil, gain from a probe-point evaluation).
ZpkForm ss_to_zpk(const StateSpace& sys);

// Remove coincident zero/pole groups (tolerance kCancelTol).
ZpkForm zpk_cancel(const ZpkForm& f);

// Inverse: swap zeros and poles, reciprocal gain.
ZpkForm zpk_inv(const ZpkForm& f);

// Realization as a cascade of first/second-order sections; avoids the
// coefficient blow-up of a single high-degree companion form. Throws
// ImproperTransfer when zeros outnumber poles.
StateSpace zpk_to_ss(const ZpkForm& f);

}  // namespace fdshape
