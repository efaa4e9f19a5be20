#pragma once

#include <map>
#include <string>
#include <vector>

#include "fdshape/genplant.hpp"
#include "fdshape/state_space.hpp"

namespace fdshape {

// Flat indexing over a set of named matrix decision variables. Symmetric
// variables store their upper triangle only; index() canonicalizes (i, j).
class VarSpace {
  public:
    struct Entry {
        std::string name;
        Eigen::Index rows = 0, cols = 0;
        bool symmetric = false;
        Eigen::Index offset = 0;
    };

    Eigen::Index add_symmetric(const std::string& name, Eigen::Index n);
    Eigen::Index add_matrix(const std::string& name, Eigen::Index r,
                            Eigen::Index c);
    Eigen::Index add_scalar(const std::string& name);

    Eigen::Index dim() const { return dim_; }
    bool has(const std::string& name) const;
    const Entry& info(const std::string& name) const;
    Eigen::Index index(const std::string& name, Eigen::Index i,
                       Eigen::Index j) const;

    Matrix unpack(const Vector& x, const std::string& name) const;
    void pack(Vector& x, const std::string& name, const Matrix& value) const;

    const std::vector<Entry>& entries() const { return vars_; }

  private:
    std::vector<Entry> vars_;
    Eigen::Index dim_ = 0;
};

enum class Sense {
    NegativeDefinite,      // block(x) < 0, margin-shifted
    PositiveDefinite,      // block(x) > 0, margin-shifted
    PositiveSemidefinite,  // block(x) >= 0
};

// Default strictness shift, scaled by the constant-term magnitude at build.
inline constexpr double kStrictEps = 1e-7;

// One affine symmetric matrix constraint: constant + sum_i x_i * coeff_i,
// compared against zero in the stored sense. Coefficients are kept sparse
// (upper triangle, mirror implied).
struct LmiBlock {
    struct Term {
        int r, c;
        double v;
    };
    struct Coeff {
        Eigen::Index var;
        std::vector<Term> terms;
    };

    std::string name;
    Eigen::Index size = 0;
    Sense sense = Sense::NegativeDefinite;
    double margin = 0.0;
    Matrix constant;
    std::vector<Coeff> coeffs;

    // constant + sum x_i A_i (no sense flip, no margin).
    Matrix evaluate(const Vector& x) const;
};

// Accumulates sub-block terms of a symmetric block matrix partitioned into
// segments. Off-diagonal placements mirror automatically; diagonal
// placements are taken literally (the formulas there are already
// symmetric sums).
class BlockBuilder {
  public:
    BlockBuilder(const VarSpace& vs, std::vector<Eigen::Index> segments);

    void add_const(int bi, int bj, const Matrix& M);
    // sign * pre * V * post (or V^T) into sub-block (bi, bj).
    void add_term(int bi, int bj, const Matrix& pre, const std::string& var,
                  const Matrix& post, bool transpose_var = false,
                  double sign = 1.0);
    // M * v for a scalar variable v.
    void add_scalar_term(int bi, int bj, const std::string& var,
                         const Matrix& M);

    LmiBlock build(const std::string& name, Sense sense,
                   double eps = kStrictEps) const;

  private:
    const VarSpace& vs_;
    std::vector<Eigen::Index> off_;
    Eigen::Index size_ = 0;
    Matrix constant_;
    std::map<Eigen::Index, Matrix> dense_;

    Matrix& slot(Eigen::Index var);
};

// ---------------------------------------------------------------------------
// Analysis inequalities.

struct LmiProblem;  // defined in sdp.hpp

// Bounded-real lemma feasibility: exists X > 0 with the standard 3x3 block
// negative definite iff the stable system has Hinf norm < gamma.
LmiProblem brl_analysis_lmi(const StateSpace& sys, double gamma);

// Minimum-gain inequality at level nu (sufficient only): X >= 0 plus the
// 3x3 block. Feasibility certifies sigma_min(G(iw)) >= nu for all omega.
LmiProblem mingain_analysis_lmi(const StateSpace& sys, double nu);

// ---------------------------------------------------------------------------
// Synthesis inequalities in the transformed filter variables.

// Plant data with one w/z channel selected, as consumed by the builders.
struct SynthesisData {
    Matrix A, B2, C2;
    Matrix B1j, C1j, D11j, D12j, D21j;
};
SynthesisData channel_data(const GeneralizedPlant& P,
                           const ChannelSelector& sel);

struct SlackVars {
    Matrix X;  // p_j x m_j
    Matrix Y;  // p_j x n
    Matrix Z;  // p_j x n
};

// Variable names used by the synthesis builders; `suffix` lets the relaxed
// (independent Lyapunov) mode address a second pair.
struct SynthVarNames {
    std::string X1 = "X1", Y1 = "Y1";
    std::string An = "An", Bn = "Bn", Cn = "Cn", Dn = "Dn";
    std::string nu2 = "nu2";
};

void add_filter_vars(VarSpace& vs, Eigen::Index n, Eigen::Index m_u,
                     Eigen::Index p_y, const SynthVarNames& names);

// Disturbance-side bound: 4x4 block, affine in the filter variables,
// negative definite, at fixed gamma.
LmiBlock build_M_lmi(const VarSpace& vs, const SynthesisData& d, double gamma,
                     const SynthVarNames& names, double eps = kStrictEps);

// Fault-side bound with the slack triple frozen: affine in the filter
// variables and nu^2.
LmiBlock build_N_bmi_fixed_slack(const VarSpace& vs, const SynthesisData& d,
                                 const SlackVars& slack,
                                 const SynthVarNames& names,
                                 double eps = kStrictEps);

// Same inequality with the filter variables frozen: affine in the slacks
// and nu^2. Variable names fixed: "Xs", "Ys", "Zs", "nu2".
LmiBlock build_N_bmi_fixed_vars(const VarSpace& vs, const SynthesisData& d,
                                const Matrix& X1, const Matrix& Y1,
                                const Matrix& An, const Matrix& Bn,
                                const Matrix& Cn, const Matrix& Dn,
                                double eps = kStrictEps);

// [X1 I; I Y1] > 0.
LmiBlock build_coupling_lmi(const VarSpace& vs, Eigen::Index n,
                            const SynthVarNames& names,
                            double eps = kStrictEps);

}  // namespace fdshape
