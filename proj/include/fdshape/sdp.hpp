#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "fdshape/lmi.hpp"

namespace fdshape {

// A collection of LMI blocks over one variable space, with a linear
// objective to minimize (zero objective = pure feasibility).
struct LmiProblem {
    VarSpace vars;
    std::vector<LmiBlock> blocks;
    Vector objective;  // size vars.dim(); empty means zero

    void add_block(LmiBlock b);
    void set_objective(const std::string& name, Eigen::Index i, Eigen::Index j,
                       double coeff);
    bool pure_feasibility() const;
};

struct SolverOptions {
    double gap_tol = 1e-8;           // m / t termination
    double feas_tol = 1e-8;          // allowed eigenvalue slack at the answer
    int max_iter = 200;              // total Newton step budget
    double barrier_reduction = 0.2;  // t <- t / barrier_reduction
    double armijo_c = 0.01;
    double phase1_exit_margin = 1e-2;  // stop early once this feasible
    // Every variable is confined to [-var_bound, var_bound]. This keeps the
    // feasible set compact so the analytic centers exist even when the LMIs
    // leave free directions; answers are with respect to this box. 0 turns
    // the box off.
    double var_bound = 1e6;
    bool record_iterates = false;
};

enum class SolveStatus { Optimal, Infeasible, MaxIterations, NumericalFailure };

const char* to_string(SolveStatus s);

struct SdpSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    Vector x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double gap_bound = std::numeric_limits<double>::infinity();
    // Min eigenvalue of each cone block at x, in the solver's scaled units.
    std::vector<double> block_margins;
    // Phase-1 certificate: best uniform margin found (positive = feasible).
    double phase1_margin = std::numeric_limits<double>::quiet_NaN();
    int newton_steps = 0;
    std::vector<Vector> iterates;

    // Optimal always carries a strictly feasible point. MaxIterations does
    // too, but only when phase 1 actually reached the interior first; an
    // exhausted phase 1 with a nonpositive margin proves nothing.
    bool feasible() const {
        return status == SolveStatus::Optimal ||
               (status == SolveStatus::MaxIterations && phase1_margin > 0.0);
    }
};

// Interior-point solve: phase 1 (uniform margin maximization) for a strictly
// feasible start, then a log-det barrier path on the objective. Entirely
// deterministic: same problem bytes in, same solution bytes out.
// `warm_start` seeds phase 1; it does not have to be feasible, but a nearly
// feasible guess saves most of the climb.
SdpSolution solve_sdp(const LmiProblem& prob, const SolverOptions& opts = {},
                      const Vector* warm_start = nullptr);

// Phase 1 alone: maximizes s subject to every block exceeding s*I. Returns
// the margin and a strictly feasible point when one exists.
SdpSolution feasibility_phase1(const LmiProblem& prob,
                               const SolverOptions& opts = {});

// Plain-text dump of the canonicalized problem (cone form S(x) >= 0) for
// external cross-checking. Format, one record per line:
//   d <nvars> <nblocks>
//   v <var_index> <name> <row> <col>
//   o <var_index> <coeff>              objective, minimized
//   b <block_index> <size> <name>
//   e <block_index> <row> <col> <var_index> <coeff>   var -1 = constant term
// Upper-triangle entries only; the mirror is implied.
void dump_problem(const LmiProblem& prob, std::ostream& os);

}  // namespace fdshape
