#pragma once

#include <string>
#include <vector>

#include "fdshape/genplant.hpp"
#include "fdshape/lmi.hpp"
#include "fdshape/sdp.hpp"

namespace fdshape {

// Filter matrices after the loop-absorbing change of variables. For D22 = 0
// these coincide with the filter realization itself.
struct TransformedFilterVars {
    Matrix A_c2, B_c2, C_c2, D_c2;
};

// X2 Y2' = I - X1 Y1 with Y2 = I; always invertible when the coupling
// inequality holds strictly.
struct MatrixCompletion {
    Matrix X2, Y2;
};

// Decision variables of the synthesis inequalities, unpacked.
struct DecisionVars {
    Matrix X1, Y1, An, Bn, Cn, Dn;
    double nu2 = 0.0;
};

TransformedFilterVars forward_cov(const StateSpace& Q, const Matrix& D22);
StateSpace reverse_cov(const TransformedFilterVars& t, const Matrix& D22);

MatrixCompletion make_completion(const Matrix& X1, const Matrix& Y1);
TransformedFilterVars complete_and_extract(const DecisionVars& v,
                                           const GeneralizedPlant& P);

struct SynthesisConfig {
    double gamma0 = 1.0;
    double mu = 1e-4;          // plateau tolerance on nu^2
    int max_outer_iters = 30;
    bool shared_lyapunov = true;  // one (X1,Y1) across both bounds
    // Comparison mode: also carry the (constant) disturbance block into the
    // slack update. It never binds there, so results should coincide.
    bool step2_include_disturbance_block = false;
    std::string disturbance_channel = "d";
    std::string fault_channel = "f";
    std::string residual_channel = "e";
    // Synthesis LMIs are larger and tighter than the analysis ones; give
    // each solve a bigger Newton budget than the solver default.
    SolverOptions solver = [] {
        SolverOptions o;
        o.max_iter = 1500;
        return o;
    }();
};

struct IterationRecord {
    int iter = 0;
    double nu2_step1 = 0.0;  // after the filter-variable update
    double nu2_step2 = 0.0;  // after the slack update
};

enum class SynthesisStatus { Converged, NonconvergedIteration };

struct VerifyResult {
    double hinf_disturbance = 0.0;
    double hminus_fault = 0.0;
    double J = 0.0;  // hminus_fault / hinf_disturbance
    std::vector<double> omegas;
    std::vector<double> smax_disturbance;
    std::vector<double> smin_fault;
    StateSpace closed;
};

struct SynthesisResult {
    StateSpace Q;
    double nu_certified = 0.0;
    double gamma0 = 0.0;
    SynthesisStatus status = SynthesisStatus::Converged;
    std::string message;
    std::vector<IterationRecord> history;
    DecisionVars vars;
    SlackVars slacks;
    MatrixCompletion completion;
    GeneralizedPlant balanced;  // plant the certificates refer to
    VerifyResult check;
};

// Alternating LMI scheme: slacks fixed -> maximize nu^2 over the filter
// variables; filter variables fixed -> maximize nu^2 over the slacks;
// repeat until the nu^2 gain drops below mu. Throws InfeasibleAtStep1 when
// no filter exists at the requested gamma0 (after one slack-rescale retry).
SynthesisResult synthesize(const GeneralizedPlant& P,
                           const SynthesisConfig& cfg = {});

// Closed-loop frequency-domain measurement of both channel norms.
VerifyResult verify(const GeneralizedPlant& P, const StateSpace& Q,
                    const std::string& disturbance_channel = "d",
                    const std::string& fault_channel = "f",
                    const std::string& residual_channel = "e");

// Rescales the filter output by the (rational) inverse of the achieved
// disturbance response times gamma0, making the disturbance bound tight at
// every frequency. Requires scalar residual and disturbance channels.
StateSpace post_scale_update(const GeneralizedPlant& P, const StateSpace& Q,
                             double gamma0,
                             const std::string& disturbance_channel = "d",
                             const std::string& residual_channel = "e");

// Sub-system picking one w/z channel pair of a closed loop whose inputs and
// outputs are laid out by the plant's channel spans.
StateSpace take_channel(const StateSpace& sys, const ChannelSpan& w,
                        const ChannelSpan& z);

}  // namespace fdshape
