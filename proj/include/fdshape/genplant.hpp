#pragma once

#include <string>
#include <vector>

#include "fdshape/rational.hpp"
#include "fdshape/state_space.hpp"

namespace fdshape {

struct ChannelSpan {
    std::string name;
    Eigen::Index offset = 0;
    Eigen::Index width = 0;
};

// Plant partitioned for filter synthesis:
//   x' = A x + B1 w + B2 u
//   z  = C1 x + D11 w + D12 u
//   y  = C2 x + D21 w + D22 u
// w carries named exogenous channels (disturbance, fault), u is the filter
// output, z the shaped target, y what the filter sees.
struct GeneralizedPlant {
    Matrix A, B1, B2, C1, C2, D11, D12, D21, D22;
    std::vector<ChannelSpan> w_channels;
    std::vector<ChannelSpan> z_channels;

    Eigen::Index order() const { return A.rows(); }
    Eigen::Index w_size() const { return B1.cols(); }
    Eigen::Index u_size() const { return B2.cols(); }
    Eigen::Index z_size() const { return C1.rows(); }
    Eigen::Index y_size() const { return C2.rows(); }

    void validate() const;
    const ChannelSpan& find_w(const std::string& name) const;
    const ChannelSpan& find_z(const std::string& name) const;
};

// Output/input selection pair: picks z rows via L and w columns via R.
struct ChannelSelector {
    Matrix L;  // p_sel x p_z
    Matrix R;  // m_w x m_sel
};

// Full z rows, one named w channel.
ChannelSelector make_selector(const GeneralizedPlant& P,
                              const std::string& w_name);
ChannelSelector make_selector(const GeneralizedPlant& P,
                              const std::string& z_name,
                              const std::string& w_name);

// Replaces (B1, C1, D11, D12, D21) by their selected versions.
GeneralizedPlant select_channel(const GeneralizedPlant& P,
                                const ChannelSelector& sel);

// Closes u = Q y and returns the map w -> z. State is [x_P; x_Q]. Throws
// IllPosedLoop when I - D22 Dc is numerically singular.
StateSpace close_loop(const GeneralizedPlant& P, const StateSpace& Q);

// State rescaling of the whole plant (exact similarity, powers of two).
GeneralizedPlant balance_plant(const GeneralizedPlant& P);

// Residual-shaping plant for the standard observer-free layout: plant G,
// stabilizing controller K in negative feedback, disturbance entering
// through weight Gd, actuator fault through weight Gf. The filter input is
// [y; u] of the running loop, the shaped target is the filter output
// itself. Entries are formed by rational arithmetic with exact
// cancellation; each w column is realized over its least common
// denominator and the assembled realization is balance_states'd.
GeneralizedPlant build_fdi_plant(const RationalTF& G, const RationalTF& K,
                                 const RationalTF& Gd, const RationalTF& Gf);

struct FeasibilityDiagnostic {
    bool ok = false;
    std::string message;
};

// Structural check: can the fault -> residual feedthrough
// D11_f + D12 X D21_f reach full column rank for some filter feedthrough X?
// A negative answer means the H- index is pinned at zero by the omega->inf
// limit for every proper filter.
FeasibilityDiagnostic check_hminus_feasibility(const GeneralizedPlant& P,
                                               const std::string& fault_name);

}  // namespace fdshape
