#pragma once

#include "fdshape/state_space.hpp"

namespace fdshape {

// sigma_max(G(i*omega)) for every grid point.
std::vector<double> max_sv_curve(const StateSpace& sys,
                                 const FrequencyGrid& grid);
// sigma_min over the same grid.
std::vector<double> min_sv_curve(const StateSpace& sys,
                                 const FrequencyGrid& grid);

// Hinf norm of a stable system. Grid sweep seeds a bisection on the
// imaginary-axis eigenvalue test of the Hamiltonian pencil; rel_tol is the
// relative width of the final bisection bracket. Throws UnstableSystem.
double hinf_norm(const StateSpace& sys, double rel_tol = 1e-6,
                 const FrequencyGrid& grid = FrequencyGrid::standard());

// H- index: inf over omega in [0, inf] of sigma_min(G(i*omega)), including
// the omega -> inf limit sigma_min(D). Grid sweep plus golden-section
// refinement of every local minimum until the frequency bracket ratio drops
// below bracket_ratio. Throws UnstableSystem.
double hminus_index(const StateSpace& sys, double bracket_ratio = 1.001,
                    const FrequencyGrid& grid = FrequencyGrid::standard());

}  // namespace fdshape
