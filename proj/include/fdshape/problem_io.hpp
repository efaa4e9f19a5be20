#pragma once

#include <string>
#include <vector>

#include "fdshape/genplant.hpp"
#include "fdshape/rational.hpp"
#include "fdshape/synthesis.hpp"

namespace fdshape {

inline constexpr int kSchemaVersion = 1;

// A problem description: either four SISO transfers (plant, controller,
// disturbance weight, fault weight) or a raw partitioned plant, plus the
// synthesis settings. Exactly one of the two forms is present.
struct ProblemFile {
    std::string name;
    bool has_transfer_form = false;
    RationalTF G, C, Gd, Gf;
    bool has_plant_form = false;
    GeneralizedPlant plant;
    SynthesisConfig config;
};

ProblemFile load_problem(const std::string& path);

// The generalized plant the problem describes (built from the transfers or
// passed through).
GeneralizedPlant problem_plant(const ProblemFile& pf);

void save_filter(const std::string& path, const StateSpace& Q);
StateSpace load_filter(const std::string& path);

struct Certificates {
    std::string status;  // "converged", "iter-limit", "analyze"
    double nu = 0.0;
    double gamma0 = 0.0;
    double J = 0.0;
    double hinf_disturbance = 0.0;
    double hminus_fault = 0.0;
    std::vector<IterationRecord> iterations;
};

void save_certificates(const std::string& path, const Certificates& c);

// Columns: omega, sigma_max of the disturbance response, sigma_min of the
// fault response, and the shaped bounds gamma/|Gd| and nu/|Gf| (nan when the
// problem carries no weight transfers). Fixed-format, byte-deterministic.
void write_sweep_csv(const std::string& path, const VerifyResult& vr,
                     double gamma, double nu, const ProblemFile& pf);

void write_report(const std::string& path, const ProblemFile& pf,
                  const Certificates& c);

// Self-contained log-log SVG of the four sweep curves.
void write_sweep_svg(const std::string& path, const VerifyResult& vr,
                     double gamma, double nu, const ProblemFile& pf);

}  // namespace fdshape
