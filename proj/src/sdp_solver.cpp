#include "fdshape/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "fdshape/errors.hpp"

namespace fdshape {

void LmiProblem::add_block(LmiBlock b) {
    if (b.size > 0) blocks.push_back(std::move(b));
}

void LmiProblem::set_objective(const std::string& name, Eigen::Index i,
                               Eigen::Index j, double coeff) {
    if (objective.size() != vars.dim())
        objective = Vector::Zero(vars.dim());
    objective[vars.index(name, i, j)] = coeff;
}

bool LmiProblem::pure_feasibility() const {
    return objective.size() == 0 || objective.isZero(0.0);
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::MaxIterations: return "max-iterations";
        case SolveStatus::NumericalFailure: return "numerical-failure";
    }
    return "?";
}

namespace {

// Canonical cone block: S(x) = A0 + sum x_i A_i >= 0, scaled so the constant
// term has unit magnitude. Sense and margin are folded in.
struct ConeBlock {
    std::string name;
    Eigen::Index size = 0;
    Matrix A0;
    std::vector<LmiBlock::Coeff> coeffs;
};

std::vector<ConeBlock> canonicalize(const LmiProblem& prob) {
    std::vector<ConeBlock> out;
    for (const auto& blk : prob.blocks) {
        if (blk.size == 0) continue;
        const double sign =
            (blk.sense == Sense::NegativeDefinite) ? -1.0 : 1.0;
        Matrix A0 = sign * blk.constant;
        ConeBlock cb;
        cb.name = blk.name;
        cb.size = blk.size;
        cb.A0 = std::move(A0);
        cb.coeffs = blk.coeffs;
        for (auto& co : cb.coeffs)
            for (auto& t : co.terms) t.v *= sign;

        // Diagonal congruence D S D to even out row magnitudes. Definiteness
        // is invariant, while the achievable uniform margin stops being
        // capped by whichever row happens to carry the largest entries.
        Vector w = Vector::Zero(cb.size);
        for (Eigen::Index i = 0; i < cb.size; ++i)
            for (Eigen::Index j = 0; j < cb.size; ++j) {
                const double a = std::abs(cb.A0(i, j));
                w[i] = std::max(w[i], a);
                w[j] = std::max(w[j], a);
            }
        for (const auto& co : cb.coeffs)
            for (const auto& t : co.terms) {
                const double a = std::abs(t.v);
                w[t.r] = std::max(w[t.r], a);
                w[t.c] = std::max(w[t.c], a);
            }
        const double wmax = std::max(w.maxCoeff(), 1e-300);
        Vector dscale(cb.size);
        for (Eigen::Index i = 0; i < cb.size; ++i)
            dscale[i] = 1.0 / std::sqrt(std::max(w[i], 1e-8 * wmax));
        for (Eigen::Index i = 0; i < cb.size; ++i)
            for (Eigen::Index j = 0; j < cb.size; ++j)
                cb.A0(i, j) *= dscale[i] * dscale[j];
        for (auto& co : cb.coeffs)
            for (auto& t : co.terms) t.v *= dscale[t.r] * dscale[t.c];
        // Strictness cushion, applied in the scaled metric so it stays
        // uniform across rows (pre-scale it would blow up on weak rows).
        if (blk.margin != 0.0)
            cb.A0.diagonal().array() -= blk.margin;
        out.push_back(std::move(cb));
    }
    return out;
}

Matrix eval_block(const ConeBlock& cb, const Vector& x) {
    Matrix S = cb.A0;
    for (const auto& co : cb.coeffs) {
        const double v = x[co.var];
        if (v == 0.0) continue;
        for (const auto& t : co.terms) {
            S(t.r, t.c) += t.v * v;
            if (t.r != t.c) S(t.c, t.r) += t.v * v;
        }
    }
    return S;
}

double min_eig(const Matrix& S) {
    if (S.rows() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// -sum_b logdet S_b(x) - sum_i log(B - x_i) - log(B + x_i); +inf outside.
double barrier_value(const std::vector<ConeBlock>& blocks, const Vector& x,
                     double box) {
    double phi = 0.0;
    if (box > 0.0) {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double lo = box + x[i], hi = box - x[i];
            if (!(lo > 0.0) || !(hi > 0.0))
                return std::numeric_limits<double>::infinity();
            phi -= std::log(lo) + std::log(hi);
        }
    }
    for (const auto& cb : blocks) {
        Matrix S = eval_block(cb, x);
        Eigen::LLT<Matrix> llt(S);
        if (llt.info() != Eigen::Success)
            return std::numeric_limits<double>::infinity();
        double ld = 0.0;
        for (Eigen::Index i = 0; i < cb.size; ++i) {
            const double lii = llt.matrixLLT()(i, i);
            if (!(lii > 0.0))
                return std::numeric_limits<double>::infinity();
            ld += std::log(lii);
        }
        phi -= 2.0 * ld;
    }
    return std::isfinite(phi) ? phi
                              : std::numeric_limits<double>::infinity();
}

struct StageResult {
    bool centered = false;
    bool early_exit = false;
    bool stalled = false;  // no usable step left, iterate still feasible
    bool failed = false;
};

// Damped Newton centering of f(x) = t c'x - sum logdet S_b(x). Counts steps
// against a shared budget. `early` (optional) is queried after every
// accepted step.
template <typename EarlyFn>
StageResult center(const std::vector<ConeBlock>& blocks, const Vector& c,
                   double t, Vector& x, const SolverOptions& opts,
                   int& steps_used, EarlyFn early) {
    const Eigen::Index d = x.size();
    StageResult res;
    Matrix H(d, d);
    Vector g(d);
    double prev_decr2 = std::numeric_limits<double>::infinity();

    const double box = opts.var_bound;

    while (true) {
        if (steps_used >= opts.max_iter) return res;  // not centered

        H.setZero();
        g = t * c;
        if (box > 0.0) {
            for (Eigen::Index i = 0; i < d; ++i) {
                const double lo = box + x[i], hi = box - x[i];
                g[i] += 1.0 / hi - 1.0 / lo;
                H(i, i) += 1.0 / (lo * lo) + 1.0 / (hi * hi);
            }
        }
        for (const auto& cb : blocks) {
            Matrix S = eval_block(cb, x);
            Eigen::LLT<Matrix> llt(S);
            if (llt.info() != Eigen::Success) {
                res.failed = true;
                return res;
            }
            Matrix W = llt.solve(Matrix::Identity(cb.size, cb.size));
            const size_t nv = cb.coeffs.size();
            std::vector<Matrix> T(nv);
            for (size_t k = 0; k < nv; ++k) {
                const auto& co = cb.coeffs[k];
                Matrix Tk = Matrix::Zero(cb.size, cb.size);
                double gk = 0.0;
                for (const auto& tm : co.terms) {
                    Tk.noalias() +=
                        tm.v * (W.col(tm.r) * W.col(tm.c).transpose());
                    if (tm.r != tm.c)
                        Tk.noalias() +=
                            tm.v * (W.col(tm.c) * W.col(tm.r).transpose());
                    gk += tm.v * W(tm.r, tm.c) * (tm.r == tm.c ? 1.0 : 2.0);
                }
                g[co.var] -= gk;
                T[k] = std::move(Tk);
            }
            for (size_t k1 = 0; k1 < nv; ++k1) {
                const Eigen::Index v1 = cb.coeffs[k1].var;
                for (size_t k2 = k1; k2 < nv; ++k2) {
                    const Eigen::Index v2 = cb.coeffs[k2].var;
                    double h = 0.0;
                    for (const auto& tm : cb.coeffs[k2].terms)
                        h += tm.v * T[k1](tm.r, tm.c) *
                             (tm.r == tm.c ? 1.0 : 2.0);
                    H(v1, v2) += h;
                    if (v1 != v2) H(v2, v1) += h;
                }
            }
        }

        // Newton direction on the Jacobi-scaled system: the barrier Hessian
        // mixes curvatures across many orders of magnitude, and solving the
        // raw system loses the shallow directions to rounding well before
        // the path is exhausted. Regularize only if the factorization still
        // misbehaves.
        Vector js(d);
        for (Eigen::Index i = 0; i < d; ++i)
            js[i] = 1.0 / std::sqrt(std::max(H(i, i), 1e-300));
        Matrix Hs = js.asDiagonal() * H * js.asDiagonal();
        const Vector gs = js.asDiagonal() * g;
        Vector dx;
        double decr2 = -1.0;
        double reg = 0.0;
        for (int attempt = 0; attempt < 6; ++attempt) {
            Matrix Hr = Hs;
            if (reg > 0.0) Hr += reg * Matrix::Identity(d, d);
            Eigen::LDLT<Matrix> ldlt(Hr);
            Vector dy = ldlt.solve(-gs);
            // one round of iterative refinement keeps the long shallow steps
            dy += ldlt.solve(-gs - Hr * dy);
            dx = js.asDiagonal() * dy;
            if (dx.allFinite()) {
                decr2 = -g.dot(dx);
                if (decr2 >= 0.0) break;
            }
            reg = (reg == 0.0) ? 1e-14 : reg * 1e4;
        }
        if (!dx.allFinite() || decr2 < 0.0) {
            // The Hessian solve gave nothing usable, but x itself is fine.
            res.stalled = true;
            return res;
        }
        // Done when the decrement is negligible, or when it has hit its
        // floating-point floor: deep in the quadratic phase it should square
        // every step, so a decay under 10% means rounding noise, not
        // progress worth spending budget on.
        if (0.5 * decr2 <= 1e-9 ||
            (decr2 <= 1e-6 && decr2 >= 0.9 * prev_decr2)) {
            res.centered = true;
            return res;
        }
        prev_decr2 = decr2;

        const double f0 = t * c.dot(x) + barrier_value(blocks, x, box);
        const double slope = g.dot(dx);  // negative
        double alpha = 1.0;
        bool moved = false;
        while (alpha > 1e-14) {
            Vector xt = x + alpha * dx;
            const double ft = t * c.dot(xt) + barrier_value(blocks, xt, box);
            if (ft <= f0 + opts.armijo_c * alpha * slope) {
                x = xt;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        ++steps_used;
        if (!moved) {
            // Treat a tiny outstanding decrement as centered.
            res.centered = (0.5 * decr2 <= 1e-6);
            res.stalled = !res.centered;
            return res;
        }
        if (early(x)) {
            res.early_exit = true;
            return res;
        }
    }
}

struct Phase1Setup {
    std::vector<ConeBlock> blocks;  // augmented with margin variable
    Vector c;
    Vector x0;
};

Phase1Setup make_phase1(const std::vector<ConeBlock>& blocks, Eigen::Index d,
                        const Vector* x0, double box) {
    Phase1Setup ph;
    ph.blocks = blocks;
    for (auto& cb : ph.blocks) {
        LmiBlock::Coeff co;
        co.var = d;
        for (Eigen::Index i = 0; i < cb.size; ++i)
            co.terms.push_back({static_cast<int>(i), static_cast<int>(i),
                                -1.0});
        cb.coeffs.push_back(std::move(co));
    }
    ph.c = Vector::Zero(d + 1);
    ph.c[d] = -1.0;  // maximize the uniform margin
    ph.x0 = Vector::Zero(d + 1);
    if (x0 && x0->size() == d) {
        ph.x0.head(d) = *x0;
        if (box > 0.0)
            ph.x0.head(d) =
                ph.x0.head(d).cwiseMax(-0.999 * box).cwiseMin(0.999 * box);
    }
    double smin = std::numeric_limits<double>::infinity();
    for (const auto& cb : blocks)
        smin = std::min(smin, min_eig(eval_block(cb, ph.x0)));
    // Strictly below the worst margin so the augmented start is interior.
    ph.x0[d] = smin - std::max(1e-9, 0.1 * std::abs(smin));
    return ph;
}

int total_rows(const std::vector<ConeBlock>& blocks) {
    int m = 0;
    for (const auto& cb : blocks) m += static_cast<int>(cb.size);
    return m;
}

void fill_margins(const std::vector<ConeBlock>& blocks, const Vector& x,
                  SdpSolution& sol) {
    sol.block_margins.clear();
    for (const auto& cb : blocks)
        sol.block_margins.push_back(min_eig(eval_block(cb, x)));
}

// Runs the barrier path for min c'x over the given cone blocks starting at
// strictly feasible x. Fills status/gap and optionally logs stage iterates.
// In phase-1 mode (margin_var >= 0) the path also stops as soon as the
// feasibility question is settled: a margin above exit_margin certifies a
// strictly feasible point, and margin + gap < 0 certifies that no margin
// can ever reach zero.
void barrier_path(const std::vector<ConeBlock>& blocks, const Vector& c,
                  Vector& x, const SolverOptions& opts, int& steps,
                  Eigen::Index margin_var,  // >=0: index of phase-1 margin var
                  double exit_margin, SdpSolution& sol) {
    int m = total_rows(blocks);
    if (opts.var_bound > 0.0) m += 2 * static_cast<int>(x.size());
    double t = 1.0;
    auto early = [&](const Vector& xc) {
        return margin_var >= 0 && xc[margin_var] >= exit_margin;
    };
    if (early(x)) {  // warm starts may already be deep enough inside
        sol.status = SolveStatus::Optimal;
        sol.gap_bound = m / t;
        return;
    }
    while (true) {
        StageResult sr = center(blocks, c, t, x, opts, steps, early);
        if (opts.record_iterates) sol.iterates.push_back(x);
        if (sr.failed) {
            sol.status = SolveStatus::NumericalFailure;
            return;
        }
        if (sr.early_exit) {
            sol.status = SolveStatus::Optimal;
            sol.gap_bound = m / t;
            return;
        }
        if (sr.stalled || !sr.centered) {
            // Out of numerical precision or out of budget. Either way the
            // iterate is strictly feasible and is worth returning.
            sol.status = SolveStatus::MaxIterations;
            sol.gap_bound = m / t;
            return;
        }
        // Centered at this t: the achievable margin exceeds the current one
        // by at most the duality gap bound m/t.
        if (margin_var >= 0) {
            const double s = x[margin_var];
            if (s + m / t < 0.0) {
                sol.status = SolveStatus::Infeasible;
                sol.gap_bound = m / t;
                return;
            }
            // A positive margin resolved to 25% is a settled answer; there
            // is no point grinding a thin problem down to gap_tol.
            if (s > 0.0 && m / t <= 0.25 * s) {
                sol.status = SolveStatus::Optimal;
                sol.gap_bound = m / t;
                return;
            }
        }
        if (m / t <= opts.gap_tol) {
            sol.status = SolveStatus::Optimal;
            sol.gap_bound = m / t;
            return;
        }
        t /= opts.barrier_reduction;
    }
}

}  // namespace

namespace {

// exit_margin controls how interior the returned point has to be before the
// path stops early. Deciding plain feasibility only needs any positive
// margin; a phase-2 warm start wants a comfortably interior point.
SdpSolution phase1_impl(const LmiProblem& prob, const SolverOptions& opts,
                        double exit_margin, const Vector* warm) {
    const Eigen::Index d = prob.vars.dim();
    auto blocks = canonicalize(prob);
    SdpSolution sol;
    if (blocks.empty()) {
        sol.status = SolveStatus::Optimal;
        sol.x = Vector::Zero(d);
        sol.objective = 0.0;
        sol.phase1_margin = std::numeric_limits<double>::infinity();
        sol.gap_bound = 0.0;
        return sol;
    }
    if (d == 0) {
        sol.x = Vector();
        double smin = std::numeric_limits<double>::infinity();
        for (const auto& cb : blocks) smin = std::min(smin, min_eig(cb.A0));
        sol.phase1_margin = smin;
        sol.status = smin > 0.0 ? SolveStatus::Optimal
                                : SolveStatus::Infeasible;
        sol.objective = 0.0;
        sol.gap_bound = 0.0;
        fill_margins(blocks, sol.x, sol);
        return sol;
    }

    Phase1Setup ph = make_phase1(blocks, d, warm, opts.var_bound);
    Vector x = ph.x0;
    int steps = 0;
    barrier_path(ph.blocks, ph.c, x, opts, steps, d, exit_margin, sol);
    sol.newton_steps = steps;
    sol.phase1_margin = x[d];
    sol.x = x.head(d);
    fill_margins(blocks, sol.x, sol);
    if (sol.status == SolveStatus::Optimal) {
        // Converged or exited early; the sign of the margin decides.
        sol.status = (x[d] > 0.0) ? SolveStatus::Optimal
                                  : SolveStatus::Infeasible;
    } else if (sol.status != SolveStatus::Infeasible && x[d] > 0.0) {
        // The path was cut short, but a positive margin is already a
        // certificate of strict feasibility.
        sol.status = SolveStatus::Optimal;
    }
    sol.objective = 0.0;
    return sol;
}

}  // namespace

SdpSolution feasibility_phase1(const LmiProblem& prob,
                               const SolverOptions& opts) {
    return phase1_impl(prob, opts, std::max(opts.feas_tol, 1e-12), nullptr);
}

SdpSolution solve_sdp(const LmiProblem& prob, const SolverOptions& opts,
                      const Vector* warm_start) {
    const Eigen::Index d = prob.vars.dim();
    Vector x;
    int ph1_steps = 0;
    double ph1_margin = std::numeric_limits<double>::quiet_NaN();
    std::vector<Vector> ph1_iterates;

    // A strictly feasible warm start makes the whole feasibility phase
    // redundant.
    bool warm_ok = false;
    if (warm_start && warm_start->size() == d && d > 0 &&
        !prob.pure_feasibility()) {
        auto blocks = canonicalize(prob);
        Vector cand = *warm_start;
        if (opts.var_bound > 0.0)
            cand = cand.cwiseMax(-0.999 * opts.var_bound)
                       .cwiseMin(0.999 * opts.var_bound);
        // Strict feasibility in exactly the sense the barrier needs it:
        // every block factorizes. Handed-over boundary points sit at
        // margins around 1e-11, far below any fixed eigenvalue cutoff.
        bool llt_ok = true;
        double smin = std::numeric_limits<double>::infinity();
        for (const auto& cb : blocks) {
            Matrix S = eval_block(cb, cand);
            if (Eigen::LLT<Matrix>(S).info() != Eigen::Success) {
                llt_ok = false;
                break;
            }
            smin = std::min(smin, min_eig(S));
        }
        if (llt_ok && smin > 0.0) {
            warm_ok = true;
            x = std::move(cand);
            ph1_margin = smin;
        }
    }
    if (!warm_ok) {
        SdpSolution sol =
            phase1_impl(prob, opts, opts.phase1_exit_margin, warm_start);
        if (sol.status != SolveStatus::Optimal || prob.pure_feasibility() ||
            d == 0)
            return sol;
        x = sol.x;
        ph1_steps = sol.newton_steps;
        ph1_margin = sol.phase1_margin;
        ph1_iterates = std::move(sol.iterates);
    }

    auto blocks = canonicalize(prob);
    int steps = 0;  // the objective path gets its own budget
    SdpSolution sol;
    sol.iterates = std::move(ph1_iterates);
    sol.phase1_margin = ph1_margin;
    const Vector x_start = x;  // known strictly feasible
    barrier_path(blocks, prob.objective, x, opts, steps, -1, 0.0, sol);
    // Never hand back less than the point we started from. Early stages pull
    // toward the analytic center, and a stage can die numerically; the start
    // is feasible either way.
    if (sol.status == SolveStatus::NumericalFailure ||
        prob.objective.dot(x) > prob.objective.dot(x_start)) {
        x = x_start;
        if (sol.status == SolveStatus::NumericalFailure)
            sol.status = SolveStatus::MaxIterations;
    }
    sol.newton_steps = ph1_steps + steps;
    sol.x = x;
    sol.objective = prob.objective.dot(x);
    fill_margins(blocks, x, sol);
    return sol;
}

void dump_problem(const LmiProblem& prob, std::ostream& os) {
    auto blocks = canonicalize(prob);
    os << "d " << prob.vars.dim() << " " << blocks.size() << "\n";
    for (const auto& e : prob.vars.entries()) {
        for (Eigen::Index i = 0; i < e.rows; ++i)
            for (Eigen::Index j = e.symmetric ? i : 0; j < e.cols; ++j)
                os << "v " << prob.vars.index(e.name, i, j) << " " << e.name
                   << " " << i << " " << j << "\n";
    }
    if (prob.objective.size() > 0)
        for (Eigen::Index i = 0; i < prob.objective.size(); ++i)
            if (prob.objective[i] != 0.0)
                os << "o " << i << " " << prob.objective[i] << "\n";
    for (size_t b = 0; b < blocks.size(); ++b) {
        const auto& cb = blocks[b];
        os << "b " << b << " " << cb.size << " " << cb.name << "\n";
        for (Eigen::Index i = 0; i < cb.size; ++i)
            for (Eigen::Index j = i; j < cb.size; ++j)
                if (cb.A0(i, j) != 0.0)
                    os << "e " << b << " " << i << " " << j << " -1 "
                       << cb.A0(i, j) << "\n";
        for (const auto& co : cb.coeffs)
            for (const auto& t : co.terms)
                os << "e " << b << " " << t.r << " " << t.c << " " << co.var
                   << " " << t.v << "\n";
    }
}

}  // namespace fdshape
