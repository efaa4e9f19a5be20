#include "fdshape/state_space.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace fdshape {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw DimensionMismatch(what);
}

}  // namespace

StateSpace::StateSpace(Matrix A_, Matrix B_, Matrix C_, Matrix D_)
    : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)), D(std::move(D_)) {
    require(A.rows() == A.cols(), "state matrix must be square");
    require(B.rows() == A.rows(), "B must have one row per state");
    require(C.cols() == A.rows(), "C must have one column per state");
    require(D.rows() == C.rows() && D.cols() == B.cols(),
            "D must be outputs x inputs");
}

StateSpace::StateSpace(Matrix D_) {
    D = std::move(D_);
    A.resize(0, 0);
    B.resize(0, D.cols());
    C.resize(D.rows(), 0);
}

bool is_hurwitz(const Matrix& A, double margin) {
    if (A.rows() == 0) return true;
    Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
    return (es.eigenvalues().real().array() < -margin).all();
}

bool is_hurwitz(const StateSpace& sys, double margin) {
    return is_hurwitz(sys.A, margin);
}

ComplexMatrix evaluate(const StateSpace& sys, Complex s0) {
    if (sys.order() == 0) return sys.D.cast<Complex>();
    ComplexMatrix R = -sys.A.cast<Complex>();
    R.diagonal().array() += s0;
    Eigen::PartialPivLU<ComplexMatrix> lu(R);
    // PartialPivLU has no rank query; detect a (near-)singular resolvent by
    // the smallest |U_ii| relative to the largest.
    Eigen::ArrayXd udiag = lu.matrixLU().diagonal().cwiseAbs().array();
    if (udiag.minCoeff() <= 1e-14 * (1.0 + udiag.maxCoeff()))
        throw SingularResolvent("evaluation point coincides with a pole");
    return sys.C.cast<Complex>() * lu.solve(sys.B.cast<Complex>()) +
           sys.D.cast<Complex>();
}

ComplexMatrix freq_response(const StateSpace& sys, double omega) {
    return evaluate(sys, Complex(0.0, omega));
}

StateSpace series(const StateSpace& a, const StateSpace& b) {
    require(b.inputs() == a.outputs(), "series: inner dimensions disagree");
    const auto na = a.order(), nb = b.order();
    Matrix A = Matrix::Zero(na + nb, na + nb);
    A.topLeftCorner(na, na) = a.A;
    A.bottomLeftCorner(nb, na) = b.B * a.C;
    A.bottomRightCorner(nb, nb) = b.A;
    Matrix B(na + nb, a.inputs());
    B.topRows(na) = a.B;
    B.bottomRows(nb) = b.B * a.D;
    Matrix C(b.outputs(), na + nb);
    C.leftCols(na) = b.D * a.C;
    C.rightCols(nb) = b.C;
    return StateSpace(A, B, C, b.D * a.D);
}

StateSpace add(const StateSpace& a, const StateSpace& b) {
    require(a.inputs() == b.inputs() && a.outputs() == b.outputs(),
            "add: systems must share dimensions");
    const auto na = a.order(), nb = b.order();
    Matrix A = Matrix::Zero(na + nb, na + nb);
    A.topLeftCorner(na, na) = a.A;
    A.bottomRightCorner(nb, nb) = b.A;
    Matrix B(na + nb, a.inputs());
    B.topRows(na) = a.B;
    B.bottomRows(nb) = b.B;
    Matrix C(a.outputs(), na + nb);
    C.leftCols(na) = a.C;
    C.rightCols(nb) = b.C;
    return StateSpace(A, B, C, a.D + b.D);
}

StateSpace negate(const StateSpace& sys) {
    return StateSpace(sys.A, sys.B, -sys.C, -sys.D);
}

StateSpace vertcat(const StateSpace& a, const StateSpace& b) {
    require(a.inputs() == b.inputs(), "vertcat: input widths disagree");
    const auto na = a.order(), nb = b.order();
    Matrix A = Matrix::Zero(na + nb, na + nb);
    A.topLeftCorner(na, na) = a.A;
    A.bottomRightCorner(nb, nb) = b.A;
    Matrix B(na + nb, a.inputs());
    B.topRows(na) = a.B;
    B.bottomRows(nb) = b.B;
    Matrix C = Matrix::Zero(a.outputs() + b.outputs(), na + nb);
    C.topLeftCorner(a.outputs(), na) = a.C;
    C.bottomRightCorner(b.outputs(), nb) = b.C;
    Matrix D(a.outputs() + b.outputs(), a.inputs());
    D.topRows(a.outputs()) = a.D;
    D.bottomRows(b.outputs()) = b.D;
    return StateSpace(A, B, C, D);
}

StateSpace horzcat(const StateSpace& a, const StateSpace& b) {
    require(a.outputs() == b.outputs(), "horzcat: output heights disagree");
    const auto na = a.order(), nb = b.order();
    Matrix A = Matrix::Zero(na + nb, na + nb);
    A.topLeftCorner(na, na) = a.A;
    A.bottomRightCorner(nb, nb) = b.A;
    Matrix B = Matrix::Zero(na + nb, a.inputs() + b.inputs());
    B.topLeftCorner(na, a.inputs()) = a.B;
    B.bottomRightCorner(nb, b.inputs()) = b.B;
    Matrix C(a.outputs(), na + nb);
    C.leftCols(na) = a.C;
    C.rightCols(nb) = b.C;
    Matrix D(a.outputs(), a.inputs() + b.inputs());
    D.leftCols(a.inputs()) = a.D;
    D.rightCols(b.inputs()) = b.D;
    return StateSpace(A, B, C, D);
}

StateSpace scale_output(const StateSpace& sys, double alpha) {
    return StateSpace(sys.A, sys.B, alpha * sys.C, alpha * sys.D);
}

StateSpace balance_states(const StateSpace& sys) {
    const auto n = sys.order();
    if (n == 0) return sys;
    Matrix A = sys.A, B = sys.B, C = sys.C;

    // Osborne iteration restricted to powers of two, row/col norms taken on
    // the embedding [A B; C 0] so that input/output couplings count too.
    bool changed = true;
    for (int pass = 0; pass < 50 && changed; ++pass) {
        changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            double r = B.row(i).cwiseAbs().sum();
            double c = C.col(i).cwiseAbs().sum();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                r += std::abs(A(i, j));
                c += std::abs(A(j, i));
            }
            if (r == 0.0 || c == 0.0) continue;
            double f = 1.0;
            while (c < r / 2.0) { c *= 2.0; r /= 2.0; f *= 2.0; }
            while (c >= r * 2.0) { c /= 2.0; r *= 2.0; f /= 2.0; }
            if (f != 1.0) {
                // x_i -> x_i / f: row i scaled by 1/f, column i by f.
                A.row(i) /= f;
                A.col(i) *= f;
                B.row(i) /= f;
                C.col(i) *= f;
                changed = true;
            }
        }
    }
    return StateSpace(A, B, C, sys.D);
}

FrequencyGrid FrequencyGrid::logspace(double lo, double hi, int count) {
    FrequencyGrid g;
    if (count <= 1) {
        g.omegas.push_back(lo);
        return g;
    }
    const double llo = std::log10(lo), lhi = std::log10(hi);
    g.omegas.reserve(count);
    for (int i = 0; i < count; ++i)
        g.omegas.push_back(std::pow(10.0, llo + (lhi - llo) * i / (count - 1)));
    return g;
}

FrequencyGrid FrequencyGrid::standard() {
    FrequencyGrid g = logspace(1e-3, 1e4, 400);
    g.omegas.insert(g.omegas.begin(), 0.0);
    return g;
}

}  // namespace fdshape
