#include "fdshape/genplant.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>

namespace fdshape {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw DimensionMismatch(what);
}

}  // namespace

void GeneralizedPlant::validate() const {
    const auto n = A.rows();
    require(A.cols() == n, "A must be square");
    require(B1.rows() == n && B2.rows() == n, "B blocks must match states");
    require(C1.cols() == n && C2.cols() == n, "C blocks must match states");
    require(D11.rows() == C1.rows() && D11.cols() == B1.cols(), "D11 shape");
    require(D12.rows() == C1.rows() && D12.cols() == B2.cols(), "D12 shape");
    require(D21.rows() == C2.rows() && D21.cols() == B1.cols(), "D21 shape");
    require(D22.rows() == C2.rows() && D22.cols() == B2.cols(), "D22 shape");
    for (const auto& ch : w_channels)
        require(ch.offset >= 0 && ch.width > 0 && ch.offset + ch.width <= w_size(),
                "w channel span out of range");
    for (const auto& ch : z_channels)
        require(ch.offset >= 0 && ch.width > 0 && ch.offset + ch.width <= z_size(),
                "z channel span out of range");
}

const ChannelSpan& GeneralizedPlant::find_w(const std::string& name) const {
    for (const auto& ch : w_channels)
        if (ch.name == name) return ch;
    throw UnknownChannel("unknown w channel: " + name);
}

const ChannelSpan& GeneralizedPlant::find_z(const std::string& name) const {
    for (const auto& ch : z_channels)
        if (ch.name == name) return ch;
    throw UnknownChannel("unknown z channel: " + name);
}

ChannelSelector make_selector(const GeneralizedPlant& P,
                              const std::string& w_name) {
    const auto& ch = P.find_w(w_name);
    ChannelSelector sel;
    sel.L = Matrix::Identity(P.z_size(), P.z_size());
    sel.R = Matrix::Zero(P.w_size(), ch.width);
    for (Eigen::Index i = 0; i < ch.width; ++i) sel.R(ch.offset + i, i) = 1.0;
    return sel;
}

ChannelSelector make_selector(const GeneralizedPlant& P,
                              const std::string& z_name,
                              const std::string& w_name) {
    ChannelSelector sel = make_selector(P, w_name);
    const auto& ch = P.find_z(z_name);
    sel.L = Matrix::Zero(ch.width, P.z_size());
    for (Eigen::Index i = 0; i < ch.width; ++i) sel.L(i, ch.offset + i) = 1.0;
    return sel;
}

GeneralizedPlant select_channel(const GeneralizedPlant& P,
                                const ChannelSelector& sel) {
    require(sel.L.cols() == P.z_size() && sel.R.rows() == P.w_size(),
            "selector does not match plant axes");
    GeneralizedPlant out = P;
    out.B1 = P.B1 * sel.R;
    out.C1 = sel.L * P.C1;
    out.D11 = sel.L * P.D11 * sel.R;
    out.D12 = sel.L * P.D12;
    out.D21 = P.D21 * sel.R;
    out.w_channels.clear();
    out.z_channels.clear();
    return out;
}

StateSpace close_loop(const GeneralizedPlant& P, const StateSpace& Q) {
    P.validate();
    require(Q.inputs() == P.y_size(), "filter input width must match y");
    require(Q.outputs() == P.u_size(), "filter output width must match u");

    const Matrix& Dc = Q.D;

    // Well-posedness of the algebraic loop: I - D22 Dc invertible, judged
    // by |det| against the Hadamard bound of the matrix itself.
    Matrix Mwp = Matrix::Identity(P.y_size(), P.y_size()) - P.D22 * Dc;
    Eigen::PartialPivLU<Matrix> lu(Mwp);
    double hadamard = 1.0;
    for (Eigen::Index i = 0; i < Mwp.rows(); ++i)
        hadamard *= std::max(Mwp.row(i).norm(), 1e-300);
    if (std::abs(lu.determinant()) <= 1e-10 * hadamard)
        throw IllPosedLoop("algebraic loop I - D22 Dc is singular");

    // Dbar = (I - D22 Dc)^{-1} acting on the y side.
    Matrix Dbar_D22 = lu.solve(P.D22);                   // (I-D22Dc)^{-1} D22
    Matrix Dbar_C2 = lu.solve(P.C2);
    Matrix Dbar_D21 = lu.solve(P.D21);

    const auto n = P.order(), nc = Q.order();
    const Matrix& Ac = Q.A;
    const Matrix& Bc = Q.B;
    const Matrix& Cc = Q.C;

    Matrix Acl(n + nc, n + nc);
    Acl.topLeftCorner(n, n) = P.A + P.B2 * Dc * Dbar_C2;
    Acl.topRightCorner(n, nc) = P.B2 * (Cc + Dc * Dbar_D22 * Cc);
    Acl.bottomLeftCorner(nc, n) = Bc * Dbar_C2;
    Acl.bottomRightCorner(nc, nc) = Ac + Bc * Dbar_D22 * Cc;

    Matrix Bcl(n + nc, P.w_size());
    Bcl.topRows(n) = P.B1 + P.B2 * Dc * Dbar_D21;
    Bcl.bottomRows(nc) = Bc * Dbar_D21;

    Matrix Ccl(P.z_size(), n + nc);
    Ccl.leftCols(n) = P.C1 + P.D12 * Dc * Dbar_C2;
    Ccl.rightCols(nc) = P.D12 * (Cc + Dc * Dbar_D22 * Cc);

    Matrix Dcl = P.D11 + P.D12 * Dc * Dbar_D21;

    return StateSpace(Acl, Bcl, Ccl, Dcl);
}

GeneralizedPlant build_fdi_plant(const RationalTF& G, const RationalTF& K,
                                 const RationalTF& Gd, const RationalTF& Gf) {
    // Loop sensitivities (SISO, so input and output sensitivities share the
    // denominator; both are formed per their own definition).
    const RationalTF GK = tf_mul(G, K);
    const RationalTF one = RationalTF::constant(1.0);
    const RationalTF So = tf_inv(tf_add(one, GK));
    const RationalTF Si = So;  // SISO: (1+KG)^{-1} == (1+GK)^{-1}

    struct Entry {
        const char* name;
        RationalTF tf;
    };
    Entry t_yd{"T_y,d", tf_mul(So, Gd)};
    Entry t_yf{"T_y,f", tf_mul(tf_mul(So, G), Gf)};
    Entry t_ud{"T_u,d", tf_scale(tf_mul(tf_mul(Si, K), Gd), -1.0)};
    Entry t_uf{"T_u,f", tf_scale(tf_mul(tf_mul(tf_mul(Si, K), G), Gf), -1.0)};
    for (const Entry* e : {&t_yd, &t_yf, &t_ud, &t_uf})
        if (!e->tf.is_proper())
            throw ImproperEntry(std::string("generalized plant entry ") +
                                e->name + " is improper");

    StateSpace col_d = tf_column_to_ss({t_yd.tf, t_ud.tf});
    StateSpace col_f = tf_column_to_ss({t_yf.tf, t_uf.tf});
    StateSpace sys_y = balance_states(horzcat(col_d, col_f));

    const auto n = sys_y.order();
    GeneralizedPlant P;
    P.A = sys_y.A;
    P.B1 = sys_y.B;
    P.B2 = Matrix::Zero(n, 1);
    P.C1 = Matrix::Zero(1, n);
    P.D11 = Matrix::Zero(1, 2);
    P.D12 = Matrix::Identity(1, 1);
    P.C2 = sys_y.C;
    P.D21 = sys_y.D;
    P.D22 = Matrix::Zero(2, 1);
    P.w_channels = {{"d", 0, 1}, {"f", 1, 1}};
    P.z_channels = {{"e", 0, 1}};
    P.validate();
    return P;
}

GeneralizedPlant balance_plant(const GeneralizedPlant& P) {
    const auto n = P.order();
    if (n == 0) return P;
    Matrix B(n, P.w_size() + P.u_size());
    B << P.B1, P.B2;
    Matrix C(P.z_size() + P.y_size(), n);
    C << P.C1, P.C2;
    StateSpace b = balance_states(
        StateSpace(P.A, B, C, Matrix::Zero(C.rows(), B.cols())));
    GeneralizedPlant out = P;
    out.A = b.A;
    out.B1 = b.B.leftCols(P.w_size());
    out.B2 = b.B.rightCols(P.u_size());
    out.C1 = b.C.topRows(P.z_size());
    out.C2 = b.C.bottomRows(P.y_size());
    return out;
}

FeasibilityDiagnostic check_hminus_feasibility(const GeneralizedPlant& P,
                                               const std::string& fault_name) {
    const ChannelSelector sel = make_selector(P, fault_name);
    const Matrix D11f = P.D11 * sel.R;
    const Matrix D21f = P.D21 * sel.R;
    const Eigen::Index mf = D11f.cols(), pz = D11f.rows();

    FeasibilityDiagnostic diag;
    if (mf > pz) {
        diag.message = "fault channel wider than the residual: sigma_min at "
                       "omega->inf is structurally zero";
        return diag;
    }
    auto full_col_rank = [&](const Matrix& M) {
        Eigen::JacobiSVD<Matrix> svd(M);
        const auto sv = svd.singularValues();
        if (sv.size() < mf) return false;
        return sv(mf - 1) > 1e-10 * std::max(1.0, sv(0));
    };
    if (full_col_rank(D11f)) {
        diag.ok = true;
        diag.message = "direct fault feedthrough has full column rank";
        return diag;
    }

    // Generic rank of the affine family D11f + D12 X D21f: one pseudo-random
    // X attains it almost surely; a fixed LCG keeps the check deterministic.
    uint64_t state = 0x9e3779b97f4a7c15ull;
    auto next = [&]() {
        state = state * 6364136223846793005ull + 1442695040888963407ull;
        return static_cast<double>((state >> 11) % 2000001) / 1000000.0 - 1.0;
    };
    for (int trial = 0; trial < 4; ++trial) {
        Matrix X(P.u_size(), P.y_size());
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = next();
        if (full_col_rank(D11f + P.D12 * X * D21f)) {
            diag.ok = true;
            diag.message = "fault feedthrough reaches full column rank "
                           "through the filter";
            return diag;
        }
    }
    if (D21f.cwiseAbs().maxCoeff() == 0.0)
        diag.message = "structural zero: fault channel is strictly proper "
                       "into the measured outputs (D21_f = 0)";
    else if (P.D12.cwiseAbs().maxCoeff() == 0.0)
        diag.message = "structural zero: filter output does not reach the "
                       "residual (D12 = 0)";
    else
        diag.message = "structural zero: D11_f + D12 X D21_f is rank "
                       "deficient for every X";
    return diag;
}

}  // namespace fdshape
