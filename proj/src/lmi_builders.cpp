#include "fdshape/lmi.hpp"

#include <algorithm>
#include <cmath>

#include "fdshape/errors.hpp"
#include "fdshape/sdp.hpp"

namespace fdshape {

// ---------------------------------------------------------------------------
// VarSpace

Eigen::Index VarSpace::add_symmetric(const std::string& name, Eigen::Index n) {
    if (has(name)) throw InputError("duplicate variable '" + name + "'");
    Entry e{name, n, n, true, dim_};
    vars_.push_back(e);
    dim_ += n * (n + 1) / 2;
    return e.offset;
}

Eigen::Index VarSpace::add_matrix(const std::string& name, Eigen::Index r,
                                  Eigen::Index c) {
    if (has(name)) throw InputError("duplicate variable '" + name + "'");
    Entry e{name, r, c, false, dim_};
    vars_.push_back(e);
    dim_ += r * c;
    return e.offset;
}

Eigen::Index VarSpace::add_scalar(const std::string& name) {
    return add_matrix(name, 1, 1);
}

bool VarSpace::has(const std::string& name) const {
    for (const auto& v : vars_)
        if (v.name == name) return true;
    return false;
}

const VarSpace::Entry& VarSpace::info(const std::string& name) const {
    for (const auto& v : vars_)
        if (v.name == name) return v;
    throw InputError("unknown variable '" + name + "'");
}

Eigen::Index VarSpace::index(const std::string& name, Eigen::Index i,
                             Eigen::Index j) const {
    const Entry& e = info(name);
    if (i < 0 || i >= e.rows || j < 0 || j >= e.cols)
        throw InputError("variable index out of range for '" + name + "'");
    if (e.symmetric) {
        if (i > j) std::swap(i, j);
        // row-major upper triangle
        return e.offset + i * e.cols - i * (i - 1) / 2 + (j - i);
    }
    return e.offset + i * e.cols + j;
}

Matrix VarSpace::unpack(const Vector& x, const std::string& name) const {
    const Entry& e = info(name);
    Matrix V(e.rows, e.cols);
    for (Eigen::Index i = 0; i < e.rows; ++i)
        for (Eigen::Index j = 0; j < e.cols; ++j)
            V(i, j) = x[index(name, i, j)];
    return V;
}

void VarSpace::pack(Vector& x, const std::string& name,
                    const Matrix& value) const {
    const Entry& e = info(name);
    if (value.rows() != e.rows || value.cols() != e.cols)
        throw DimensionMismatch("pack: shape mismatch for '" + name + "'");
    for (Eigen::Index i = 0; i < e.rows; ++i)
        for (Eigen::Index j = e.symmetric ? i : 0; j < e.cols; ++j)
            x[index(name, i, j)] = e.symmetric
                                       ? 0.5 * (value(i, j) + value(j, i))
                                       : value(i, j);
}

// ---------------------------------------------------------------------------
// LmiBlock

Matrix LmiBlock::evaluate(const Vector& x) const {
    Matrix S = constant;
    for (const auto& co : coeffs) {
        const double v = x[co.var];
        if (v == 0.0) continue;
        for (const auto& t : co.terms) {
            S(t.r, t.c) += t.v * v;
            if (t.r != t.c) S(t.c, t.r) += t.v * v;
        }
    }
    return S;
}

// ---------------------------------------------------------------------------
// BlockBuilder

BlockBuilder::BlockBuilder(const VarSpace& vs, std::vector<Eigen::Index> segs)
    : vs_(vs) {
    off_.resize(segs.size() + 1, 0);
    for (size_t k = 0; k < segs.size(); ++k) off_[k + 1] = off_[k] + segs[k];
    size_ = off_.back();
    constant_ = Matrix::Zero(size_, size_);
}

Matrix& BlockBuilder::slot(Eigen::Index var) {
    auto it = dense_.find(var);
    if (it == dense_.end())
        it = dense_.emplace(var, Matrix::Zero(size_, size_)).first;
    return it->second;
}

void BlockBuilder::add_const(int bi, int bj, const Matrix& M) {
    const Eigen::Index r0 = off_[bi], c0 = off_[bj];
    constant_.block(r0, c0, M.rows(), M.cols()) += M;
    if (bi != bj)
        constant_.block(c0, r0, M.cols(), M.rows()) += M.transpose();
}

void BlockBuilder::add_term(int bi, int bj, const Matrix& pre,
                            const std::string& var, const Matrix& post,
                            bool transpose_var, double sign) {
    const auto& e = vs_.info(var);
    const Eigen::Index vr = transpose_var ? e.cols : e.rows;
    const Eigen::Index vc = transpose_var ? e.rows : e.cols;
    if (pre.cols() != vr || post.rows() != vc)
        throw DimensionMismatch("add_term: inner dimensions for '" + var +
                                "'");
    const Eigen::Index r0 = off_[bi], c0 = off_[bj];
    const Eigen::Index br = pre.rows(), bc = post.cols();
    for (Eigen::Index p = 0; p < e.rows; ++p) {
        for (Eigen::Index q = 0; q < e.cols; ++q) {
            // op(V)(a,b) = V(p,q) at (a,b) = (p,q) or (q,p)
            const Eigen::Index a = transpose_var ? q : p;
            const Eigen::Index b = transpose_var ? p : q;
            Matrix contrib = sign * (pre.col(a) * post.row(b));
            Matrix& C = slot(vs_.index(var, p, q));
            C.block(r0, c0, br, bc) += contrib;
            if (bi != bj) C.block(c0, r0, bc, br) += contrib.transpose();
        }
    }
}

void BlockBuilder::add_scalar_term(int bi, int bj, const std::string& var,
                                   const Matrix& M) {
    const auto& e = vs_.info(var);
    if (e.rows != 1 || e.cols != 1)
        throw InputError("add_scalar_term: '" + var + "' is not scalar");
    const Eigen::Index r0 = off_[bi], c0 = off_[bj];
    Matrix& C = slot(vs_.index(var, 0, 0));
    C.block(r0, c0, M.rows(), M.cols()) += M;
    if (bi != bj) C.block(c0, r0, M.cols(), M.rows()) += M.transpose();
}

LmiBlock BlockBuilder::build(const std::string& name, Sense sense,
                             double eps) const {
    LmiBlock blk;
    blk.name = name;
    blk.size = size_;
    blk.sense = sense;

    auto symmetrize = [](const Matrix& M, const std::string& what) {
        const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
        const double mag = std::max(1.0, M.cwiseAbs().maxCoeff());
        if (asym > 1e-10 * mag)
            throw InputError("non-symmetric accumulation in block part " +
                             what);
        return Matrix(0.5 * (M + M.transpose()));
    };

    blk.constant = symmetrize(constant_, name + " constant");
    const double scale = std::max(1.0, blk.constant.cwiseAbs().maxCoeff());
    blk.margin = (sense == Sense::PositiveSemidefinite) ? 0.0 : eps * scale;

    for (const auto& [var, M] : dense_) {
        Matrix S = symmetrize(M, name + " coefficient");
        LmiBlock::Coeff co;
        co.var = var;
        for (Eigen::Index i = 0; i < size_; ++i)
            for (Eigen::Index j = i; j < size_; ++j)
                if (S(i, j) != 0.0)
                    co.terms.push_back({static_cast<int>(i),
                                        static_cast<int>(j), S(i, j)});
        if (!co.terms.empty()) blk.coeffs.push_back(std::move(co));
    }
    return blk;
}

// ---------------------------------------------------------------------------
// Analysis inequalities

LmiProblem brl_analysis_lmi(const StateSpace& sys, double gamma) {
    if (gamma <= 0.0) throw InputError("brl_analysis_lmi: gamma must be > 0");
    const Eigen::Index n = sys.order(), m = sys.inputs(), p = sys.outputs();
    LmiProblem prob;
    prob.vars.add_symmetric("X", n);

    BlockBuilder bb(prob.vars, {n, m, p});
    bb.add_term(0, 0, Matrix::Identity(n, n), "X", sys.A);
    bb.add_term(0, 0, sys.A.transpose(), "X", Matrix::Identity(n, n));
    bb.add_term(0, 1, Matrix::Identity(n, n), "X", sys.B);
    bb.add_const(0, 2, sys.C.transpose());
    bb.add_const(1, 1, -gamma * gamma * Matrix::Identity(m, m));
    bb.add_const(1, 2, sys.D.transpose());
    bb.add_const(2, 2, -Matrix::Identity(p, p));
    prob.add_block(bb.build("bounded_real", Sense::NegativeDefinite));

    if (n > 0) {
        BlockBuilder pos(prob.vars, {n});
        pos.add_term(0, 0, Matrix::Identity(n, n), "X",
                     Matrix::Identity(n, n));
        prob.add_block(pos.build("lyapunov_pd", Sense::PositiveDefinite));
    }
    prob.objective = Vector::Zero(prob.vars.dim());
    return prob;
}

LmiProblem mingain_analysis_lmi(const StateSpace& sys, double nu) {
    if (nu < 0.0) throw InputError("mingain_analysis_lmi: nu must be >= 0");
    const Eigen::Index n = sys.order(), m = sys.inputs(), p = sys.outputs();
    LmiProblem prob;
    prob.vars.add_symmetric("X", n);

    BlockBuilder bb(prob.vars, {n, m, m});
    bb.add_term(0, 0, Matrix::Identity(n, n), "X", sys.A);
    bb.add_term(0, 0, sys.A.transpose(), "X", Matrix::Identity(n, n));
    bb.add_const(0, 0, -sys.C.transpose() * sys.C);
    bb.add_term(0, 1, Matrix::Identity(n, n), "X", sys.B);
    bb.add_const(0, 1, -sys.C.transpose() * sys.D);
    bb.add_const(1, 1, -sys.D.transpose() * sys.D);
    bb.add_const(1, 2, nu * Matrix::Identity(m, m));
    bb.add_const(2, 2, -Matrix::Identity(m, m));
    prob.add_block(bb.build("min_gain", Sense::NegativeDefinite));

    if (n > 0) {
        BlockBuilder pos(prob.vars, {n});
        pos.add_term(0, 0, Matrix::Identity(n, n), "X",
                     Matrix::Identity(n, n));
        prob.add_block(pos.build("lyapunov_psd", Sense::PositiveSemidefinite));
    }
    prob.objective = Vector::Zero(prob.vars.dim());
    return prob;
}

// ---------------------------------------------------------------------------
// Synthesis data and builders

SynthesisData channel_data(const GeneralizedPlant& P,
                           const ChannelSelector& sel) {
    GeneralizedPlant Pj = select_channel(P, sel);
    SynthesisData d;
    d.A = Pj.A;
    d.B2 = Pj.B2;
    d.C2 = Pj.C2;
    d.B1j = Pj.B1;
    d.C1j = Pj.C1;
    d.D11j = Pj.D11;
    d.D12j = Pj.D12;
    d.D21j = Pj.D21;
    return d;
}

void add_filter_vars(VarSpace& vs, Eigen::Index n, Eigen::Index m_u,
                     Eigen::Index p_y, const SynthVarNames& nm) {
    vs.add_symmetric(nm.X1, n);
    vs.add_symmetric(nm.Y1, n);
    vs.add_matrix(nm.An, n, n);
    vs.add_matrix(nm.Bn, n, p_y);
    vs.add_matrix(nm.Cn, m_u, n);
    vs.add_matrix(nm.Dn, m_u, p_y);
}

LmiBlock build_M_lmi(const VarSpace& vs, const SynthesisData& d, double gamma,
                     const SynthVarNames& nm, double eps) {
    const Eigen::Index n = d.A.rows();
    const Eigen::Index mj = d.B1j.cols();
    const Eigen::Index pj = d.C1j.rows();
    const Matrix In = Matrix::Identity(n, n);

    BlockBuilder bb(vs, {n, n, mj, pj});

    // (1,1) A Y1 + Y1 A' + B2 Cn + Cn' B2'
    bb.add_term(0, 0, d.A, nm.Y1, In);
    bb.add_term(0, 0, In, nm.Y1, d.A.transpose());
    bb.add_term(0, 0, d.B2, nm.Cn, In);
    bb.add_term(0, 0, In, nm.Cn, d.B2.transpose(), true);
    // (1,2) A + An' + B2 Dn C2
    bb.add_const(0, 1, d.A);
    bb.add_term(0, 1, In, nm.An, In, true);
    bb.add_term(0, 1, d.B2, nm.Dn, d.C2);
    // (1,3) B1 + B2 Dn D21
    bb.add_const(0, 2, d.B1j);
    bb.add_term(0, 2, d.B2, nm.Dn, d.D21j);
    // (1,4) Y1 C1' + Cn' D12'
    bb.add_term(0, 3, In, nm.Y1, d.C1j.transpose());
    bb.add_term(0, 3, In, nm.Cn, d.D12j.transpose(), true);
    // (2,2) X1 A + A' X1 + Bn C2 + C2' Bn'
    bb.add_term(1, 1, In, nm.X1, d.A);
    bb.add_term(1, 1, d.A.transpose(), nm.X1, In);
    bb.add_term(1, 1, In, nm.Bn, d.C2);
    bb.add_term(1, 1, d.C2.transpose(), nm.Bn, In, true);
    // (2,3) X1 B1 + Bn D21
    bb.add_term(1, 2, In, nm.X1, d.B1j);
    bb.add_term(1, 2, In, nm.Bn, d.D21j);
    // (2,4) C1' + C2' Dn' D12'
    bb.add_const(1, 3, d.C1j.transpose());
    bb.add_term(1, 3, d.C2.transpose(), nm.Dn, d.D12j.transpose(), true);
    // (3,3) -gamma^2 I
    bb.add_const(2, 2, -gamma * gamma * Matrix::Identity(mj, mj));
    // (3,4) D11' + D21' Dn' D12'
    bb.add_const(2, 3, d.D11j.transpose());
    bb.add_term(2, 3, d.D21j.transpose(), nm.Dn, d.D12j.transpose(), true);
    // (4,4) -I
    bb.add_const(3, 3, -Matrix::Identity(pj, pj));

    return bb.build("disturbance_bound", Sense::NegativeDefinite, eps);
}

LmiBlock build_N_bmi_fixed_slack(const VarSpace& vs, const SynthesisData& d,
                                 const SlackVars& sl, const SynthVarNames& nm,
                                 double eps) {
    const Eigen::Index n = d.A.rows();
    const Eigen::Index mj = d.B1j.cols();
    const Eigen::Index pj = d.C1j.rows();
    const Matrix In = Matrix::Identity(n, n);
    if (sl.X.rows() != pj || sl.X.cols() != mj || sl.Y.rows() != pj ||
        sl.Y.cols() != n || sl.Z.rows() != pj || sl.Z.cols() != n)
        throw DimensionMismatch("fault-side slack shapes");

    const Matrix Yt = sl.Y.transpose();  // n x pj
    const Matrix Zt = sl.Z.transpose();
    const Matrix C1tY = d.C1j.transpose() * sl.Y;    // n x n
    const Matrix D12tY = d.D12j.transpose() * sl.Y;  // m_u x n
    const Matrix C1tZ = d.C1j.transpose() * sl.Z;
    const Matrix D12tZ = d.D12j.transpose() * sl.Z;
    const Matrix C1tX = d.C1j.transpose() * sl.X;    // n x mj
    const Matrix D12tX = d.D12j.transpose() * sl.X;  // m_u x mj

    BlockBuilder bb(vs, {n, n, mj, pj});

    // (1,1) A Y1 + B2 Cn + (.)' - (Y1 C1' + Cn' D12') Ys - Ys' (...)'
    bb.add_term(0, 0, d.A, nm.Y1, In);
    bb.add_term(0, 0, In, nm.Y1, d.A.transpose());
    bb.add_term(0, 0, d.B2, nm.Cn, In);
    bb.add_term(0, 0, In, nm.Cn, d.B2.transpose(), true);
    bb.add_term(0, 0, In, nm.Y1, C1tY, false, -1.0);
    bb.add_term(0, 0, In, nm.Cn, D12tY, true, -1.0);
    bb.add_term(0, 0, C1tY.transpose(), nm.Y1, In, false, -1.0);
    bb.add_term(0, 0, D12tY.transpose(), nm.Cn, In, false, -1.0);
    // (1,2) A + An' + B2 Dn C2 - (Y1 C1' + Cn' D12') Zs - Ys'(C1 + D12 Dn C2)
    bb.add_const(0, 1, d.A - Yt * d.C1j);
    bb.add_term(0, 1, In, nm.An, In, true);
    bb.add_term(0, 1, d.B2, nm.Dn, d.C2);
    bb.add_term(0, 1, In, nm.Y1, C1tZ, false, -1.0);
    bb.add_term(0, 1, In, nm.Cn, D12tZ, true, -1.0);
    bb.add_term(0, 1, Yt * d.D12j, nm.Dn, d.C2, false, -1.0);
    // (1,3) B1 + B2 Dn D21 - Ys'(D11 + D12 Dn D21) - (Y1 C1' + Cn' D12') Xs
    bb.add_const(0, 2, d.B1j - Yt * d.D11j);
    bb.add_term(0, 2, d.B2, nm.Dn, d.D21j);
    bb.add_term(0, 2, Yt * d.D12j, nm.Dn, d.D21j, false, -1.0);
    bb.add_term(0, 2, In, nm.Y1, C1tX, false, -1.0);
    bb.add_term(0, 2, In, nm.Cn, D12tX, true, -1.0);
    // (1,4) Ys'
    bb.add_const(0, 3, Yt);
    // (2,2) X1 A + Bn C2 + (.)' - (C1' + C2' Dn' D12') Zs - Zs'(...)
    bb.add_term(1, 1, In, nm.X1, d.A);
    bb.add_term(1, 1, d.A.transpose(), nm.X1, In);
    bb.add_term(1, 1, In, nm.Bn, d.C2);
    bb.add_term(1, 1, d.C2.transpose(), nm.Bn, In, true);
    bb.add_const(1, 1, -C1tZ - C1tZ.transpose());
    bb.add_term(1, 1, d.C2.transpose(), nm.Dn, D12tZ, true, -1.0);
    bb.add_term(1, 1, D12tZ.transpose(), nm.Dn, d.C2, false, -1.0);
    // (2,3) X1 B1 + Bn D21 - Zs'(D11 + D12 Dn D21) - (C1' + C2' Dn' D12') Xs
    bb.add_const(1, 2, -Zt * d.D11j - C1tX);
    bb.add_term(1, 2, In, nm.X1, d.B1j);
    bb.add_term(1, 2, In, nm.Bn, d.D21j);
    bb.add_term(1, 2, Zt * d.D12j, nm.Dn, d.D21j, false, -1.0);
    bb.add_term(1, 2, d.C2.transpose(), nm.Dn, D12tX, true, -1.0);
    // (2,4) Zs'
    bb.add_const(1, 3, Zt);
    // (3,3) nu^2 I - Xs'(D11 + D12 Dn D21) - (.)'
    bb.add_scalar_term(2, 2, nm.nu2, Matrix::Identity(mj, mj));
    {
        const Matrix XtD11 = sl.X.transpose() * d.D11j;
        bb.add_const(2, 2, -XtD11 - XtD11.transpose());
    }
    bb.add_term(2, 2, D12tX.transpose(), nm.Dn, d.D21j, false, -1.0);
    bb.add_term(2, 2, d.D21j.transpose(), nm.Dn, D12tX, true, -1.0);
    // (3,4) Xs'
    bb.add_const(2, 3, sl.X.transpose());
    // (4,4) -I
    bb.add_const(3, 3, -Matrix::Identity(pj, pj));

    return bb.build("fault_bound", Sense::NegativeDefinite, eps);
}

LmiBlock build_N_bmi_fixed_vars(const VarSpace& vs, const SynthesisData& d,
                                const Matrix& X1, const Matrix& Y1,
                                const Matrix& An, const Matrix& Bn,
                                const Matrix& Cn, const Matrix& Dn,
                                double eps) {
    const Eigen::Index n = d.A.rows();
    const Eigen::Index mj = d.B1j.cols();
    const Eigen::Index pj = d.C1j.rows();
    const Matrix Imj = Matrix::Identity(mj, mj);
    const Matrix Ipj = Matrix::Identity(pj, pj);
    const Matrix In = Matrix::Identity(n, n);

    const Matrix Ky = Y1 * d.C1j.transpose() + Cn.transpose() * d.D12j.transpose();  // n x pj
    const Matrix Kz = d.C1j.transpose() + d.C2.transpose() * Dn.transpose() * d.D12j.transpose();
    const Matrix Kx = d.D11j + d.D12j * Dn * d.D21j;  // pj x mj
    const Matrix Cy = d.C1j + d.D12j * Dn * d.C2;     // pj x n

    const Matrix G11 = d.A * Y1 + d.B2 * Cn + (d.A * Y1 + d.B2 * Cn).transpose();
    const Matrix G12 = d.A + An.transpose() + d.B2 * Dn * d.C2;
    const Matrix G13 = d.B1j + d.B2 * Dn * d.D21j;
    const Matrix G22 = X1 * d.A + Bn * d.C2 + (X1 * d.A + Bn * d.C2).transpose();
    const Matrix G23 = X1 * d.B1j + Bn * d.D21j;

    BlockBuilder bb(vs, {n, n, mj, pj});

    // (1,1) G11 - Ky Ys - Ys' Ky'
    bb.add_const(0, 0, G11);
    bb.add_term(0, 0, Ky, "Ys", In, false, -1.0);
    bb.add_term(0, 0, In, "Ys", Ky.transpose(), true, -1.0);
    // (1,2) G12 - Ky Zs - Ys' Cy
    bb.add_const(0, 1, G12);
    bb.add_term(0, 1, Ky, "Zs", In, false, -1.0);
    bb.add_term(0, 1, In, "Ys", Cy, true, -1.0);
    // (1,3) G13 - Ys' Kx - Ky Xs
    bb.add_const(0, 2, G13);
    bb.add_term(0, 2, In, "Ys", Kx, true, -1.0);
    bb.add_term(0, 2, Ky, "Xs", Imj, false, -1.0);
    // (1,4) Ys'
    bb.add_term(0, 3, In, "Ys", Ipj, true);
    // (2,2) G22 - Kz Zs - Zs' Kz'
    bb.add_const(1, 1, G22);
    bb.add_term(1, 1, Kz, "Zs", In, false, -1.0);
    bb.add_term(1, 1, In, "Zs", Kz.transpose(), true, -1.0);
    // (2,3) G23 - Zs' Kx - Kz Xs
    bb.add_const(1, 2, G23);
    bb.add_term(1, 2, In, "Zs", Kx, true, -1.0);
    bb.add_term(1, 2, Kz, "Xs", Imj, false, -1.0);
    // (2,4) Zs'
    bb.add_term(1, 3, In, "Zs", Ipj, true);
    // (3,3) nu^2 I - Xs' Kx - Kx' Xs
    bb.add_scalar_term(2, 2, "nu2", Imj);
    bb.add_term(2, 2, Imj, "Xs", Kx, true, -1.0);
    bb.add_term(2, 2, Kx.transpose(), "Xs", Imj, false, -1.0);
    // (3,4) Xs'
    bb.add_term(2, 3, Imj, "Xs", Ipj, true);
    // (4,4) -I
    bb.add_const(3, 3, -Ipj);

    return bb.build("fault_bound_slack", Sense::NegativeDefinite, eps);
}

LmiBlock build_coupling_lmi(const VarSpace& vs, Eigen::Index n,
                            const SynthVarNames& nm, double eps) {
    const Matrix In = Matrix::Identity(n, n);
    BlockBuilder bb(vs, {n, n});
    bb.add_term(0, 0, In, nm.X1, In);
    bb.add_const(0, 1, In);
    bb.add_term(1, 1, In, nm.Y1, In);
    return bb.build("coupling", Sense::PositiveDefinite, eps);
}

}  // namespace fdshape
