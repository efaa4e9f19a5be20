#include "doctest.h"
#include "fdshape/lmi.hpp"
#include "fdshape/sdp.hpp"
#include "test_util.hpp"

using namespace fdshape;
using testutil::random_matrix;
using testutil::random_symmetric;
using testutil::rel_err;

namespace {

struct SynthPoint {
    Matrix X1, Y1, An, Bn, Cn, Dn;
    double nu2 = 0.0;
};

SynthesisData random_channel_data(std::mt19937_64& rng, Eigen::Index n,
                          Eigen::Index mu, Eigen::Index py, Eigen::Index mj,
                          Eigen::Index pj) {
    SynthesisData d;
    d.A = random_matrix(rng, n, n);
    d.B2 = random_matrix(rng, n, mu);
    d.C2 = random_matrix(rng, py, n);
    d.B1j = random_matrix(rng, n, mj);
    d.C1j = random_matrix(rng, pj, n);
    d.D11j = random_matrix(rng, pj, mj);
    d.D12j = random_matrix(rng, pj, mu);
    d.D21j = random_matrix(rng, py, mj);
    return d;
}

SynthPoint random_point(std::mt19937_64& rng, const SynthesisData& d) {
    const Eigen::Index n = d.A.rows();
    const Eigen::Index mu = d.B2.cols();
    const Eigen::Index py = d.C2.rows();
    SynthPoint p;
    p.X1 = random_symmetric(rng, n);
    p.Y1 = random_symmetric(rng, n);
    p.An = random_matrix(rng, n, n);
    p.Bn = random_matrix(rng, n, py);
    p.Cn = random_matrix(rng, mu, n);
    p.Dn = random_matrix(rng, mu, py);
    p.nu2 = 0.37;
    return p;
}

// Independent dense restatement of the disturbance-side inequality.
Matrix dense_M(const SynthesisData& d, double gamma, const SynthPoint& v) {
    const Eigen::Index n = d.A.rows(), mj = d.B1j.cols(), pj = d.C1j.rows();
    Matrix M = Matrix::Zero(2 * n + mj + pj, 2 * n + mj + pj);
    auto set = [&](Eigen::Index r, Eigen::Index c, const Matrix& V) {
        M.block(r, c, V.rows(), V.cols()) = V;
        if (r != c)
            M.block(c, r, V.cols(), V.rows()) = V.transpose();
    };
    Eigen::Index o2 = n, o3 = 2 * n, o4 = 2 * n + mj;
    set(0, 0, d.A * v.Y1 + v.Y1 * d.A.transpose() + d.B2 * v.Cn +
                  v.Cn.transpose() * d.B2.transpose());
    set(0, o2, d.A + v.An.transpose() + d.B2 * v.Dn * d.C2);
    set(0, o3, d.B1j + d.B2 * v.Dn * d.D21j);
    set(0, o4, v.Y1 * d.C1j.transpose() + v.Cn.transpose() * d.D12j.transpose());
    set(o2, o2, v.X1 * d.A + d.A.transpose() * v.X1 + v.Bn * d.C2 +
                    d.C2.transpose() * v.Bn.transpose());
    set(o2, o3, v.X1 * d.B1j + v.Bn * d.D21j);
    set(o2, o4, d.C1j.transpose() +
                    d.C2.transpose() * v.Dn.transpose() * d.D12j.transpose());
    set(o3, o3, -gamma * gamma * Matrix::Identity(mj, mj));
    set(o3, o4, d.D11j.transpose() +
                    d.D21j.transpose() * v.Dn.transpose() * d.D12j.transpose());
    set(o4, o4, -Matrix::Identity(pj, pj));
    return M;
}

// Independent dense restatement of the fault-side inequality with slacks.
Matrix dense_N(const SynthesisData& d, const SynthPoint& v,
               const SlackVars& s) {
    const Eigen::Index n = d.A.rows(), mj = d.B1j.cols(), pj = d.C1j.rows();
    Matrix N = Matrix::Zero(2 * n + mj + pj, 2 * n + mj + pj);
    auto set = [&](Eigen::Index r, Eigen::Index c, const Matrix& V) {
        N.block(r, c, V.rows(), V.cols()) = V;
        if (r != c)
            N.block(c, r, V.cols(), V.rows()) = V.transpose();
    };
    Matrix Ky = v.Y1 * d.C1j.transpose() + v.Cn.transpose() * d.D12j.transpose();
    Matrix Kz = d.C1j.transpose() +
                d.C2.transpose() * v.Dn.transpose() * d.D12j.transpose();
    Matrix Kx = d.D11j + d.D12j * v.Dn * d.D21j;
    Matrix Cy = d.C1j * v.Y1 + d.D12j * v.Cn;
    Matrix Cz = d.C1j + d.D12j * v.Dn * d.C2;
    Eigen::Index o2 = n, o3 = 2 * n, o4 = 2 * n + mj;
    set(0, 0, d.A * v.Y1 + d.B2 * v.Cn + v.Y1 * d.A.transpose() +
                  v.Cn.transpose() * d.B2.transpose() - Ky * s.Y -
                  s.Y.transpose() * Cy);
    set(0, o2, d.A + v.An.transpose() + d.B2 * v.Dn * d.C2 - Ky * s.Z -
                   s.Y.transpose() * Cz);
    set(0, o3, d.B1j + d.B2 * v.Dn * d.D21j - s.Y.transpose() * Kx - Ky * s.X);
    set(0, o4, s.Y.transpose());
    set(o2, o2, v.X1 * d.A + v.Bn * d.C2 + d.A.transpose() * v.X1 +
                    d.C2.transpose() * v.Bn.transpose() - Kz * s.Z -
                    s.Z.transpose() * Cz);
    set(o2, o3, v.X1 * d.B1j + v.Bn * d.D21j - s.Z.transpose() * Kx - Kz * s.X);
    set(o2, o4, s.Z.transpose());
    set(o3, o3, v.nu2 * Matrix::Identity(mj, mj) - s.X.transpose() * Kx -
                    Kx.transpose() * s.X);
    set(o3, o4, s.X.transpose());
    set(o4, o4, -Matrix::Identity(pj, pj));
    return N;
}

}  // namespace

TEST_CASE("flat variable indexing") {
    VarSpace vs;
    vs.add_symmetric("P", 3);
    vs.add_matrix("K", 2, 3);
    vs.add_scalar("t");
    CHECK(vs.dim() == 6 + 6 + 1);
    CHECK(vs.has("K"));
    CHECK_FALSE(vs.has("missing"));
    CHECK_THROWS_AS(vs.add_scalar("t"), InputError);
    CHECK_THROWS_AS(vs.info("missing"), InputError);

    // symmetric canonicalization
    CHECK(vs.index("P", 2, 1) == vs.index("P", 1, 2));
    CHECK(vs.index("P", 0, 0) == 0);
    CHECK(vs.index("K", 0, 0) == 6);
    CHECK(vs.index("t", 0, 0) == 12);

    auto rng = testutil::make_rng(11);
    Vector x = Vector::Zero(vs.dim());
    Matrix P = random_symmetric(rng, 3);
    Matrix K = random_matrix(rng, 2, 3);
    vs.pack(x, "P", P);
    vs.pack(x, "K", K);
    vs.pack(x, "t", Matrix::Constant(1, 1, 4.5));
    CHECK(rel_err(vs.unpack(x, "P"), P) < 1e-15);
    CHECK(rel_err(vs.unpack(x, "K"), K) < 1e-15);
    CHECK(vs.unpack(x, "t")(0, 0) == 4.5);

    // pack symmetrizes slightly asymmetric input
    Matrix Pa = P;
    Pa(0, 1) += 1e-13;
    vs.pack(x, "P", Pa);
    CHECK(std::abs(vs.unpack(x, "P")(0, 1) - vs.unpack(x, "P")(1, 0)) == 0.0);
}

TEST_CASE("block builder places terms and mirrors") {
    auto rng = testutil::make_rng(21);
    VarSpace vs;
    vs.add_symmetric("X", 2);
    vs.add_matrix("V", 2, 3);

    Vector x = Vector::Zero(vs.dim());
    Matrix X = random_symmetric(rng, 2);
    Matrix V = random_matrix(rng, 2, 3);
    vs.pack(x, "X", X);
    vs.pack(x, "V", V);

    SUBCASE("identity sandwich on the diagonal") {
        BlockBuilder bb(vs, {2});
        bb.add_term(0, 0, Matrix::Identity(2, 2), "X", Matrix::Identity(2, 2));
        LmiBlock blk = bb.build("b", Sense::NegativeDefinite);
        CHECK(rel_err(blk.evaluate(x), X) < 1e-15);
    }
    SUBCASE("pre and post shaping in an off-diagonal block") {
        Matrix pre = random_matrix(rng, 2, 2), post = random_matrix(rng, 3, 3);
        BlockBuilder bb(vs, {2, 3});
        bb.add_term(0, 1, pre, "V", post);
        bb.add_const(0, 0, -Matrix::Identity(2, 2));
        bb.add_const(1, 1, -Matrix::Identity(3, 3));
        Matrix got = bb.build("b", Sense::NegativeDefinite).evaluate(x);
        Matrix want = pre * V * post;
        CHECK(rel_err(Matrix(got.block(0, 2, 2, 3)), want) < 1e-13);
        CHECK(rel_err(Matrix(got.block(2, 0, 3, 2)), Matrix(want.transpose())) <
              1e-13);
    }
    SUBCASE("transposed variable and sign") {
        Matrix pre = random_matrix(rng, 2, 3), post = random_matrix(rng, 2, 2);
        BlockBuilder bb(vs, {2, 2});
        bb.add_term(0, 1, pre, "V", post, true, -1.0);
        bb.add_const(0, 0, Matrix::Zero(2, 2));
        bb.add_const(1, 1, Matrix::Zero(2, 2));
        Matrix got = bb.build("b", Sense::NegativeDefinite).evaluate(x);
        CHECK(rel_err(Matrix(got.block(0, 2, 2, 2)),
                      Matrix(-pre * V.transpose() * post)) < 1e-13);
    }
    SUBCASE("scalar variable term") {
        VarSpace vt;
        vt.add_scalar("s");
        Vector xs = Vector::Constant(1, 2.5);
        BlockBuilder bb(vt, {2});
        Matrix body = random_symmetric(rng, 2);
        bb.add_scalar_term(0, 0, "s", body);
        Matrix got = bb.build("b", Sense::PositiveSemidefinite, 0.0).evaluate(xs);
        CHECK(rel_err(got, Matrix(2.5 * body)) < 1e-15);
    }
    SUBCASE("asymmetric diagonal accumulation is rejected") {
        Matrix pre = random_matrix(rng, 2, 2);
        BlockBuilder bb(vs, {2});
        bb.add_term(0, 0, pre, "X", Matrix::Identity(2, 2));
        CHECK_THROWS_AS(bb.build("b", Sense::NegativeDefinite), InputError);
    }
}

TEST_CASE("bounded real block matches its dense form") {
    auto rng = testutil::make_rng(31);
    StateSpace g = testutil::random_stable_ss(rng, 3, 2, 2);
    double gamma = 1.7;
    LmiProblem prob = brl_analysis_lmi(g, gamma);
    REQUIRE(prob.blocks.size() == 2);

    Matrix X = random_symmetric(rng, 3);
    Vector x = Vector::Zero(prob.vars.dim());
    prob.vars.pack(x, "X", X);

    Matrix want = Matrix::Zero(7, 7);
    want.block(0, 0, 3, 3) = X * g.A + g.A.transpose() * X;
    want.block(0, 3, 3, 2) = X * g.B;
    want.block(3, 0, 2, 3) = (X * g.B).transpose();
    want.block(0, 5, 3, 2) = g.C.transpose();
    want.block(5, 0, 2, 3) = g.C;
    want.block(3, 3, 2, 2) = -gamma * gamma * Matrix::Identity(2, 2);
    want.block(3, 5, 2, 2) = g.D.transpose();
    want.block(5, 3, 2, 2) = g.D;
    want.block(5, 5, 2, 2) = -Matrix::Identity(2, 2);
    CHECK(rel_err(prob.blocks[0].evaluate(x), want) < 1e-14);
    CHECK(rel_err(prob.blocks[1].evaluate(x), X) < 1e-15);
    CHECK(prob.pure_feasibility());
}

TEST_CASE("minimum gain block matches its dense form") {
    auto rng = testutil::make_rng(32);
    StateSpace g = testutil::random_stable_ss(rng, 3, 2, 2, 1.0);
    double nu = 0.4;
    LmiProblem prob = mingain_analysis_lmi(g, nu);
    REQUIRE(prob.blocks.size() == 2);

    Matrix X = random_symmetric(rng, 3);
    Vector x = Vector::Zero(prob.vars.dim());
    prob.vars.pack(x, "X", X);

    Matrix want = Matrix::Zero(7, 7);
    want.block(0, 0, 3, 3) =
        X * g.A + g.A.transpose() * X - g.C.transpose() * g.C;
    want.block(0, 3, 3, 2) = X * g.B - g.C.transpose() * g.D;
    want.block(3, 0, 2, 3) = want.block(0, 3, 3, 2).transpose();
    want.block(3, 3, 2, 2) = -g.D.transpose() * g.D;
    want.block(3, 5, 2, 2) = nu * Matrix::Identity(2, 2);
    want.block(5, 3, 2, 2) = nu * Matrix::Identity(2, 2);
    want.block(5, 5, 2, 2) = -Matrix::Identity(2, 2);
    CHECK(rel_err(prob.blocks[0].evaluate(x), want) < 1e-14);
}

TEST_CASE("degenerate static system blocks") {
    StateSpace g(Matrix::Constant(1, 1, 2.0));
    LmiProblem prob = brl_analysis_lmi(g, 3.0);
    CHECK(prob.blocks.size() == 1);  // no Lyapunov variable at n = 0
    CHECK(prob.vars.dim() == 0);
}

TEST_CASE("disturbance side synthesis block against substitution oracle") {
    auto rng = testutil::make_rng(41);
    for (int t = 0; t < 20; ++t) {
        Eigen::Index n = 1 + (t % 3), mu = 1 + (t % 2), py = 1 + ((t + 1) % 2);
        Eigen::Index mj = 1 + (t % 2), pj = 1 + ((t + 2) % 3) % 2;
        SynthesisData d = random_channel_data(rng, n, mu, py, mj, pj);
        SynthPoint v = random_point(rng, d);
        double gamma = 0.5 + 0.1 * t;

        VarSpace vs;
        SynthVarNames nm;
        add_filter_vars(vs, n, mu, py, nm);
        Vector x = Vector::Zero(vs.dim());
        vs.pack(x, nm.X1, v.X1);
        vs.pack(x, nm.Y1, v.Y1);
        vs.pack(x, nm.An, v.An);
        vs.pack(x, nm.Bn, v.Bn);
        vs.pack(x, nm.Cn, v.Cn);
        vs.pack(x, nm.Dn, v.Dn);

        LmiBlock M = build_M_lmi(vs, d, gamma, nm);
        CHECK(rel_err(M.evaluate(x), dense_M(d, gamma, v)) < 1e-12);
    }
}

TEST_CASE("fault side synthesis block against substitution oracle") {
    auto rng = testutil::make_rng(42);
    for (int t = 0; t < 20; ++t) {
        Eigen::Index n = 1 + (t % 3), mu = 1 + (t % 2), py = 1 + ((t + 1) % 2);
        Eigen::Index mj = 1 + ((t + 1) % 3) % 2, pj = 1 + (t % 2);
        SynthesisData d = random_channel_data(rng, n, mu, py, mj, pj);
        SynthPoint v = random_point(rng, d);
        v.nu2 = 0.1 + 0.05 * t;
        SlackVars s{random_matrix(rng, pj, mj), random_matrix(rng, pj, n),
                    random_matrix(rng, pj, n)};
        Matrix ref = dense_N(d, v, s);

        // frozen slacks, live filter variables
        VarSpace vs;
        SynthVarNames nm;
        add_filter_vars(vs, n, mu, py, nm);
        vs.add_scalar(nm.nu2);
        Vector x = Vector::Zero(vs.dim());
        vs.pack(x, nm.X1, v.X1);
        vs.pack(x, nm.Y1, v.Y1);
        vs.pack(x, nm.An, v.An);
        vs.pack(x, nm.Bn, v.Bn);
        vs.pack(x, nm.Cn, v.Cn);
        vs.pack(x, nm.Dn, v.Dn);
        vs.pack(x, nm.nu2, Matrix::Constant(1, 1, v.nu2));
        LmiBlock Nfs = build_N_bmi_fixed_slack(vs, d, s, nm);
        CHECK(rel_err(Nfs.evaluate(x), ref) < 1e-12);

        // frozen filter variables, live slacks
        VarSpace vs2;
        vs2.add_matrix("Xs", pj, mj);
        vs2.add_matrix("Ys", pj, n);
        vs2.add_matrix("Zs", pj, n);
        vs2.add_scalar("nu2");
        Vector y = Vector::Zero(vs2.dim());
        vs2.pack(y, "Xs", s.X);
        vs2.pack(y, "Ys", s.Y);
        vs2.pack(y, "Zs", s.Z);
        vs2.pack(y, "nu2", Matrix::Constant(1, 1, v.nu2));
        LmiBlock Nfv =
            build_N_bmi_fixed_vars(vs2, d, v.X1, v.Y1, v.An, v.Bn, v.Cn, v.Dn);
        CHECK(rel_err(Nfv.evaluate(y), ref) < 1e-12);
    }
}

TEST_CASE("lyapunov coupling block") {
    auto rng = testutil::make_rng(43);
    VarSpace vs;
    SynthVarNames nm;
    add_filter_vars(vs, 3, 1, 2, nm);
    Vector x = Vector::Zero(vs.dim());
    Matrix X1 = random_symmetric(rng, 3), Y1 = random_symmetric(rng, 3);
    vs.pack(x, nm.X1, X1);
    vs.pack(x, nm.Y1, Y1);

    LmiBlock c = build_coupling_lmi(vs, 3, nm);
    Matrix got = c.evaluate(x);
    CHECK(rel_err(Matrix(got.block(0, 0, 3, 3)), X1) < 1e-15);
    CHECK(rel_err(Matrix(got.block(0, 3, 3, 3)), Matrix(Matrix::Identity(3, 3))) <
          1e-15);
    CHECK(rel_err(Matrix(got.block(3, 3, 3, 3)), Y1) < 1e-15);
    CHECK(c.sense == Sense::PositiveDefinite);
}
