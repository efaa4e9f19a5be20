#include "doctest.h"
#include "fdshape/norms.hpp"
#include "fdshape/synthesis.hpp"
#include "test_util.hpp"

using namespace fdshape;
using testutil::crel_err;
using testutil::random_matrix;
using testutil::random_spd;
using testutil::random_symmetric;
using testutil::rel_err;

namespace {

const RationalTF kG({1, 2}, {1, 1});
const RationalTF kK({1}, {1});
const RationalTF kGd({1, 2}, {1, 5});
const RationalTF kGf({1, 3}, {1, 4});

GeneralizedPlant toy_plant() { return build_fdi_plant(kG, kK, kGd, kGf); }

StateSpace random_filter(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m,
                         Eigen::Index p, double d_scale = 0.4) {
    return StateSpace{random_matrix(rng, n, n), random_matrix(rng, n, m),
                      random_matrix(rng, p, n),
                      random_matrix(rng, p, m, d_scale)};
}

}  // namespace

TEST_CASE("loop absorbing substitution: scalar closed form") {
    // D22 = 0.5, Dc = 1: Dbar = 2, so Dc2 = 2
    StateSpace Q(Matrix::Constant(1, 1, 1.0));
    TransformedFilterVars t = forward_cov(Q, Matrix::Constant(1, 1, 0.5));
    CHECK(t.D_c2(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("substitution forward formulas") {
    auto rng = testutil::make_rng(501);
    for (int t = 0; t < 20; ++t) {
        StateSpace Q = random_filter(rng, 3, 2, 2);
        Matrix D22 = random_matrix(rng, 2, 2, 0.3);
        TransformedFilterVars f = forward_cov(Q, D22);

        Matrix Dbar = (Matrix::Identity(2, 2) - D22 * Q.D).inverse();
        CHECK(rel_err(f.D_c2, Matrix(Q.D * Dbar)) < 1e-12);
        CHECK(rel_err(f.B_c2, Matrix(Q.B * Dbar)) < 1e-12);
        CHECK(rel_err(f.C_c2,
                      Matrix((Matrix::Identity(2, 2) + Q.D * Dbar * D22) * Q.C)) <
              1e-12);
        CHECK(rel_err(f.A_c2, Matrix(Q.A + Q.B * Dbar * D22 * Q.C)) < 1e-12);
    }
}

TEST_CASE("substitution round trip including nonzero D22") {
    auto rng = testutil::make_rng(502);
    for (int t = 0; t < 100; ++t) {
        Eigen::Index n = 1 + (t % 4), m = 1 + (t % 3), p = 1 + ((t + 1) % 3);
        StateSpace Q = random_filter(rng, n, m, p);
        Matrix D22 = random_matrix(rng, m, p, (t % 5 == 0) ? 0.0 : 0.3);
        TransformedFilterVars f = forward_cov(Q, D22);
        StateSpace back = reverse_cov(f, D22);
        CHECK(rel_err(back.A, Q.A) < 1e-12);
        CHECK(rel_err(back.B, Q.B) < 1e-12);
        CHECK(rel_err(back.C, Q.C) < 1e-12);
        CHECK(rel_err(back.D, Q.D) < 1e-12);
    }
}

TEST_CASE("substitution absorbs the algebraic loop") {
    // closing Q around a plant with feedthrough D22 equals closing the
    // transformed filter around the same plant with D22 removed
    auto rng = testutil::make_rng(503);
    for (int t = 0; t < 10; ++t) {
        GeneralizedPlant P;
        Eigen::Index n = 3, mw = 2, mu = 2, pz = 2, py = 2;
        P.A = random_matrix(rng, n, n);
        P.B1 = random_matrix(rng, n, mw);
        P.B2 = random_matrix(rng, n, mu);
        P.C1 = random_matrix(rng, pz, n);
        P.C2 = random_matrix(rng, py, n);
        P.D11 = random_matrix(rng, pz, mw);
        P.D12 = random_matrix(rng, pz, mu);
        P.D21 = random_matrix(rng, py, mw);
        P.D22 = random_matrix(rng, py, mu, 0.3);
        P.w_channels = {{"d", 0, mw}};
        P.z_channels = {{"e", 0, pz}};

        StateSpace Q = random_filter(rng, 2, py, mu);
        TransformedFilterVars f = forward_cov(Q, P.D22);

        GeneralizedPlant P0 = P;
        P0.D22.setZero();
        StateSpace cl = close_loop(P, Q);
        StateSpace cl2 =
            close_loop(P0, StateSpace{f.A_c2, f.B_c2, f.C_c2, f.D_c2});
        for (double w : {0.0, 1.1, 6.0}) {
            CHECK(crel_err(freq_response(cl2, w), freq_response(cl, w)) < 1e-9);
        }
    }
}

TEST_CASE("ill conditioned recovery is rejected") {
    // I + Dc2 D22 singular: Dc2 = -1, D22 = 1
    TransformedFilterVars f;
    f.A_c2 = Matrix::Constant(1, 1, -1.0);
    f.B_c2 = Matrix::Identity(1, 1);
    f.C_c2 = Matrix::Identity(1, 1);
    f.D_c2 = Matrix::Constant(1, 1, -1.0);
    CHECK_THROWS_AS(reverse_cov(f, Matrix::Identity(1, 1)), SingularRecovery);
}

TEST_CASE("completion inverts the coupling product") {
    auto rng = testutil::make_rng(504);
    Matrix X1 = random_spd(rng, 3), Y1 = random_spd(rng, 3);
    MatrixCompletion c = make_completion(X1, Y1);
    CHECK(rel_err(Matrix(c.X2 * c.Y2.transpose()),
                  Matrix(Matrix::Identity(3, 3) - X1 * Y1)) < 1e-12);
    CHECK(rel_err(c.Y2, Matrix(Matrix::Identity(3, 3))) < 1e-15);

    CHECK_THROWS_AS(
        make_completion(Matrix::Identity(2, 2), Matrix::Identity(2, 2)),
        SingularCompletion);
}

TEST_CASE("extraction satisfies the defining relations") {
    auto rng = testutil::make_rng(505);
    GeneralizedPlant P = toy_plant();
    const Eigen::Index n = P.order();
    for (int t = 0; t < 10; ++t) {
        DecisionVars v;
        v.X1 = random_spd(rng, n);
        v.Y1 = random_spd(rng, n);
        v.An = random_matrix(rng, n, n);
        v.Bn = random_matrix(rng, n, P.y_size());
        v.Cn = random_matrix(rng, P.u_size(), n);
        v.Dn = random_matrix(rng, P.u_size(), P.y_size());

        TransformedFilterVars f = complete_and_extract(v, P);
        MatrixCompletion c = make_completion(v.X1, v.Y1);

        // defining relations of the affine parametrization
        CHECK(rel_err(v.Dn, f.D_c2) < 1e-10);
        CHECK(rel_err(v.Cn, Matrix(f.D_c2 * P.C2 * v.Y1 + f.C_c2 * c.Y2)) <
              1e-10);
        CHECK(rel_err(v.Bn, Matrix(v.X1 * P.B2 * f.D_c2 + c.X2 * f.B_c2)) <
              1e-10);
        CHECK(rel_err(v.An,
                      Matrix(v.X1 * (P.A + P.B2 * f.D_c2 * P.C2) * v.Y1 +
                             c.X2 * f.B_c2 * P.C2 * v.Y1 +
                             v.X1 * P.B2 * f.C_c2 * c.Y2 +
                             c.X2 * f.A_c2 * c.Y2)) < 1e-9);
    }
}

TEST_CASE("disturbance bound block equals closed loop bounded-real form") {
    // For any numeric decision point, the synthesis block must equal the
    // congruence-transformed bounded-real block of the reconstructed loop.
    auto rng = testutil::make_rng(506);
    GeneralizedPlant P = toy_plant();
    const Eigen::Index n = P.order();
    const ChannelSelector sel = make_selector(P, "e", "d");
    const SynthesisData dd = channel_data(P, sel);
    const Eigen::Index mj = dd.B1j.cols(), pj = dd.C1j.rows();
    const double gamma = 0.8;

    VarSpace vs;
    SynthVarNames nm;
    add_filter_vars(vs, n, P.u_size(), P.y_size(), nm);
    LmiBlock M = build_M_lmi(vs, dd, gamma, nm);

    for (int t = 0; t < 10; ++t) {
        DecisionVars v;
        v.X1 = random_spd(rng, n);
        v.Y1 = random_spd(rng, n);
        v.An = random_matrix(rng, n, n);
        v.Bn = random_matrix(rng, n, P.y_size());
        v.Cn = random_matrix(rng, P.u_size(), n);
        v.Dn = random_matrix(rng, P.u_size(), P.y_size());

        Vector x = Vector::Zero(vs.dim());
        vs.pack(x, nm.X1, v.X1);
        vs.pack(x, nm.Y1, v.Y1);
        vs.pack(x, nm.An, v.An);
        vs.pack(x, nm.Bn, v.Bn);
        vs.pack(x, nm.Cn, v.Cn);
        vs.pack(x, nm.Dn, v.Dn);

        TransformedFilterVars f = complete_and_extract(v, P);
        MatrixCompletion c = make_completion(v.X1, v.Y1);

        // closed loop in the transformed coordinates (D22 = 0 here anyway)
        GeneralizedPlant Pd = select_channel(P, sel);
        Pd.D22 = P.D22;
        StateSpace cl =
            close_loop(Pd, StateSpace{f.A_c2, f.B_c2, f.C_c2, f.D_c2});

        // storage completion: X = [[X1, X2], [X2', -X2' Y1]]
        Matrix X(2 * n, 2 * n);
        X.topLeftCorner(n, n) = v.X1;
        X.topRightCorner(n, n) = c.X2;
        X.bottomLeftCorner(n, n) = c.X2.transpose();
        X.bottomRightCorner(n, n) = -c.X2.transpose() * v.Y1;

        Matrix brl(2 * n + mj + pj, 2 * n + mj + pj);
        brl.setZero();
        brl.topLeftCorner(2 * n, 2 * n) =
            X * cl.A + cl.A.transpose() * X;
        brl.block(0, 2 * n, 2 * n, mj) = X * cl.B;
        brl.block(2 * n, 0, mj, 2 * n) = (X * cl.B).transpose();
        brl.block(0, 2 * n + mj, 2 * n, pj) = cl.C.transpose();
        brl.block(2 * n + mj, 0, pj, 2 * n) = cl.C;
        brl.block(2 * n, 2 * n, mj, mj) = -gamma * gamma * Matrix::Identity(mj, mj);
        brl.block(2 * n, 2 * n + mj, mj, pj) = cl.D.transpose();
        brl.block(2 * n + mj, 2 * n, pj, mj) = cl.D;
        brl.block(2 * n + mj, 2 * n + mj, pj, pj) = -Matrix::Identity(pj, pj);

        // congruence by blkdiag([Y1 I; I 0] -> pi1, I, I)
        Matrix pi1(2 * n, 2 * n);
        pi1.topLeftCorner(n, n) = v.Y1;
        pi1.topRightCorner(n, n) = Matrix::Identity(n, n);
        pi1.bottomLeftCorner(n, n) = Matrix::Identity(n, n);
        pi1.bottomRightCorner(n, n).setZero();
        Matrix T = Matrix::Identity(2 * n + mj + pj, 2 * n + mj + pj);
        T.topLeftCorner(2 * n, 2 * n) = pi1;

        Matrix want = T.transpose() * brl * T;
        Matrix got = M.evaluate(x);
        CHECK(rel_err(got, want) < 1e-8);
    }
}

TEST_CASE("channel measurement on a hand built filter") {
    GeneralizedPlant P = toy_plant();
    // static filter reading only the first measurement
    Matrix D(1, 2);
    D << 0.7, 0.0;
    StateSpace Q(D);
    VerifyResult vr = verify(P, Q);

    RationalTF one = RationalTF::constant(1.0);
    RationalTF so = tf_inv(tf_add(one, tf_mul(kK, kG)));
    StateSpace tyd = tf_to_ss(cancel(tf_mul(so, kGd)));
    StateSpace tyf = tf_to_ss(cancel(tf_mul(tf_mul(so, kG), kGf)));
    CHECK(vr.hinf_disturbance ==
          doctest::Approx(0.7 * hinf_norm(tyd)).epsilon(1e-6));
    CHECK(vr.hminus_fault ==
          doctest::Approx(0.7 * hminus_index(tyf)).epsilon(1e-4));
    CHECK(vr.J == doctest::Approx(vr.hminus_fault / vr.hinf_disturbance)
                      .epsilon(1e-12));
    CHECK(vr.omegas.size() == vr.smax_disturbance.size());
    CHECK(vr.omegas.size() == vr.smin_fault.size());

    // ratio invariance under output scaling
    VerifyResult vr2 = verify(P, scale_output(Q, 5.0));
    CHECK(vr2.J == doctest::Approx(vr.J).epsilon(1e-9));
}

TEST_CASE("verify rejects a destabilizing filter") {
    GeneralizedPlant P;  // static loop y = w + 2 u, e = u, unstable with u = y
    P.A = Matrix::Zero(1, 1);
    P.A(0, 0) = 1.0;  // open loop already unstable, no filter feedback
    P.B1 = Matrix::Identity(1, 1);
    P.B2 = Matrix::Zero(1, 1);
    P.C1 = Matrix::Zero(1, 1);
    P.C2 = Matrix::Identity(1, 1);
    P.D11 = Matrix::Zero(1, 1);
    P.D12 = Matrix::Identity(1, 1);
    P.D21 = Matrix::Zero(1, 1);
    P.D22 = Matrix::Zero(1, 1);
    P.w_channels = {{"d", 0, 1}};
    P.z_channels = {{"e", 0, 1}};
    CHECK_THROWS_AS(verify(P, StateSpace(Matrix::Identity(1, 1)), "d", "d", "e"),
                    UnstableLoop);
}

TEST_CASE("synthesis on the toy problem produces a sound certificate") {
    GeneralizedPlant P = toy_plant();
    SynthesisConfig cfg;
    cfg.gamma0 = 1.0;
    SynthesisResult res = synthesize(P, cfg);

    REQUIRE(res.Q.inputs() == 2);
    REQUIRE(res.Q.outputs() == 1);
    CHECK(is_hurwitz(res.Q));

    // certificate soundness against the swept measurements
    CHECK(res.check.hinf_disturbance <= cfg.gamma0 * 1.001);
    CHECK(res.nu_certified <= res.check.hminus_fault * 1.001 + 1e-9);
    CHECK(res.nu_certified > 0.0);

    // alternation history: nu^2 never decreases along the recorded path
    REQUIRE(res.history.size() >= 1);
    double prev = 0.0;
    for (const auto& rec : res.history) {
        CHECK(rec.nu2_step1 >= prev - 1e-6);
        CHECK(rec.nu2_step2 >= rec.nu2_step1 - 1e-6);
        prev = rec.nu2_step2;
    }
    CHECK(res.nu_certified ==
          doctest::Approx(std::sqrt(std::max(
              res.history.back().nu2_step1, res.history.back().nu2_step2))));
}

TEST_CASE("structurally hopeless fault channel is refused") {
    GeneralizedPlant P =
        build_fdi_plant(kG, kK, kGd, RationalTF({1}, {1, 4}));
    CHECK_THROWS_AS(synthesize(P, {}), InfeasibleAtStep1);
}

TEST_CASE("independent storage mode also certifies soundly") {
    GeneralizedPlant P = toy_plant();
    SynthesisConfig cfg;
    cfg.shared_lyapunov = false;
    SynthesisResult res = synthesize(P, cfg);
    CHECK(res.check.hinf_disturbance <= cfg.gamma0 * 1.001);
    CHECK(res.nu_certified <= res.check.hminus_fault * 1.001 + 1e-9);
}

TEST_CASE("output rescaling flattens the disturbance response") {
    GeneralizedPlant P = toy_plant();
    SynthesisConfig cfg;
    SynthesisResult res = synthesize(P, cfg);

    StateSpace Q2 = post_scale_update(res.balanced, res.Q, cfg.gamma0);
    VerifyResult before = verify(res.balanced, res.Q);
    VerifyResult after = verify(res.balanced, Q2);

    // |T_ed| pinned at gamma0 across the sweep
    CHECK(after.hinf_disturbance == doctest::Approx(cfg.gamma0).epsilon(1e-3));
    for (size_t i = 0; i < after.omegas.size(); ++i) {
        CHECK(after.smax_disturbance[i] ==
              doctest::Approx(cfg.gamma0).epsilon(1e-3));
    }
    // the scaling is a SISO series factor: pointwise ratio is preserved, so
    // the new fault floor is the floor of gamma0 * |T_ef| / |T_ed|
    double want_floor = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < before.omegas.size(); ++i) {
        double ted = before.smax_disturbance[i];
        if (ted <= 0.0) continue;
        want_floor =
            std::min(want_floor, cfg.gamma0 * before.smin_fault[i] / ted);
    }
    CHECK(after.hminus_fault ==
          doctest::Approx(want_floor).epsilon(5e-3));
}

TEST_CASE("rescaling refuses improper or unstable inverses") {
    GeneralizedPlant P = toy_plant();

    // strictly proper residual response: inverse would be improper
    StateSpace lag = tf_to_ss(RationalTF({0.5}, {1, 1}));
    StateSpace Qsp{lag.A, Matrix(Matrix::Zero(1, 2)), lag.C,
                   Matrix(Matrix::Zero(1, 2))};
    Qsp.B(0, 0) = lag.B(0, 0);
    CHECK_THROWS_AS(post_scale_update(P, Qsp, 1.0), ImproperScaling);

    // right half plane zero in T_ed: inverse would be unstable. The loop
    // itself contributes T_ud = -So Gd, so the filter [1, 2/(s+1)] yields
    // T_ed = So Gd (1 - 2/(s+1)) with a zero at s = 1.
    StateSpace g2 = tf_to_ss(RationalTF({2}, {1, 1}));  // 2/(s+1)
    StateSpace Qrhp{g2.A, Matrix(Matrix::Zero(1, 2)), g2.C,
                    Matrix(Matrix::Zero(1, 2))};
    Qrhp.B(0, 1) = g2.B(0, 0);
    Qrhp.D(0, 0) = 1.0;
    CHECK_THROWS_AS(post_scale_update(P, Qrhp, 1.0), UnstableScaling);
}
