import json
import math
import os

import pytest

import fdshape


DATA = os.environ.get("FDSHAPE_DATA", os.path.join(os.path.dirname(__file__), "..", "..", "data"))


def toy_problem_path():
    return os.path.join(DATA, "toy_actuator.json")


def test_module_surface():
    for name in [
        "StateSpace", "RationalTF", "GeneralizedPlant", "SynthesisConfig",
        "hinf_norm", "hminus_index", "build_fdi_plant", "close_loop",
        "synthesize", "verify", "post_scale_update", "load_problem",
        "problem_plant", "FdshapeError",
    ]:
        assert hasattr(fdshape, name), name


def test_norms_of_known_systems():
    # 1/(s+1): peak gain 1 at dc
    g = fdshape.StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    assert math.isclose(fdshape.hinf_norm(g), 1.0, rel_tol=1e-6)

    # (s+2)/(s+1): gain falls from 2 to 1
    lead = fdshape.StateSpace([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert math.isclose(fdshape.hinf_norm(lead), 2.0, rel_tol=1e-6)
    assert math.isclose(fdshape.hminus_index(lead), 1.0, rel_tol=1e-6)


def test_problem_loading_and_plant():
    pf = fdshape.load_problem(toy_problem_path())
    assert pf.name == "toy_actuator"
    P = fdshape.problem_plant(pf)
    assert P.order() == 4


def test_plant_from_rationals():
    G = fdshape.RationalTF([1, 2], [1, 1])
    K = fdshape.RationalTF([1], [1])
    Gd = fdshape.RationalTF([1, 2], [1, 5])
    Gf = fdshape.RationalTF([1, 3], [1, 4])
    P = fdshape.build_fdi_plant(G, K, Gd, Gf)
    assert P.order() == 4


def test_synthesis_and_verify_round_trip():
    pf = fdshape.load_problem(toy_problem_path())
    P = fdshape.problem_plant(pf)
    res = fdshape.synthesize(P, pf.config)
    assert res.nu_certified > 0.0
    assert res.check.hinf_disturbance <= pf.config.gamma0 * 1.001
    assert res.nu_certified <= res.check.hminus_fault * 1.001 + 1e-9

    vr = fdshape.verify(res.balanced, res.Q)
    assert math.isclose(vr.J, res.check.J, rel_tol=1e-9)

    q2 = fdshape.post_scale_update(res.balanced, res.Q, pf.config.gamma0)
    vr2 = fdshape.verify(res.balanced, q2)
    assert math.isclose(vr2.hinf_disturbance, pf.config.gamma0, rel_tol=2e-3)


def test_errors_surface_as_python_exceptions():
    with pytest.raises(fdshape.FdshapeError):
        fdshape.load_problem("/nonexistent/problem.json")

    unstable = fdshape.StateSpace([[1.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(fdshape.FdshapeError):
        fdshape.hinf_norm(unstable)
