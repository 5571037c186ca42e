import numpy as np
import pytest

from stfem.adaptivity import (AdaptiveConfig, ConvergenceRecord,
                              adaptive_loop, doerfler_mark)
from stfem.goals import FinalTimeIntegralGoal
from stfem.mesh import build_box_mesh
from stfem.problems import smooth_problem
from stfem.solvers import LinearSolverConfig, NewtonConfig

DIRECT = LinearSolverConfig(kind="direct")
EXACT_GOAL_D1 = 2.0 * np.e / np.pi


def test_doerfler_examples():
    assert doerfler_mark([4.0, 3.0, 2.0, 1.0], 0.6).tolist() == [0, 1]
    assert doerfler_mark([5.0, 1.0, 1.0, 1.0], 0.5).tolist() == [0]
    assert doerfler_mark([1.0, 0.0, 2.0, 0.0], 1.0).tolist() == [0, 2]
    assert doerfler_mark([0.0, 0.0], 0.5).size == 0


def test_doerfler_uses_magnitudes():
    assert doerfler_mark([-4.0, 3.0, -2.0, 1.0], 0.6).tolist() == [0, 1]


def test_doerfler_minimality():
    rng = np.random.default_rng(0)
    for _ in range(20):
        ind = rng.exponential(size=30)
        theta = rng.uniform(0.2, 0.95)
        marked = doerfler_mark(ind, theta)
        total = ind.sum()
        assert ind[marked].sum() >= theta * total * (1 - 1e-12)
        smallest = marked[np.argmin(ind[marked])]
        rest = np.setdiff1d(marked, [smallest])
        assert ind[rest].sum() < theta * total


def test_doerfler_rejects_nonfinite():
    with pytest.raises(ValueError):
        doerfler_mark([1.0, np.nan], 0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        AdaptiveConfig(theta=0.0)
    with pytest.raises(ValueError):
        AdaptiveConfig(mode="foo")
    with pytest.raises(ValueError):
        AdaptiveConfig(mode="dwr", degree=2)


def test_uniform_loop_records_and_rates():
    # linear problem: clean second-order L2 convergence
    prob = smooth_problem(1, p=2.0, eps=1.0)
    cfg = AdaptiveConfig(mode="uniform", uniform_rounds=2, max_dofs=2000,
                         max_levels=10)
    result = adaptive_loop(prob, None, build_box_mesh(1, 2), cfg, lcfg=DIRECT)
    recs = result.records
    assert result.converged
    dofs = [r.dofs for r in recs]
    assert all(dofs[i] < dofs[i + 1] for i in range(len(dofs) - 1))
    assert all(r.level == i for i, r in enumerate(recs))
    l2 = [r.l2_Q_error for r in recs]
    orders = [np.log2(l2[i - 1] / l2[i]) for i in range(1, len(l2))]
    for o in orders[-2:]:
        assert abs(o - 2.0) < 0.15


def test_dwr_loop_produces_estimators_and_refines_near_top():
    prob = smooth_problem(1, p=4.0, eps=1e-5)
    prob.exact_goal = EXACT_GOAL_D1
    goal = FinalTimeIntegralGoal()
    cfg = AdaptiveConfig(mode="dwr", theta=0.5, max_dofs=1500, max_levels=25)
    result = adaptive_loop(prob, goal, build_box_mesh(1, 2), cfg, lcfg=DIRECT)
    recs = result.records
    assert len(recs) >= 8
    for r in recs:
        assert np.isfinite(r.eta_h)
        assert np.isfinite(r.J_h)
        assert r.indicators is not None and len(r.indicators) == r.elements
    # goal error decreased from the first level to the last
    assert abs(recs[-1].J_error) < abs(recs[0].J_error)
    # refinement concentrates near the top face for the final-time goal
    bc = result.mesh.barycenters()
    assert (bc[:, -1] > 0.75).mean() > 0.5


def test_loop_continues_after_newton_failure():
    prob = smooth_problem(1, p=4.0, eps=1e-5)
    prob.exact_goal = EXACT_GOAL_D1
    goal = FinalTimeIntegralGoal()
    cfg = AdaptiveConfig(mode="dwr", theta=0.5, max_dofs=400, max_levels=4)
    ncfg = NewtonConfig(max_iter=1)
    result = adaptive_loop(prob, goal, build_box_mesh(1, 2), cfg, ncfg, DIRECT)
    assert not result.converged
    assert len(result.records) == 4
    assert any(not r.converged for r in result.records)


def test_csv_field_order_is_stable():
    assert ConvergenceRecord.CSV_FIELDS == (
        "level", "dofs", "elements", "J_h", "J_error", "eta_h", "eta_h_p",
        "eta_h_a", "eta_k", "I_eff_h", "I_eff_p", "I_eff_a", "newton_iters",
        "inner_iters", "l2_Q_error", "l2_h1_error")
