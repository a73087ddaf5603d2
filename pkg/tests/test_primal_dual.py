import math

import numpy as np
import pytest

from experiments.generators import random_diag_qcqp
from lcpg.errors import InfeasibleStartError
from lcpg.ipm import refine_active_set, solve_path_following
from lcpg.primal_dual import (PdStatus, ProxSubproblem, certificate_check, dual_bound_Bk, pd_solve,
                              restore_feasibility)
from lcpg.prox import Zero


def pulled_ball():
    """min -10 x + x^2/2  s.t.  x^2/2 - 1 <= 0; solution sqrt(2) with multiplier (10 - sqrt 2)/sqrt 2."""
    return ProxSubproblem(gamma=1.0, anchor=np.zeros(1), q0=np.array([-10.0]), prox0=Zero(),
                          Q=np.zeros((1, 1)), L=np.array([1.0]), offsets=np.array([-1.0]),
                          prox_terms=(Zero(),))


def test_solves_one_dimensional_instance():
    res = pd_solve(pulled_ball(), B=100.0, eps=1e-9)
    assert res.status is PdStatus.CERTIFIED
    assert res.x[0] == pytest.approx(math.sqrt(2.0), abs=1e-4)
    assert res.lam[0] == pytest.approx((10.0 - math.sqrt(2.0)) / math.sqrt(2.0), rel=1e-2)
    assert res.certificate.feasibility_norm == 0.0


def test_reports_uncertified_when_budget_runs_out():
    res = pd_solve(pulled_ball(), B=100.0, eps=1e-12, max_iter=1)
    assert res.status is PdStatus.UNCERTIFIED
    assert not res.certificate.passed
    assert np.all(pulled_ball().constraint_values(res.x) <= 0)


def test_anchor_must_be_strictly_feasible():
    with pytest.raises(InfeasibleStartError):
        ProxSubproblem(gamma=1.0, anchor=np.zeros(1), q0=np.zeros(1), prox0=Zero(),
                       Q=np.zeros((1, 1)), L=np.array([1.0]), offsets=np.array([0.0]),
                       prox_terms=(Zero(),))


def test_restore_feasibility_moves_toward_anchor():
    sub = pulled_ball()
    z = restore_feasibility(sub, np.array([3.0]))
    assert sub.constraint_values(z)[0] <= 1e-12
    assert 0.0 < z[0] < 3.0
    np.testing.assert_array_equal(restore_feasibility(sub, np.array([0.5])), [0.5])


def test_dual_bound():
    assert dual_bound_Bk(10.0, 0.0, [0.5, 1.0]) == pytest.approx(20.0)
    assert dual_bound_Bk(-1.0, 0.0, [0.5]) == 0.0
    with pytest.raises(ValueError):
        dual_bound_Bk(1.0, 0.0, [0.5, 0.0])


@pytest.mark.parametrize("eps", [1e-4, 1e-6])
def test_certificates_hold_against_reference_duals(eps):
    for seed in range(25):
        inst = random_diag_qcqp(d=20, m=5, seed=100 + seed)
        ref = solve_path_following(inst.q, inst.x_hat, inst.delta, 1e-10)
        polished = refine_active_set(inst.q, ref.x, ref.lam)
        lam_ref = polished.lam if polished is not None else ref.lam
        sub = inst.as_prox_subproblem()
        res = pd_solve(sub, B=1e4, eps=eps)
        assert res.status is PdStatus.CERTIFIED
        cert = certificate_check(sub, res.x, lam_ref, eps + 1e-8)
        assert cert.objective_gap_bound <= eps + 1e-8
        assert cert.feasibility_norm <= eps + 1e-8
        assert cert.lagrangian_gap_bound <= eps + 1e-8


def test_certificate_check_validates_multipliers():
    with pytest.raises(ValueError):
        certificate_check(pulled_ball(), np.zeros(1), [-1.0], 1e-6)


def test_certifies_a_twenty_dimensional_instance():
    sub = random_diag_qcqp(d=20, m=5, seed=0).as_prox_subproblem()
    res = pd_solve(sub, B=1e4, eps=1e-6)
    assert res.status is PdStatus.CERTIFIED
    assert res.certificate.passed
    assert np.all(sub.constraint_values(res.x) <= 1e-6)


@pytest.mark.slow
def test_certifies_fifty_instances():
    uncertified = [seed for seed in range(50)
                   if pd_solve(random_diag_qcqp(d=20, m=5, seed=seed).as_prox_subproblem(),
                               B=1e4, eps=1e-6).status is not PdStatus.CERTIFIED]
    assert uncertified == []
