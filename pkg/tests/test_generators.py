import numpy as np
import pytest
import scipy.sparse as sp

from experiments.datasets import synthetic_classification
from experiments.generators import (QcqpRecipe, ScadRecipe, build_scad_problem, gen_qcqp,
                                    lambda_max, random_diag_qcqp, scad_constraint)
from lcpg.errors import ConfigError
from lcpg.problem import ProblemMode, evaluate_constraints, evaluate_objective


@pytest.mark.parametrize("convexity", ["convex", "dc"])
def test_qcqp_origin_values(convexity):
    generated = gen_qcqp(QcqpRecipe(n=30, m=4, convexity=convexity, seed=3))
    problem = generated.problem
    np.testing.assert_allclose(evaluate_constraints(problem, np.zeros(30)), -10.0)
    np.testing.assert_array_equal(problem.eta, np.zeros(4))
    np.testing.assert_array_equal(problem.eta0, np.full(4, -5.0))
    assert evaluate_objective(problem, np.zeros(30)) == 0.0
    assert problem.L[-1] == 1.0


def test_qcqp_is_deterministic_per_seed():
    recipe = QcqpRecipe(n=40, m=3, seed=9)
    assert gen_qcqp(recipe).fingerprint() == gen_qcqp(recipe).fingerprint()
    other = QcqpRecipe(n=40, m=3, seed=10)
    assert gen_qcqp(recipe).fingerprint() != gen_qcqp(other).fingerprint()


@pytest.mark.parametrize("seed", range(3))
def test_qcqp_curvature(seed):
    n = 40
    convex = gen_qcqp(QcqpRecipe(n=n, m=3, density=0.1, seed=seed))
    for Q, L in zip(convex.Q, [convex.problem.L0, *convex.L]):
        dense = Q.toarray()
        np.testing.assert_allclose(dense, dense.T)
        np.linalg.cholesky(dense + 1e-8 * np.eye(n))
        assert L >= lambda_max(Q)
    dc = gen_qcqp(QcqpRecipe(n=n, m=3, density=0.1, convexity="dc", seed=seed))
    for Q in dc.Q:
        np.linalg.cholesky(Q.toarray() + (10.0 + 1e-8) * np.eye(n))
    assert dc.problem.mode is ProblemMode.NONCONVEX
    assert dc.problem.L0 >= 10.0


def test_qcqp_lower_bound_holds_on_the_ball(rng):
    generated = gen_qcqp(QcqpRecipe(n=15, m=2, density=0.2, convexity="dc", seed=1))
    problem = generated.problem
    radius = generated.recipe.radius
    for _ in range(200):
        x = rng.normal(size=15)
        x *= radius * rng.uniform() / np.linalg.norm(x)
        assert problem.objective.smooth.value(x) >= generated.psi0_lower_bound


def test_strongly_convex_variant():
    generated = gen_qcqp(QcqpRecipe(n=10, m=2, density=0.3, eig_max=5.0, objective_shift=1.0))
    problem = generated.problem
    assert problem.mode is ProblemMode.STRONGLY_CONVEX and problem.mu0 == 1.0
    assert np.linalg.eigvalsh(generated.Q[0].toarray())[0] >= 1.0 - 1e-9
    assert problem.L0 > problem.mu0


@pytest.mark.parametrize("changes", [
    {"convexity": "concave"},
    {"m": 0},
    {"density": 0.0},
    {"eta0": 1.0},
    {"eta0": -20.0},
    {"objective_shift": -1.0},
])
def test_qcqp_recipe_validation(changes):
    with pytest.raises(ConfigError):
        QcqpRecipe(**changes)


def test_recipes_from_dict():
    assert QcqpRecipe.from_dict({"n": 5, "m": 2}).n == 5
    with pytest.raises(ConfigError):
        QcqpRecipe.from_dict({"size": 5})
    with pytest.raises(ConfigError):
        ScadRecipe.from_dict({"lam": 1.0})
    with pytest.raises(ConfigError):
        ScadRecipe(eta0_fraction=1.0)


def test_scad_constraint_level():
    constraint, level = scad_constraint(beta=2.0, theta=5.0, d=10, sigma=0.4)
    assert level == pytest.approx(4.0)
    assert constraint.concave
    assert constraint.lipschitz == pytest.approx(0.25)
    assert constraint.value(np.zeros(10)) == 0.0


def test_build_scad_problem():
    data = synthetic_classification(50, 10, seed=0)
    problem = build_scad_problem(data, ScadRecipe(sigma=0.5, eta0_fraction=0.25))
    assert problem.m == 1
    assert problem.eta[0] == pytest.approx(5.0)
    assert problem.eta0[0] == pytest.approx(1.25)
    assert problem.objective.smooth.is_finite_sum
    assert problem.objective.smooth.n_components == 50


def test_random_diag_qcqp_start_is_interior():
    inst = random_diag_qcqp(d=12, m=4, seed=5, alpha=0.3)
    values = inst.q.constraint_values(inst.x_hat)
    assert np.all(values < 0)
    assert inst.delta == pytest.approx(float(np.min(-values)))
    sub = inst.as_prox_subproblem()
    assert sub.gamma == inst.q.L0


def test_lambda_max_sparse_path():
    n = 1200
    Q = sp.diags(np.linspace(0.0, 3.0, n), format="csr")
    assert lambda_max(Q) == pytest.approx(3.0, rel=1e-6)
