import numpy as np
import pytest

from gnepalm import problems
from gnepalm.model import (
    ConstraintBundle,
    EvaluationError,
    GnepProblem,
    MultiplierSet,
    ObjectiveBundle,
    PlayerSpec,
    ProblemError,
    validate_problem,
)


def two_block_problem():
    # dims (1, 2): x = (a, b, c)
    obj1 = ObjectiveBundle(value=lambda x: x[0] ** 2, grad=lambda x: np.array([2 * x[0]]))
    obj2 = ObjectiveBundle(
        value=lambda x: x[1] ** 2 + x[2] ** 2, grad=lambda x: 2 * x[1:3]
    )
    return GnepProblem([PlayerSpec(1, obj1), PlayerSpec(2, obj2)], name="two")


class TestBlockAccess:
    def test_second_player_block(self):
        prob = two_block_problem()
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(prob.block_of(x, 1), [2.0, 3.0])

    def test_first_player_block(self):
        prob = two_block_problem()
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(prob.block_of(x, 0), [1.0])

    def test_out_of_range_player(self):
        prob = two_block_problem()
        with pytest.raises(ProblemError):
            prob.block_of(np.zeros(3), 2)

    def test_eval_then_slice_equals_slice_then_eval(self, rng):
        prob = two_block_problem()
        for _ in range(10):
            x = rng.standard_normal(3)
            for nu in range(2):
                s = prob.block_slice(nu)
                np.testing.assert_array_equal(prob.block_of(x, nu), x[s])

    def test_offsets_consistent(self):
        prob = two_block_problem()
        assert prob.block_offsets == (0, 1, 3)
        assert prob.n == 3 and prob.m == 0 and prob.p == 0


class TestContracts:
    def test_wrong_point_length(self):
        prob = two_block_problem()
        with pytest.raises(ProblemError):
            prob.theta(0, np.zeros(2))

    def test_declared_count_mismatch(self):
        # declares two constraints, returns three values
        bad = ConstraintBundle(
            count=2,
            value=lambda x: np.array([1.0, 2.0, 3.0]),
            grad=lambda x: np.zeros((1, 2)),
        )
        obj = ObjectiveBundle(value=lambda x: 0.0, grad=lambda x: np.zeros(1))
        prob = GnepProblem([PlayerSpec(1, obj, g=bad)])
        with pytest.raises(ProblemError, match="player 0.*'g'"):
            prob.g_val(0, np.zeros(1))

    def test_nonfinite_output(self):
        obj = ObjectiveBundle(value=lambda x: np.nan, grad=lambda x: np.zeros(1))
        prob = GnepProblem([PlayerSpec(1, obj)])
        with pytest.raises(EvaluationError):
            prob.theta(0, np.zeros(1))

    def test_bad_dim(self):
        obj = ObjectiveBundle(value=lambda x: 0.0, grad=lambda x: np.zeros(0))
        with pytest.raises(ProblemError):
            PlayerSpec(0, obj)

    def test_shared_counts_enforced(self):
        obj = ObjectiveBundle(value=lambda x: 0.0, grad=lambda x: np.zeros(1))
        g = ConstraintBundle(
            count=1, value=lambda x: np.zeros(1), grad=lambda x: np.zeros((2, 1))
        )
        with pytest.raises(ProblemError):
            GnepProblem(
                [PlayerSpec(1, obj, g=g), PlayerSpec(1, obj)],
                shared_constraints=True,
            )

    def test_preset_length_checked(self):
        obj = ObjectiveBundle(value=lambda x: 0.0, grad=lambda x: np.zeros(1))
        with pytest.raises(ProblemError):
            GnepProblem([PlayerSpec(1, obj)], x0_presets={"bad": [0.0, 1.0]})


class TestValidateProblem:
    def test_simple_quadratic_passes(self):
        obj = ObjectiveBundle(value=lambda x: x[0] ** 2, grad=lambda x: np.array([2 * x[0]]))
        prob = GnepProblem([PlayerSpec(1, obj)])
        report = validate_problem(prob, [np.array([1.0])], fd_tol=1e-6)
        assert report.passed
        assert report.max_rel_error <= 1e-6

    def test_wrong_gradient_fails(self):
        obj = ObjectiveBundle(value=lambda x: x[0] ** 2, grad=lambda x: np.array([3 * x[0]]))
        prob = GnepProblem([PlayerSpec(1, obj)])
        report = validate_problem(prob, [np.array([1.0])], fd_tol=1e-6)
        assert not report.passed

    def test_crossed_parabola_gradients_at_ones(self):
        # constraints 2*x1 - x2^2 - 1 and 2*x2 - x1^2 - 1 with hand-coded
        # gradients (2, -2*x2) and (-2*x1, 2)
        prob = problems.example24b()
        report = validate_problem(prob, [np.array([1.0, 1.0])], fd_tol=1e-5)
        assert report.passed

    def test_requires_probe_points(self, duopoly):
        with pytest.raises(ProblemError):
            validate_problem(duopoly, [])

    @pytest.mark.parametrize("name", [p.name for p in problems.catalog()])
    def test_catalog_passes_at_random_probes(self, name, rng):
        prob = problems.by_name(name)
        points = [rng.standard_normal(prob.n) for _ in range(10)]
        report = validate_problem(prob, points, fd_tol=1e-5)
        assert report.passed, str(report)


class TestHessianFallback:
    def test_theta_fd_fallback_matches_analytic(self, rng):
        def value(x):
            return x[0] ** 2 * x[1] + 0.5 * x[1] ** 2

        def grad(x):
            return np.array([2 * x[0] * x[1]])

        analytic = ObjectiveBundle(
            value=value, grad=grad, hess=lambda x: np.array([[2 * x[1], 2 * x[0]]])
        )
        fallback = ObjectiveBundle(value=value, grad=grad)
        pa = GnepProblem([PlayerSpec(1, analytic), PlayerSpec(1, ObjectiveBundle(
            value=lambda x: 0.0, grad=lambda x: np.zeros(1)))])
        pf = GnepProblem([PlayerSpec(1, fallback), PlayerSpec(1, ObjectiveBundle(
            value=lambda x: 0.0, grad=lambda x: np.zeros(1)))])
        x = rng.standard_normal(2)
        np.testing.assert_allclose(pf.theta_hess(0, x), pa.theta_hess(0, x), atol=1e-5)

    def test_constraint_fd_fallback(self, rng):
        def value(x):
            return np.array([x[0] ** 2 + x[1] ** 2 - 2.0])

        def grad(x):
            return np.array([[2 * x[0]], [2 * x[1]]])

        fallback = ConstraintBundle(count=1, value=value, grad=grad)
        obj = ObjectiveBundle(value=lambda x: 0.0, grad=lambda x: np.zeros(1))
        prob = GnepProblem([PlayerSpec(1, obj, g=fallback), PlayerSpec(1, obj)])
        x = rng.standard_normal(2)
        np.testing.assert_allclose(
            prob.g_hess(0, x), np.array([[[2.0, 0.0]]]), atol=1e-5
        )


def test_multiplier_set_zeros(duopoly):
    ms = MultiplierSet.zeros(duopoly)
    ms.check_shapes(duopoly)
    assert all(lam.shape == (1,) for lam in ms.lam)
    assert all(mu.shape == (0,) for mu in ms.mu)
