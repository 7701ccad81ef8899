import numpy as np
import pytest

from gnepalm import problems
from gnepalm.alcore import PenaltyState
from gnepalm.model import ConstraintBundle, GnepProblem, ObjectiveBundle, PlayerSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def duopoly():
    return problems.duopoly_shared()


@pytest.fixture
def infeasible():
    return problems.infeasible_single()


def single_player(theta, grad, hess=None, g=None, g_grad=None, g_hess=None, g_count=1):
    """One-dimensional single-player helper for formula-level tests."""
    obj = ObjectiveBundle(
        value=lambda x: theta(x[0]),
        grad=lambda x: np.array([grad(x[0])]),
        hess=(lambda x: np.array([[hess(x[0])]])) if hess is not None else None,
    )
    bundle = None
    if g is not None:
        bundle = ConstraintBundle(
            count=g_count,
            value=lambda x: np.atleast_1d(np.asarray(g(x[0]), dtype=float)),
            grad=lambda x: np.atleast_2d(np.asarray(g_grad(x[0]), dtype=float)),
            hess=(lambda x: np.asarray(g_hess(x[0]), dtype=float).reshape(g_count, 1, 1))
            if g_hess is not None
            else None,
        )
    return GnepProblem([PlayerSpec(1, obj, g=bundle)], name="single")


def random_nonkink_point(problem, state, rng, scale=1.0, margin=1e-3, tries=200):
    """Sample a point whose penalty shifts stay clear of the kink by ``margin``."""
    for _ in range(tries):
        x = scale * rng.standard_normal(problem.n)
        ok = True
        for nu in range(problem.num_players):
            g = problem.g_val(nu, x)
            if g.size == 0:
                continue
            t = state.u_of(nu) + state.rho_of(nu) * g
            if np.abs(t).min() <= margin:
                ok = False
                break
        if ok:
            return x
    raise AssertionError("could not sample a kink-free point")


def make_state(problem, u_value=0.0, rho=1.0, u_max=1e6, shared=False):
    if shared:
        u = [np.full(problem.players[0].g_count, u_value)]
        rho_list = [rho]
    else:
        u = [np.full(spec.g_count, u_value) for spec in problem.players]
        rho_list = [rho] * problem.num_players
    return PenaltyState(u=u, rho=rho_list, u_max=u_max, shared=shared)
