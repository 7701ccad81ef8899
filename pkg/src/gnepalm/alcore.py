"""Augmented Lagrangian values and gradients, the stacked residual map, and
elements of its generalized Jacobian.

For player ``nu`` with penalized constraints ``g`` the augmented Lagrangian
is the classical shifted quadratic penalty

    L(x, u; rho) = theta(x) + (rho/2) * ||(g(x) + u/rho)_+||^2,

whose own-block gradient is ``grad theta + grad g @ (u + rho*g(x))_+``.
Stacking these gradients over the players gives a square, piecewise-smooth
map ``F`` whose zeros are the stationary points of the penalized game; the
Jacobian element used by the Newton-type subsolver is assembled here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import GnepProblem, ProblemError

__all__ = [
    "KinkRule",
    "DEFAULT_KINK_RULE",
    "PenaltyState",
    "shifted_multiplier",
    "al_value",
    "al_gradient_block",
    "assemble_F",
    "generalized_jacobian",
    "shared_penalty_term",
    "kink_components",
]


class KinkRule(Enum):
    """Subgradient choice at components where ``u_i + rho*g_i(x)`` is exactly zero."""

    TREAT_ACTIVE = "treat_active"
    TREAT_INACTIVE = "treat_inactive"


# Keeps the Jacobian element closest to the smooth-interior one: no rank-one
# term is added for constraints sitting exactly on the activity boundary.
DEFAULT_KINK_RULE = KinkRule.TREAT_INACTIVE

# Components within this scaled margin of the kink are flagged for
# diagnostics only; branching always uses the exact sign.
KINK_DIAG_TOL = 1e-12


@dataclass
class PenaltyState:
    """Safeguarded multiplier estimates and penalty weights.

    ``u[i]`` lies in ``[0, u_max]`` componentwise and ``rho[i] > 0``.  With
    ``shared=True`` both lists hold a single entry used by every player, so
    cross-player equality is structural rather than numerical.
    """

    u: list[np.ndarray]
    rho: list[float]
    u_max: float
    shared: bool = False

    def __post_init__(self) -> None:
        self.u = [np.asarray(ui, dtype=float) for ui in self.u]
        self.rho = [float(r) for r in self.rho]
        self.u_max = float(self.u_max)
        if self.u_max < 0:
            raise ValueError("u_max must be nonnegative")
        if len(self.u) != len(self.rho):
            raise ValueError("u and rho must have the same number of entries")
        if self.shared and len(self.u) != 1:
            raise ValueError("shared state stores exactly one (u, rho) pair")
        for ui in self.u:
            if ui.size and (ui.min() < 0.0 or ui.max() > self.u_max):
                raise ValueError("safeguarded estimates must lie in [0, u_max]")
        for r in self.rho:
            if not r > 0.0:
                raise ValueError("penalty parameters must be positive")

    def u_of(self, nu: int) -> np.ndarray:
        return self.u[0] if self.shared else self.u[nu]

    def rho_of(self, nu: int) -> float:
        return self.rho[0] if self.shared else self.rho[nu]


def shifted_multiplier(g_val: np.ndarray, u: np.ndarray, rho: float) -> np.ndarray:
    """Componentwise ``(u + rho * g)_+``; the multiplier update rule."""
    g_val = np.asarray(g_val, dtype=float)
    u = np.asarray(u, dtype=float)
    if g_val.shape != u.shape:
        raise ValueError(f"shape mismatch: g {g_val.shape} vs u {u.shape}")
    if not rho > 0.0:
        raise ValueError("rho must be positive")
    return np.maximum(0.0, u + rho * g_val)


def al_value(problem: GnepProblem, nu: int, x: np.ndarray, state: PenaltyState) -> float:
    """Augmented Lagrangian of player ``nu`` at ``x``."""
    theta = problem.theta(nu, x)
    g = problem.g_val(nu, x)
    if g.size == 0:
        return theta
    rho = state.rho_of(nu)
    shifted = np.maximum(0.0, g + state.u_of(nu) / rho)
    return theta + 0.5 * rho * float(shifted @ shifted)


def al_gradient_block(
    problem: GnepProblem, nu: int, x: np.ndarray, state: PenaltyState
) -> np.ndarray:
    """Own-block gradient of the augmented Lagrangian of player ``nu``."""
    grad = problem.theta_grad(nu, x)
    g = problem.g_val(nu, x)
    if g.size == 0:
        return grad
    s = shifted_multiplier(g, state.u_of(nu), state.rho_of(nu))
    rows = problem.block_slice(nu)
    return grad + problem.g_grad(nu, x)[rows, :] @ s


def assemble_F(problem: GnepProblem, x: np.ndarray, state: PenaltyState) -> np.ndarray:
    """Stacked augmented-Lagrangian gradients, one block per player.

    Defined only when every constraint is penalized; a game with kept
    constraints needs a constrained subsolver instead and is refused.
    """
    if problem.p > 0:
        raise ProblemError(
            "assemble_F requires full penalization; fold kept constraints into "
            "the penalized group or supply a constrained subsolver"
        )
    return np.concatenate(
        [al_gradient_block(problem, nu, x, state) for nu in range(problem.num_players)]
    )


def generalized_jacobian(
    problem: GnepProblem,
    x: np.ndarray,
    state: PenaltyState,
    rule: KinkRule = DEFAULT_KINK_RULE,
) -> np.ndarray:
    """One element of the generalized Jacobian of :func:`assemble_F`.

    Row block ``nu`` is

        H_theta + rho * sum_{i active} G_own[:, i] G_full[:, i]^T
                + sum_i s_i * H_{g_i}

    with ``s = (u + rho*g)_+`` and activity decided by the sign of
    ``u_i + rho*g_i``; exact zeros follow ``rule``.  The result is square
    and in general nonsymmetric.
    """
    if problem.p > 0:
        raise ProblemError("generalized_jacobian requires full penalization")
    n = problem.n
    V = np.empty((n, n))
    for nu in range(problem.num_players):
        rows = problem.block_slice(nu)
        V[rows, :] = problem.theta_hess(nu, x)
        g = problem.g_val(nu, x)
        if g.size == 0:
            continue
        rho = state.rho_of(nu)
        t = state.u_of(nu) + rho * g
        active = (t >= 0.0) if rule is KinkRule.TREAT_ACTIVE else (t > 0.0)
        if active.any():
            G = problem.g_grad(nu, x)
            V[rows, :] += rho * (G[rows, :][:, active] @ G[:, active].T)
        s = np.maximum(0.0, t)
        if s.any():
            V[rows, :] += np.tensordot(s, problem.g_hess(nu, x), axes=1)
    return V


def shared_penalty_term(problem: GnepProblem, x: np.ndarray, state: PenaltyState) -> float:
    """Penalty term common to all players of a shared-constraint game.

    ``al_value(nu, ...) == theta(nu, x) + shared_penalty_term(...)`` holds
    exactly for every player.
    """
    if not problem.shared_constraints:
        raise ProblemError("shared_penalty_term requires a shared-constraint game")
    g = problem.g_val(0, x)
    if g.size == 0:
        return 0.0
    rho = state.rho_of(0)
    shifted = np.maximum(0.0, g + state.u_of(0) / rho)
    return 0.5 * rho * float(shifted @ shifted)


def kink_components(
    problem: GnepProblem, nu: int, x: np.ndarray, state: PenaltyState
) -> np.ndarray:
    """Indices whose penalty shift sits within the kink margin (diagnostic only)."""
    g = problem.g_val(nu, x)
    u = state.u_of(nu)
    t = u + state.rho_of(nu) * g
    return np.flatnonzero(np.abs(t) <= KINK_DIAG_TOL * (1.0 + np.abs(u)))
