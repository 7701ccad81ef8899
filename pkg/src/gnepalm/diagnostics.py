"""Point classification for N-player games.

Three executable checks:

* per-player KKT residuals (stationarity and complementarity in max norm);
* stationarity for the constraint-violation game, in which each player
  minimizes the squared violation of their penalized constraints subject to
  the kept ones (limit points of the multiplier-penalty loop land there
  when feasibility cannot be reached);
* a player-wise extended Mangasarian-Fromovitz test, decided through
  positive linear independence of the active own-block gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .model import GnepProblem, MultiplierSet
from .outer import nnls

__all__ = [
    "kkt_residual",
    "feasibility_gnep_residual",
    "PliVerdict",
    "positive_linear_independence",
    "EmfcqStatus",
    "EmfcqVerdict",
    "emfcq_check",
    "PointClass",
    "classify_point",
    "DiagnosticsVerdict",
    "diagnose",
]

# Weight of the appended normalization row in the simplex least-squares fit.
SIMPLEX_PENALTY = 1e6


def _inf_norm(v: np.ndarray) -> float:
    return float(np.abs(v).max()) if v.size else 0.0


def kkt_residual(
    problem: GnepProblem, x: np.ndarray, multipliers: MultiplierSet
) -> list[tuple[float, float]]:
    """Per-player ``(stationarity, complementarity)`` residuals in max norm.

    Stationarity is ``||grad theta + grad g @ lam + grad h @ mu||`` over the
    player's own block; complementarity is ``||min(-c, (lam, mu))||`` over
    all of the player's constraints.
    """
    x = problem.point(x)
    multipliers.check_shapes(problem)
    out = []
    for nu in range(problem.num_players):
        rows = problem.block_slice(nu)
        lam = np.asarray(multipliers.lam[nu], dtype=float)
        mu = np.asarray(multipliers.mu[nu], dtype=float)
        stat = (
            problem.theta_grad(nu, x)
            + problem.g_grad(nu, x)[rows, :] @ lam
            + problem.h_grad(nu, x)[rows, :] @ mu
        )
        c = problem.c_val(nu, x)
        w = np.concatenate([lam, mu])
        comp = _inf_norm(np.minimum(-c, w)) if c.size else 0.0
        out.append((_inf_norm(stat), comp))
    return out


def feasibility_gnep_residual(
    problem: GnepProblem,
    x: np.ndarray,
    mu_hat: Sequence[np.ndarray] | None = None,
) -> np.ndarray:
    """Per-player KKT residual of the constraint-violation game.

    Player ``nu`` minimizes ``||g_+(x)||^2`` subject to ``h(x) <= 0``; the
    residual combines the own-block stationarity of that problem with the
    complementarity of ``mu_hat`` (pass nothing when every constraint is
    penalized).
    """
    x = problem.point(x)
    out = np.empty(problem.num_players)
    for nu in range(problem.num_players):
        rows = problem.block_slice(nu)
        gplus = np.maximum(problem.g_val(nu, x), 0.0)
        grad = 2.0 * (problem.g_grad(nu, x)[rows, :] @ gplus)
        h = problem.h_val(nu, x)
        mu = (
            np.zeros(h.size)
            if mu_hat is None
            else np.asarray(mu_hat[nu], dtype=float)
        )
        if mu.shape != (h.size,):
            raise ValueError(f"player {nu}: mu_hat has wrong length")
        if h.size:
            grad = grad + problem.h_grad(nu, x)[rows, :] @ mu
            comp = _inf_norm(np.minimum(-h, mu))
        else:
            comp = 0.0
        out[nu] = max(_inf_norm(grad), comp)
    return out


@dataclass(frozen=True)
class PliVerdict:
    """Outcome of the positive-linear-independence test.

    ``sigma`` is the minimum of ``||V w||`` over the unit simplex; the
    columns are positively linearly independent exactly when it is positive,
    and ``weights`` attains it.
    """

    independent: bool
    sigma: float
    weights: np.ndarray


def positive_linear_independence(V: np.ndarray, tol: float = 1e-8) -> PliVerdict:
    """Decide whether any nontrivial nonnegative combination of columns vanishes.

    The simplex-constrained least-squares problem is solved as a
    nonnegative fit with a penalized normalization row; ``sigma <= tol``
    yields a dependence certificate.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    d, k = V.shape
    if k < 1:
        raise ValueError("at least one column is required")
    A = np.vstack([V, np.full((1, k), SIMPLEX_PENALTY)])
    b = np.concatenate([np.zeros(d), [SIMPLEX_PENALTY]])
    w = nnls(A, b)
    s = float(w.sum())
    if s > 0.0:
        w = w / s
    else:
        # Fit collapsed (enormous columns); fall back to the best vertex.
        j = int(np.argmin(np.linalg.norm(V, axis=0)))
        w = np.zeros(k)
        w[j] = 1.0
    sigma = float(np.linalg.norm(V @ w))
    return PliVerdict(independent=sigma > tol, sigma=sigma, weights=w)


class EmfcqStatus(Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class EmfcqVerdict:
    """Player-wise extended MFCQ outcome.

    ``HOLDS`` carries a direction along which every near-active constraint
    strictly descends; ``FAILS`` carries simplex weights certifying a
    vanishing nonnegative combination; ``INCONCLUSIVE`` flags a tolerance
    conflict between the independence test and the direction check.
    """

    status: EmfcqStatus
    direction: np.ndarray | None = None
    weights: np.ndarray | None = None
    active: np.ndarray | None = None


def emfcq_check(
    problem: GnepProblem, nu: int, x: np.ndarray, tol: float = 1e-8
) -> EmfcqVerdict:
    """Extended MFCQ for player ``nu`` at ``x``.

    Constraints with ``c_i(x) >= -tol`` count as active (the slack makes the
    check stable near boundaries).  With no active constraints the condition
    holds vacuously with the zero direction.
    """
    x = problem.point(x)
    rows = problem.block_slice(nu)
    c = problem.c_val(nu, x)
    active = np.flatnonzero(c >= -tol)
    dim = problem.players[nu].dim
    if active.size == 0:
        return EmfcqVerdict(EmfcqStatus.HOLDS, direction=np.zeros(dim), active=active)
    V = problem.c_grad(nu, x)[rows, :][:, active]
    pli = positive_linear_independence(V, tol)
    if not pli.independent:
        return EmfcqVerdict(EmfcqStatus.FAILS, weights=pli.weights, active=active)
    gram = V.T @ V
    w, *_ = np.linalg.lstsq(gram, np.ones(active.size), rcond=None)
    d = -V @ w
    dnorm = float(np.linalg.norm(d))
    if dnorm > 0.0 and np.all(V.T @ d < -tol * dnorm):
        return EmfcqVerdict(EmfcqStatus.HOLDS, direction=d, active=active)
    return EmfcqVerdict(EmfcqStatus.INCONCLUSIVE, active=active)


class PointClass(Enum):
    FEASIBLE_KKT = "FeasibleKKT"
    INFEASIBLE_STATIONARY = "InfeasibleStationary"
    NEITHER = "Neither"


def classify_point(
    problem: GnepProblem,
    x: np.ndarray,
    multipliers: MultiplierSet,
    eps: float = 1e-8,
    eps_feas: float = 1e-6,
) -> PointClass:
    """Classify ``x`` as a KKT point, a stationary infeasible point, or neither."""
    x = problem.point(x)
    pairs = kkt_residual(problem, x, multipliers)
    worst_kkt = max(max(p) for p in pairs)
    viol = 0.0
    for nu in range(problem.num_players):
        viol = max(viol, _inf_norm(np.maximum(problem.c_val(nu, x), 0.0)))
    if worst_kkt <= eps and viol <= eps:
        return PointClass.FEASIBLE_KKT
    if viol > eps and float(np.max(feasibility_gnep_residual(problem, x))) <= eps_feas:
        return PointClass.INFEASIBLE_STATIONARY
    return PointClass.NEITHER


@dataclass
class DiagnosticsVerdict:
    """Bundle of all checks at one point, with the tolerances used."""

    kkt: list[tuple[float, float]]
    feasibility_gnep: np.ndarray
    emfcq: list[EmfcqVerdict]
    classification: PointClass
    eps: float
    eps_feas: float
    active_tol: float

    def to_dict(self) -> dict:
        return {
            "classification": self.classification.value,
            "eps": self.eps,
            "eps_feas": self.eps_feas,
            "active_tol": self.active_tol,
            "players": [
                {
                    "stationarity": float(stat),
                    "complementarity": float(comp),
                    "feasibility_gnep": float(self.feasibility_gnep[nu]),
                    "emfcq": self.emfcq[nu].status.value,
                }
                for nu, (stat, comp) in enumerate(self.kkt)
            ],
        }


def diagnose(
    problem: GnepProblem,
    x: np.ndarray,
    multipliers: MultiplierSet,
    eps: float = 1e-8,
    eps_feas: float = 1e-6,
    active_tol: float = 1e-8,
) -> DiagnosticsVerdict:
    """Run every check at ``x`` and collect the verdicts."""
    return DiagnosticsVerdict(
        kkt=kkt_residual(problem, x, multipliers),
        feasibility_gnep=feasibility_gnep_residual(problem, x),
        emfcq=[
            emfcq_check(problem, nu, x, active_tol)
            for nu in range(problem.num_players)
        ],
        classification=classify_point(problem, x, multipliers, eps, eps_feas),
        eps=eps,
        eps_feas=eps_feas,
        active_tol=active_tol,
    )
