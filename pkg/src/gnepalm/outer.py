"""Outer multiplier-penalty loop with safeguarded estimates.

``solve`` runs the general method with one multiplier/penalty set per
player; ``solve_variational`` runs the shared-constraint variant that keeps
a single set for all players and therefore targets equilibria whose shared
multipliers coincide.  Both drive the same loop:

1. stop if the joint residuals (feasibility, stationarity, complementarity)
   are below ``eps``;
2. solve the penalized subsystem ``F(x) = 0`` from the previous iterate;
3. update the multipliers to ``(u + rho*g(x))_+``;
4. keep ``rho`` where the complementarity measure improved by the factor
   ``tau``, grow it by ``gamma`` elsewhere;
5. safeguard ``u = min(lambda, u_max)``.

Games with kept constraints are folded into fully penalized form first;
true partially penalized solving would need a constrained inner solver,
for which only the callable interface is defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np
import scipy.optimize

from .alcore import (
    DEFAULT_KINK_RULE,
    KinkRule,
    PenaltyState,
    assemble_F,
    generalized_jacobian,
    shifted_multiplier,
)
from .model import (
    ConstraintBundle,
    GnepProblem,
    MultiplierSet,
    PlayerSpec,
    ProblemError,
)
from .subsolver import LmConfig, LmResult, LmStatus, SemismoothSystem, lm_solve

__all__ = [
    "ConfigError",
    "NnlsError",
    "Mode",
    "Status",
    "FixedTolerance",
    "GeometricTolerance",
    "OuterConfig",
    "IterationRecord",
    "TerminationReport",
    "nnls",
    "initial_multipliers",
    "update_multipliers",
    "update_penalty",
    "update_safeguard",
    "stopping_residuals",
    "fully_penalized",
    "solve",
    "solve_variational",
]


class ConfigError(ValueError):
    """Invalid solver configuration for the given problem."""


class NnlsError(RuntimeError):
    """The nonnegative least-squares iteration exceeded its cap."""


class Mode(Enum):
    GENERAL = "general"
    VARIATIONAL = "variational"


class Status(Enum):
    SOLVED_KKT = "SolvedKKT"
    INFEASIBLE_STATIONARY = "InfeasibleStationary"
    MAX_OUTER_ITERATIONS = "MaxOuterIterations"
    SUBSOLVER_FAILURE = "SubsolverFailure"


@dataclass(frozen=True)
class FixedTolerance:
    """Constant inner tolerance."""

    value: float = 1e-8

    def __call__(self, k: int) -> float:
        return self.value


@dataclass(frozen=True)
class GeometricTolerance:
    """Inner tolerance ``max(start * factor**k, floor)``."""

    start: float
    factor: float
    floor: float

    def __call__(self, k: int) -> float:
        return max(self.start * self.factor**k, self.floor)


@dataclass
class OuterConfig:
    """Parameters of the outer loop.

    ``tau`` and ``gamma`` default to the size-dependent rule
    ``(0.1, 10)`` for ``n <= 100`` and ``(0.5, 2)`` for larger games; in
    general mode they may also be per-player sequences.
    """

    u_max: float = 1e6
    rho0: float = 1.0
    tau: float | Sequence[float] | None = None
    gamma: float | Sequence[float] | None = None
    eps: float = 1e-8
    eps_inner: Callable[[int], float] = FixedTolerance(1e-8)
    max_outer: int = 100
    mode: Mode = Mode.GENERAL
    # Infeasibility handling: classification tolerance plus the early
    # trigger (penalty beyond rho_limit with stagnant feasibility residual).
    eps_feas: float = 1e-6
    rho_limit: float = 1e12
    stall_window: int = 5
    stall_rtol: float = 1e-3
    # A safeguard-stopped inner point is still accepted if its residual is
    # within this factor of the requested inner tolerance.
    soft_accept_factor: float = 1e3
    lm: LmConfig = LmConfig()
    kink_rule: KinkRule = DEFAULT_KINK_RULE

    def __post_init__(self) -> None:
        if self.u_max < 0:
            raise ConfigError("u_max must be nonnegative")
        if not self.rho0 > 0:
            raise ConfigError("rho0 must be positive")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.max_outer < 1:
            raise ConfigError("max_outer must be at least 1")


@dataclass
class IterationRecord:
    """State after one completed outer iteration.

    ``rho`` is the penalty vector used for this iteration's subproblem
    (length 1 in variational mode), ``u`` the safeguarded estimates produced
    at its end, and ``inner`` the full subsolver log.
    """

    k: int
    x: np.ndarray
    multipliers: MultiplierSet
    u: list[np.ndarray]
    rho: np.ndarray
    inner_iters: int
    residuals: tuple[float, float, float]
    vmeasure: np.ndarray
    inner: LmResult


@dataclass
class TerminationReport:
    """Final status with residual triple and the per-iteration trace."""

    status: Status
    x: np.ndarray
    multipliers: MultiplierSet
    residuals: tuple[float, float, float]
    rho_max: float
    i_total: int
    trace: list[IterationRecord] = field(default_factory=list)
    shared: bool = False
    message: str = ""

    @property
    def outer_iterations(self) -> int:
        return len(self.trace)


# --------------------------------------------------------------------- pieces


def nnls(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Nonnegative least squares ``argmin_{w >= 0} ||A w - b||``.

    Thin wrapper around the Lawson-Hanson active-set iteration with the
    iteration count capped at ``10 * columns``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if not (np.isfinite(A).all() and np.isfinite(b).all()):
        raise ValueError("nnls requires finite inputs")
    if A.shape[0] != b.shape[0]:
        raise ValueError("matrix and right-hand side sizes do not match")
    if A.shape[1] == 0:
        return np.zeros(0)
    try:
        sol, _ = scipy.optimize.nnls(A, b, maxiter=max(1, 10 * A.shape[1]))
    except RuntimeError as exc:
        raise NnlsError(str(exc)) from None
    return sol


def initial_multipliers(problem: GnepProblem, x0: np.ndarray) -> MultiplierSet:
    """Least-squares multiplier start.

    Components with ``g_i(x0) < 0`` start at zero; over the remaining ones
    each player's stationarity system is fit in a nonnegative least-squares
    sense.  Kept-group multipliers start at zero.
    """
    x0 = problem.point(x0)
    lam = []
    for nu in range(problem.num_players):
        g = problem.g_val(nu, x0)
        lam_nu = np.zeros(g.size)
        active = g >= 0.0
        if active.any():
            rows = problem.block_slice(nu)
            A = problem.g_grad(nu, x0)[rows, :][:, active]
            lam_nu[active] = nnls(A, -problem.theta_grad(nu, x0))
        lam.append(lam_nu)
    mu = [np.zeros(spec.h_count) for spec in problem.players]
    return MultiplierSet(lam=lam, mu=mu)


def _initial_multipliers_shared(problem: GnepProblem, x0: np.ndarray) -> np.ndarray:
    # Single shared vector: fit the stacked stationarity system of all
    # players at once, again only over the components active at x0.
    x0 = problem.point(x0)
    g = problem.g_val(0, x0)
    lam = np.zeros(g.size)
    active = g >= 0.0
    if active.any():
        A = problem.g_grad(0, x0)[:, active]
        b = -np.concatenate(
            [problem.theta_grad(nu, x0) for nu in range(problem.num_players)]
        )
        lam[active] = nnls(A, b)
    return lam


def update_multipliers(
    problem: GnepProblem, x_next: np.ndarray, state: PenaltyState
) -> list[np.ndarray]:
    """Shifted-multiplier update; a single entry when the state is shared."""
    if state.shared:
        return [shifted_multiplier(problem.g_val(0, x_next), state.u[0], state.rho[0])]
    return [
        shifted_multiplier(problem.g_val(nu, x_next), state.u[nu], state.rho[nu])
        for nu in range(problem.num_players)
    ]


def update_penalty(
    vmeasure_new: np.ndarray,
    vmeasure_old: np.ndarray,
    tau: np.ndarray,
    gamma: np.ndarray,
    rho: np.ndarray,
) -> np.ndarray:
    """Keep ``rho`` where the measure improved by factor ``tau``, else grow by ``gamma``."""
    vn = np.atleast_1d(np.asarray(vmeasure_new, dtype=float))
    vo = np.atleast_1d(np.asarray(vmeasure_old, dtype=float))
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    keep = vn <= np.asarray(tau, dtype=float) * vo
    return np.where(keep, rho, np.asarray(gamma, dtype=float) * rho)


def update_safeguard(lam: Sequence[np.ndarray], u_max: float) -> list[np.ndarray]:
    """Clamp multiplier estimates into ``[0, u_max]``."""
    return [np.clip(np.asarray(l, dtype=float), 0.0, u_max) for l in lam]


def stopping_residuals(
    problem: GnepProblem, x: np.ndarray, lam: Sequence[np.ndarray]
) -> tuple[float, float, float]:
    """Max-norm (feasibility, stationarity, complementarity) residual triple."""
    if problem.p > 0:
        raise ProblemError("stopping residuals are defined for fully penalized games")
    x = problem.point(x)
    r_f = r_o = r_c = 0.0
    for nu in range(problem.num_players):
        g = problem.g_val(nu, x)
        l = np.asarray(lam[nu], dtype=float)
        rows = problem.block_slice(nu)
        stat = problem.theta_grad(nu, x) + problem.g_grad(nu, x)[rows, :] @ l
        r_o = max(r_o, float(np.abs(stat).max()) if stat.size else 0.0)
        if g.size:
            r_f = max(r_f, float(np.maximum(g, 0.0).max()))
            r_c = max(r_c, abs(float(g @ l)))
    return (r_f, r_o, r_c)


def _merge_constraint_bundles(
    g: ConstraintBundle | None, h: ConstraintBundle
) -> ConstraintBundle:
    if g is None:
        return h

    def value(x):
        return np.concatenate(
            [np.asarray(g.value(x), dtype=float).reshape(-1),
             np.asarray(h.value(x), dtype=float).reshape(-1)]
        )

    def grad(x):
        return np.hstack(
            [np.asarray(g.grad(x), dtype=float), np.asarray(h.grad(x), dtype=float)]
        )

    hess = None
    if g.hess is not None and h.hess is not None:
        def hess(x):
            return np.concatenate(
                [np.asarray(g.hess(x), dtype=float),
                 np.asarray(h.hess(x), dtype=float)],
                axis=0,
            )

    return ConstraintBundle(count=g.count + h.count, value=value, grad=grad, hess=hess)


def fully_penalized(problem: GnepProblem) -> GnepProblem:
    """Fold every kept constraint into the penalized group.

    Returns the problem itself when nothing is kept; the multiplier split
    for reporting is recovered from the original player counts.
    """
    if problem.p == 0:
        return problem
    players = []
    for spec in problem.players:
        if spec.h is None or spec.h.count == 0:
            players.append(spec)
        else:
            players.append(
                PlayerSpec(
                    dim=spec.dim,
                    objective=spec.objective,
                    g=_merge_constraint_bundles(spec.g, spec.h),
                )
            )
    return GnepProblem(
        players,
        shared_constraints=problem.shared_constraints,
        name=problem.name,
        x0_presets=problem.x0_presets,
    )


# ---------------------------------------------------------------- the driver


def _resolve_tau_gamma(problem: GnepProblem, cfg: OuterConfig, shared: bool):
    # Aggressive penalization for small games, cautious for large ones.
    tau_default = 0.1 if problem.n <= 100 else 0.5
    gamma_default = 10.0 if problem.n <= 100 else 2.0

    def resolve(value, default, name, low, strict_low):
        if value is None:
            value = default
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if shared and arr.size != 1:
            raise ConfigError(f"{name} must be a single scalar in variational mode")
        if arr.size == 1:
            arr = np.full(1 if shared else problem.num_players, float(arr[0]))
        elif arr.size != problem.num_players:
            raise ConfigError(f"{name} must be scalar or one value per player")
        if strict_low and not (arr > low).all():
            raise ConfigError(f"{name} must be > {low}")
        return arr

    tau = resolve(cfg.tau, tau_default, "tau", 0.0, True)
    if not (tau < 1.0).all():
        raise ConfigError("tau must lie in (0, 1)")
    gamma = resolve(cfg.gamma, gamma_default, "gamma", 1.0, True)
    return tau, gamma


def _vmeasure(
    problem: GnepProblem, x: np.ndarray, lam: Sequence[np.ndarray], shared: bool
) -> np.ndarray:
    if shared:
        g = problem.g_val(0, x)
        return np.array([float(np.linalg.norm(np.minimum(-g, lam[0])))])
    out = np.empty(problem.num_players)
    for nu in range(problem.num_players):
        g = problem.g_val(nu, x)
        out[nu] = float(np.linalg.norm(np.minimum(-g, lam[nu])))
    return out


def _expand(lam: list[np.ndarray], num_players: int, shared: bool) -> list[np.ndarray]:
    return [lam[0]] * num_players if shared else lam


def _report_multipliers(
    lam: list[np.ndarray],
    original: GnepProblem,
    shared: bool,
) -> MultiplierSet:
    # Split each merged vector back into the original (penalized, kept)
    # groups; in shared mode all players alias the same arrays.
    if shared:
        m0 = original.players[0].g_count
        lam_g = lam[0][:m0]
        mu_h = lam[0][m0:]
        n_players = original.num_players
        return MultiplierSet(lam=[lam_g] * n_players, mu=[mu_h] * n_players)
    lam_g = []
    mu_h = []
    for nu, spec in enumerate(original.players):
        lam_g.append(lam[nu][: spec.g_count])
        mu_h.append(lam[nu][spec.g_count:])
    return MultiplierSet(lam=lam_g, mu=mu_h)


def _default_subsolver(cfg: OuterConfig):
    def run(problem: GnepProblem, state: PenaltyState, x_start: np.ndarray, tol: float) -> LmResult:
        system = SemismoothSystem(
            residual=lambda x: assemble_F(problem, x, state),
            jacobian=lambda x: generalized_jacobian(problem, x, state, cfg.kink_rule),
        )
        return lm_solve(system, x_start, replace(cfg.lm, eps=tol))

    return run


def _feasibility_residual_max(problem: GnepProblem, x: np.ndarray) -> float:
    from .diagnostics import feasibility_gnep_residual

    return float(np.max(feasibility_gnep_residual(problem, x)))


def _rho_stalled(trace: list[IterationRecord], state: PenaltyState, cfg: OuterConfig) -> bool:
    if max(state.rho) <= cfg.rho_limit:
        return False
    if len(trace) <= cfg.stall_window:
        return False
    old = trace[-1 - cfg.stall_window].residuals[0]
    new = trace[-1].residuals[0]
    if old <= 0.0:
        return False
    return (old - new) < cfg.stall_rtol * old


def _run(
    problem: GnepProblem,
    x0: np.ndarray,
    cfg: OuterConfig,
    shared: bool,
    subsolver,
) -> TerminationReport:
    original = problem
    work = fully_penalized(problem)
    tau, gamma = _resolve_tau_gamma(work, cfg, shared)
    x = work.point(x0).copy()

    if shared:
        lam = [_initial_multipliers_shared(work, x)]
        rho = np.array([cfg.rho0])
    else:
        lam = initial_multipliers(work, x).lam
        rho = np.full(work.num_players, cfg.rho0)
    u = update_safeguard(lam, cfg.u_max)
    state = PenaltyState(u=u, rho=list(rho), u_max=cfg.u_max, shared=shared)
    vmeas_old = _vmeasure(work, x, lam, shared)

    if subsolver is None:
        subsolver = _default_subsolver(cfg)

    trace: list[IterationRecord] = []
    i_total = 0
    res = stopping_residuals(work, x, _expand(lam, work.num_players, shared))
    status = None
    message = ""

    for k in range(1, cfg.max_outer + 1):
        if max(res) <= cfg.eps:
            status = Status.SOLVED_KKT
            break
        if _rho_stalled(trace, state, cfg):
            if _feasibility_residual_max(work, x) <= cfg.eps_feas:
                status = Status.INFEASIBLE_STATIONARY
                message = (
                    "penalty growth stalled on an infeasible point that is "
                    "stationary for the constraint-violation game"
                )
                break
        eps_k = cfg.eps_inner(k - 1)
        inner = subsolver(work, state, x, eps_k)
        i_total += inner.iterations
        if inner.status is not LmStatus.CONVERGED:
            if inner.final_residual > eps_k * cfg.soft_accept_factor:
                status = Status.SUBSOLVER_FAILURE
                message = (
                    f"inner solver stopped ({inner.status.value}) with residual "
                    f"{inner.final_residual:.3e} above the acceptable slack"
                )
                x = inner.x
                res = stopping_residuals(work, x, _expand(lam, work.num_players, shared))
                break
        x = inner.x
        lam = update_multipliers(work, x, state)
        vmeas_new = _vmeasure(work, x, lam, shared)
        rho_next = update_penalty(vmeas_new, vmeas_old, tau, gamma, rho)
        u_next = update_safeguard(lam, cfg.u_max)
        res = stopping_residuals(work, x, _expand(lam, work.num_players, shared))
        trace.append(
            IterationRecord(
                k=k,
                x=x.copy(),
                multipliers=_report_multipliers(lam, original, shared),
                u=[ui.copy() for ui in u_next],
                rho=rho.copy(),
                inner_iters=inner.iterations,
                residuals=res,
                vmeasure=vmeas_new.copy(),
                inner=inner,
            )
        )
        rho = rho_next
        state = PenaltyState(u=u_next, rho=list(rho), u_max=cfg.u_max, shared=shared)
        vmeas_old = vmeas_new

    if status is None:
        if max(res) <= cfg.eps:
            # converged exactly on the last allowed iteration
            status = Status.SOLVED_KKT
        elif res[0] > cfg.eps and _feasibility_residual_max(work, x) <= cfg.eps_feas:
            status = Status.INFEASIBLE_STATIONARY
            message = (
                "iteration budget exhausted at an infeasible point that is "
                "stationary for the constraint-violation game"
            )
        else:
            status = Status.MAX_OUTER_ITERATIONS
            message = "iteration budget exhausted"

    rho_max = float(max((float(rec.rho.max()) for rec in trace), default=cfg.rho0))
    return TerminationReport(
        status=status,
        x=x,
        multipliers=_report_multipliers(lam, original, shared),
        residuals=res,
        rho_max=rho_max,
        i_total=i_total,
        trace=trace,
        shared=shared,
        message=message,
    )


def solve(
    problem: GnepProblem,
    x0: np.ndarray,
    cfg: OuterConfig | None = None,
    subsolver=None,
) -> TerminationReport:
    """Run the general method with per-player multipliers and penalties.

    Parameters
    ----------
    problem : GnepProblem
    x0 : array of length ``n``
    cfg : OuterConfig, optional
        Must have ``mode == Mode.GENERAL``.
    subsolver : callable, optional
        ``(problem, state, x_start, tol) -> LmResult``; defaults to the
        damped Newton-type solver on the stacked gradient system.

    Returns
    -------
    TerminationReport
    """
    if cfg is None:
        cfg = OuterConfig()
    if cfg.mode is not Mode.GENERAL:
        raise ConfigError("solve requires cfg.mode == Mode.GENERAL")
    return _run(problem, x0, cfg, shared=False, subsolver=subsolver)


def solve_variational(
    problem: GnepProblem,
    x0: np.ndarray,
    cfg: OuterConfig | None = None,
    subsolver=None,
) -> TerminationReport:
    """Run the shared-constraint variant with a single multiplier set.

    Requires ``problem.shared_constraints``; the returned report certifies
    the structural sharing (``report.shared`` and aliased multiplier
    entries).
    """
    if cfg is None:
        cfg = OuterConfig(mode=Mode.VARIATIONAL)
    if cfg.mode is not Mode.VARIATIONAL:
        raise ConfigError("solve_variational requires cfg.mode == Mode.VARIATIONAL")
    if not problem.shared_constraints:
        raise ConfigError(
            "solve_variational requires a problem built with shared_constraints=True"
        )
    return _run(problem, x0, cfg, shared=True, subsolver=subsolver)
