"""Solvers for monotone finite-sum variational inequalities.

Three methods behind one interface:

``ommb``
    Optimistic method with momentum and mini-batching: a variance-reduced
    optimistic step built from a rarely refreshed snapshot point ``w``
    (loopless refresh with probability ``p``), a batched estimator

        delta = F(w_prev)
              + mean_{j in S} [ (F_j(x) - F_j(w_prev)) + (F_j(x) - F_j(x_prev)) ],

    the snapshot momentum ``gamma * (w - x)``, and a prox step.  With
    ``batch == M`` the estimator collapses exactly to the two-point
    optimistic value ``2 F(x) - F(x_prev)``; the solver then runs a
    deterministic full pass (no index draws) so that the trajectory matches
    the optimistic baseline bit for bit.

``popov``
    Deterministic optimistic baseline: ``x+ = prox(x - eta*(2F(x) - F(x_prev)))``,
    one full operator evaluation per step.

``eg``
    Deterministic extragradient baseline: two full evaluations and two prox
    steps per iteration; the ergodic average is taken over the midpoints.

Every run is owned by a single thread; problems are immutable and can be
shared across concurrent runs.  All randomness comes from the SplitMix64
stream seeded by ``params.seed``, with a contractual draw order per
iteration: ``batch`` index draws, then one refresh coin flip (zero index
draws in the full-batch deterministic mode).

Cost accounting follows the estimator contract: an OMMB step charges
``3 * batch`` component evaluations plus ``M`` per realized snapshot
refresh, and initialization charges ``M`` for the snapshot cache fill.
The full-batch mode computes less than it charges (the collapsed estimator
reuses full evaluations); charges are the documented model, realized
compute is an implementation detail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import _pykernels
from ._backend import get_backend
from .core import FiniteSumProblem, SolverParams
from .metrics import OpAccount, game_duality_gap
from .prox import prox_residual
from .rng import SplitMix64
from .trace import RunTrace, TraceRow

DIVERGENCE_NORM_LIMIT = 1e12


class DivergenceError(RuntimeError):
    """A solver produced a non-finite or runaway iterate."""

    def __init__(self, message: str, iteration: int, last_point: np.ndarray):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration
        self.last_point = last_point


class CacheCoherenceError(RuntimeError):
    """Debug-mode check: a cached operator value disagrees with a recompute."""


@dataclass
class SolverState:
    """Mutable per-run state (generic path).

    Invariants: after :func:`init_state` all four points coincide;
    ``f_w_prev`` always equals ``F(w_prev)`` (checked in debug mode);
    ``avg`` is the running mean of the iterates produced so far.
    """

    x_curr: np.ndarray
    x_prev: np.ndarray
    w_curr: np.ndarray
    w_prev: np.ndarray
    f_w_prev: np.ndarray
    f_w_curr: np.ndarray
    f_x_prev: np.ndarray
    avg_sum: np.ndarray
    account: OpAccount
    k: int = 0
    snapshot_refreshes: int = 0
    debug: bool = False

    @property
    def avg(self) -> np.ndarray:
        if self.k == 0:
            return self.x_curr.copy()
        return self.avg_sum / self.k


@dataclass(frozen=True)
class StepRecord:
    iteration: int
    batch: tuple[int, ...]
    refreshed: bool
    component_evals: int
    step_norm: float
    snapshot_norm: float


@dataclass(frozen=True)
class StopCriteria:
    """Extra stopping rules on top of ``params.max_iters``.

    ``target_gap`` stops once the trace-cadence quality measure falls to
    the target: the duality gap of the ergodic average for games, the prox
    fixed-point residual of the last iterate otherwise.  ``max_ops`` caps
    matvec-equivalent operations.
    """

    target_gap: Optional[float] = None
    max_ops: Optional[float] = None
    max_iters: Optional[int] = None


@dataclass(frozen=True)
class HookState:
    """Snapshot passed to run hooks at every trace cadence point.

    Arrays are owned by the snapshot (safe to retain across steps).
    """

    iteration: int
    x_curr: np.ndarray
    x_avg: np.ndarray
    w_curr: Optional[np.ndarray]
    component_evals: int
    snapshot_refreshes: int


def init_state(problem: FiniteSumProblem, x0: Optional[np.ndarray] = None,
               *, need_full_cache: bool = True, debug: bool = False) -> SolverState:
    """Fresh state with all points at ``x0`` (default: prox of the origin).

    When ``need_full_cache`` is set the snapshot cache is filled with one
    full operator evaluation, charged to the account.
    """
    if x0 is None:
        x0 = problem.prox.prox_map(1.0, np.zeros(problem.dim))
    x0 = np.array(x0, dtype=np.float64, copy=True)
    if x0.shape != (problem.dim,):
        raise ValueError(f"x0 must have dimension {problem.dim}")
    account = OpAccount(num_components=problem.num_components)
    if need_full_cache:
        f0 = np.asarray(problem.full_eval(x0), dtype=np.float64)
        account.charge_full(1)
    else:
        f0 = np.zeros(problem.dim)
    return SolverState(
        x_curr=x0,
        x_prev=x0.copy(),
        w_curr=x0.copy(),
        w_prev=x0.copy(),
        f_w_prev=f0.copy(),
        f_w_curr=f0.copy(),
        f_x_prev=f0.copy(),
        avg_sum=np.zeros(problem.dim),
        account=account,
        debug=debug,
    )


def delta_estimator(problem: FiniteSumProblem, state: SolverState,
                    batch: Sequence[int]) -> np.ndarray:
    """Variance-reduced operator estimate for the current state.

    ``delta = F(w_prev) + mean_j [(F_j(x) - F_j(w_prev)) + (F_j(x) - F_j(x_prev))]``
    over the batch (duplicates allowed).  Charges ``3 * len(batch)``
    component evaluations; the ``F(w_prev)`` term is served from the cache
    at zero marginal cost.
    """
    b = len(batch)
    if b < 1:
        raise ValueError("batch must be non-empty")
    for j in batch:
        if not 0 <= j < problem.num_components:
            raise IndexError(f"component index {j} out of range")
    if state.debug:
        recomputed = np.asarray(problem.full_eval(state.w_prev))
        if not np.array_equal(recomputed, state.f_w_prev):
            raise CacheCoherenceError(
                "cached F(w_prev) differs from recomputation"
            )
    acc = np.zeros(problem.dim)
    for j in batch:
        fj_x = problem.component_eval(j, state.x_curr)
        fj_w = problem.component_eval(j, state.w_prev)
        fj_p = problem.component_eval(j, state.x_prev)
        acc += (fj_x - fj_w) + (fj_x - fj_p)
    state.account.charge_components(3 * b)
    return acc / b + state.f_w_prev


def _check_finite(arr: np.ndarray, k: int, last: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise DivergenceError("non-finite iterate", k, last.copy())
    if float(np.linalg.norm(arr)) > DIVERGENCE_NORM_LIMIT:
        raise DivergenceError("iterate norm exceeded divergence limit", k, last.copy())


def ommb_step(problem: FiniteSumProblem, state: SolverState,
              params: SolverParams, rng: SplitMix64) -> StepRecord:
    """One iteration of the batched optimistic method (generic path)."""
    M = problem.num_components
    b = params.batch
    if b > M:
        raise ValueError(f"batch {b} exceeds the number of components {M}")
    if b == M:
        batch: tuple[int, ...] = tuple(range(M))
        f_x = np.asarray(problem.full_eval(state.x_curr), dtype=np.float64)
        delta = 2.0 * f_x - state.f_x_prev
        state.account.charge_components(3 * b)
    else:
        f_x = None
        batch = rng.indices(M, b)
        delta = delta_estimator(problem, state, batch)

    arg = (state.x_curr + params.gamma * (state.w_curr - state.x_curr)) \
        - params.eta * delta
    _check_finite(arg, state.k, state.x_curr)
    x_next = problem.prox.prox_map(params.eta, arg)
    _check_finite(x_next, state.k, state.x_curr)

    step_norm = float(np.linalg.norm(x_next - state.x_curr))
    snapshot_norm = float(np.linalg.norm(x_next - state.w_curr))
    refreshed = rng.bernoulli(params.prob)

    state.x_prev = state.x_curr
    state.w_prev = state.w_curr
    state.f_w_prev = state.f_w_curr
    if f_x is not None:
        state.f_x_prev = f_x
    state.x_curr = x_next
    evals = 3 * b
    if refreshed:
        state.w_curr = x_next
        state.f_w_curr = np.asarray(problem.full_eval(x_next), dtype=np.float64)
        state.account.charge_full(1)
        state.snapshot_refreshes += 1
        evals += M
    state.avg_sum += x_next
    state.k += 1
    return StepRecord(state.k, batch, refreshed, evals, step_norm, snapshot_norm)


def popov_step(problem: FiniteSumProblem, state: SolverState, eta: float) -> StepRecord:
    """One optimistic-baseline iteration: reuse F(x_prev), one full eval."""
    f_x = np.asarray(problem.full_eval(state.x_curr), dtype=np.float64)
    state.account.charge_full(1)
    delta = 2.0 * f_x - state.f_x_prev
    arg = state.x_curr - eta * delta
    _check_finite(arg, state.k, state.x_curr)
    x_next = problem.prox.prox_map(eta, arg)
    _check_finite(x_next, state.k, state.x_curr)
    step_norm = float(np.linalg.norm(x_next - state.x_curr))
    state.x_prev = state.x_curr
    state.f_x_prev = f_x
    state.x_curr = x_next
    state.avg_sum += x_next
    state.k += 1
    return StepRecord(state.k, (), False, problem.num_components, step_norm,
                      float("nan"))


def extragradient_step(problem: FiniteSumProblem, state: SolverState,
                       eta: float) -> StepRecord:
    """One extragradient iteration; the average collects the midpoints."""
    f_x = np.asarray(problem.full_eval(state.x_curr), dtype=np.float64)
    y = problem.prox.prox_map(eta, state.x_curr - eta * f_x)
    _check_finite(y, state.k, state.x_curr)
    f_y = np.asarray(problem.full_eval(y), dtype=np.float64)
    x_next = problem.prox.prox_map(eta, state.x_curr - eta * f_y)
    _check_finite(x_next, state.k, state.x_curr)
    state.account.charge_full(2)
    step_norm = float(np.linalg.norm(x_next - state.x_curr))
    state.x_prev = state.x_curr
    state.x_curr = x_next
    state.avg_sum += y
    state.k += 1
    return StepRecord(state.k, (), False, 2 * problem.num_components,
                      step_norm, float("nan"))


def _effective_limits(params: SolverParams, stop: Optional[StopCriteria]):
    max_iters = params.max_iters
    budget = params.op_budget
    target = None
    if stop is not None:
        if stop.max_iters is not None:
            max_iters = min(max_iters, stop.max_iters)
        if stop.max_ops is not None:
            budget = stop.max_ops if budget is None else min(budget, stop.max_ops)
        target = stop.target_gap
    return max_iters, budget, target


def _quality(problem: FiniteSumProblem, z: np.ndarray, avg: np.ndarray,
             eta: float):
    """(gap_avg, gap_last, residual) row entries; gaps are NaN off-game."""
    residual = prox_residual(problem, z, eta)
    if problem.game is not None:
        return (game_duality_gap(problem.game, avg),
                game_duality_gap(problem.game, z), residual)
    return float("nan"), float("nan"), residual


def _base_metadata(solver: str, backend: str, problem: FiniteSumProblem,
                   params: SolverParams, cadence: int, max_iters: int,
                   budget, target) -> dict:
    digest = problem.game.digest() if problem.game is not None else "custom"
    return {
        "solver": solver,
        "backend": backend,
        "dim": problem.dim,
        "components": problem.num_components,
        "batch": params.batch,
        "eta": float(params.eta),
        "gamma": float(params.gamma),
        "prob": float(params.prob),
        "seed": params.seed,
        "max_iters": max_iters,
        "cadence": cadence,
        "op_budget": "" if budget is None else float(budget),
        "target_gap": "" if target is None else float(target),
        "problem_digest": digest,
        "warnings": ";".join(params.warnings),
    }


def _run_generic(solver: str, problem: FiniteSumProblem, params: SolverParams,
                 stop: Optional[StopCriteria], cadence: int, hooks,
                 x0, debug: bool) -> RunTrace:
    max_iters, budget, target = _effective_limits(params, stop)
    budget_ce = math.inf if budget is None else budget * problem.num_components
    state = init_state(problem, x0, need_full_cache=(solver != "eg"), debug=debug)
    rng = SplitMix64(params.seed)
    eta = params.eta

    meta = _base_metadata(solver, "generic", problem, params, cadence,
                          max_iters, budget, target)
    trace = RunTrace(metadata=meta)
    start = time.monotonic()
    stopped = False

    while state.k < max_iters and not stopped:
        if state.account.component_evals >= budget_ce:
            break
        chunk_end = min(state.k + cadence, max_iters)
        while state.k < chunk_end:
            if solver == "ommb":
                ommb_step(problem, state, params, rng)
            elif solver == "popov":
                popov_step(problem, state, eta)
            else:
                extragradient_step(problem, state, eta)
            if state.account.component_evals >= budget_ce:
                stopped = True
                break
        avg = state.avg
        gap_avg, gap_last, residual = _quality(problem, state.x_curr, avg, eta)
        row = TraceRow(state.k, state.account.component_evals,
                       state.account.matvec_ops, gap_avg, gap_last, residual,
                       int((time.monotonic() - start) * 1000))
        trace.rows.append(row)
        hook_state = HookState(state.k, state.x_curr, avg,
                               state.w_curr if solver == "ommb" else None,
                               state.account.component_evals,
                               state.snapshot_refreshes)
        for hook in hooks:
            hook(hook_state)
        measure = residual if problem.game is None else gap_avg
        if target is not None and measure <= target:
            stopped = True

    trace.x_avg = state.avg
    trace.x_last = state.x_curr.copy()
    trace.metadata["refreshes"] = state.snapshot_refreshes
    return trace


def _run_game(solver: str, problem: FiniteSumProblem, params: SolverParams,
              stop: Optional[StopCriteria], cadence: int, hooks,
              backend: Optional[str], x0) -> RunTrace:
    game = problem.game
    d = game.dim
    backend_name, kern = get_backend(backend)
    max_iters, budget, target = _effective_limits(params, stop)
    budget_ce = math.inf if budget is None else budget * d

    if x0 is None:
        x0 = problem.prox.prox_map(1.0, np.zeros(2 * d))
    z = np.array(x0, dtype=np.float64, copy=True)
    if z.shape != (2 * d,):
        raise ValueError(f"x0 must have dimension {2 * d}")
    z_prev = z.copy()
    zw = z.copy()
    zw_prev = z.copy()
    avg_sum = np.zeros(2 * d)
    f_w_prev = np.empty(2 * d)
    f_w_curr = np.empty(2 * d)
    f_x_prev = np.empty(2 * d)
    counters = np.zeros(3, dtype=np.int64)
    rng_state = np.array([params.seed], dtype=np.uint64)

    A = game.matrix
    AT = game.matrix_t
    if solver in ("ommb", "popov"):
        _pykernels._full_op(A, z, f_w_prev)
        np.copyto(f_w_curr, f_w_prev)
        np.copyto(f_x_prev, f_w_prev)
        counters[1] = d  # initial snapshot cache fill

    delta = np.empty(2 * d)
    arg = np.empty(2 * d)
    xn = np.empty(2 * d)
    fxb = np.empty(2 * d)
    tmp = np.empty(2 * d)
    buf_a = np.empty(d)
    buf_b = np.empty(d)
    yh = np.empty(2 * d)

    meta = _base_metadata(solver, backend_name, problem, params, cadence,
                          max_iters, budget, target)
    trace = RunTrace(metadata=meta)
    start = time.monotonic()

    while counters[0] < max_iters:
        if counters[1] >= budget_ce:
            break
        nsteps = int(min(cadence, max_iters - counters[0]))
        if solver == "ommb":
            status = kern.ommb_chunk(
                A, AT, z, z_prev, zw, zw_prev, f_w_prev, f_w_curr, f_x_prev,
                avg_sum, delta, arg, xn, fxb, tmp, buf_a, buf_b,
                rng_state, counters, params.eta, params.gamma, params.prob,
                params.batch, nsteps, budget_ce)
        elif solver == "popov":
            status = kern.popov_chunk(
                A, AT, z, z_prev, f_x_prev, avg_sum, arg, xn, fxb, tmp,
                buf_a, buf_b, counters, params.eta, nsteps, budget_ce)
        else:
            status = kern.eg_chunk(
                A, AT, z, yh, avg_sum, arg, fxb, tmp, buf_a, buf_b,
                counters, params.eta, nsteps, budget_ce)
        if status == _pykernels.STATUS_DIVERGED:
            raise DivergenceError("non-finite iterate", int(counters[0]), z.copy())

        k = int(counters[0])
        ce = int(counters[1])
        avg = avg_sum / k if k > 0 else z.copy()
        gap_avg, gap_last, residual = _quality(problem, z, avg, params.eta)
        trace.rows.append(TraceRow(k, ce, ce / d, gap_avg, gap_last, residual,
                                   int((time.monotonic() - start) * 1000)))
        hook_state = HookState(k, z.copy(), avg,
                               zw.copy() if solver == "ommb" else None,
                               ce, int(counters[2]))
        for hook in hooks:
            hook(hook_state)
        if status == _pykernels.STATUS_BUDGET:
            break
        if target is not None and gap_avg <= target:
            break

    k = int(counters[0])
    trace.x_avg = avg_sum / k if k > 0 else z.copy()
    trace.x_last = z.copy()
    trace.metadata["refreshes"] = int(counters[2])
    return trace


def _run(solver: str, problem: FiniteSumProblem, params: SolverParams,
         stop: Optional[StopCriteria], cadence: int, hooks,
         backend: Optional[str], x0, debug: bool) -> RunTrace:
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    if params.batch > problem.num_components:
        raise ValueError(
            f"batch {params.batch} exceeds component count {problem.num_components}"
        )
    if problem.game is not None and backend != "generic" and not debug:
        return _run_game(solver, problem, params, stop, cadence, hooks, backend, x0)
    return _run_generic(solver, problem, params, stop, cadence, hooks, x0, debug)


def run_ommb(problem: FiniteSumProblem, params: SolverParams,
             stop: Optional[StopCriteria] = None, *, cadence: int = 100,
             hooks: Sequence[Callable[[HookState], None]] = (),
             backend: Optional[str] = None, x0: Optional[np.ndarray] = None,
             allow_untied_momentum: bool = False, debug: bool = False) -> RunTrace:
    """Run the batched optimistic method; returns the trace.

    The run's answer is the ergodic average ``trace.x_avg``; the last
    iterate is also exposed.  ``gamma`` and ``prob`` must be tied (as the
    tuner produces) unless ``allow_untied_momentum`` is set.  Identical
    ``(problem, params)`` give identical traces; on matrix games the
    compiled and pure backends are bit-identical as well.
    """
    if params.gamma != params.prob and not allow_untied_momentum:
        raise ValueError(
            "gamma and prob are tied by the tuning rule; pass "
            "allow_untied_momentum=True to override"
        )
    return _run("ommb", problem, params, stop, cadence, hooks, backend, x0, debug)


def run_popov(problem: FiniteSumProblem, params: SolverParams,
              stop: Optional[StopCriteria] = None, *, cadence: int = 100,
              hooks: Sequence[Callable[[HookState], None]] = (),
              backend: Optional[str] = None, x0: Optional[np.ndarray] = None,
              debug: bool = False) -> RunTrace:
    """Run the deterministic optimistic baseline."""
    return _run("popov", problem, params, stop, cadence, hooks, backend, x0, debug)


def run_extragradient(problem: FiniteSumProblem, params: SolverParams,
                      stop: Optional[StopCriteria] = None, *, cadence: int = 100,
                      hooks: Sequence[Callable[[HookState], None]] = (),
                      backend: Optional[str] = None,
                      x0: Optional[np.ndarray] = None,
                      debug: bool = False) -> RunTrace:
    """Run the deterministic extragradient baseline."""
    return _run("eg", problem, params, stop, cadence, hooks, backend, x0, debug)


def default_popov_eta(problem: FiniteSumProblem) -> float:
    return 1.0 / (4.0 * _require_l(problem))


def default_eg_eta(problem: FiniteSumProblem) -> float:
    return 1.0 / (2.0 * _require_l(problem))


def _require_l(problem: FiniteSumProblem) -> float:
    if problem.lipschitz is None or problem.lipschitz.l_full <= 0:
        raise ValueError("problem carries no positive Lipschitz constant")
    return problem.lipschitz.l_full


@dataclass(frozen=True)
class SolverEntry:
    name: str
    runner: Callable[..., RunTrace]
    uses_batch: bool


_REGISTRY: dict[str, SolverEntry] = {}


def register_solver(name: str, runner: Callable[..., RunTrace],
                    *, uses_batch: bool = False) -> None:
    """Register a solver under a unique name for harness selection.

    ``runner`` must accept ``(problem, params, stop, *, cadence, hooks,
    backend)`` and return a :class:`RunTrace`.
    """
    if name in _REGISTRY:
        raise ValueError(f"solver {name!r} is already registered")
    _REGISTRY[name] = SolverEntry(name, runner, uses_batch)


def get_solver(name: str) -> SolverEntry:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown solver {name!r}; registered: {sorted(_REGISTRY)}"
        ) from None


def list_solvers() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


register_solver("ommb", run_ommb, uses_batch=True)
register_solver("popov", run_popov)
register_solver("eg", run_extragradient)
