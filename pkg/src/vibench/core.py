"""Core domain types for finite-sum variational inequalities.

A problem instance bundles the averaged operator ``F = (1/M) sum_j F_j``,
its component oracles, a prox-friendly function ``g``, and Lipschitz data.
Solvers in :mod:`vibench.solvers` work against these types; concrete
instances (bilinear matrix games) live in :mod:`vibench.problems`.

All types are immutable after construction and safe to share across
concurrent runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .rng import SplitMix64

THEOREM_GAMMA_MAX = 1.0 / 16.0


@dataclass(frozen=True)
class LipschitzData:
    """Lipschitz constants of the averaged operator and its components.

    ``l_bar`` is the quadratic mean of the per-component constants,
    ``l_bar**2 == mean(per_component**2)``; it always dominates ``l_full``,
    the constant of the averaged operator.
    """

    l_full: float
    per_component: tuple[float, ...]
    l_bar: float

    def __post_init__(self):
        if self.l_full < 0 or self.l_bar < 0 or any(c < 0 for c in self.per_component):
            raise ValueError("Lipschitz constants must be nonnegative")
        mean_sq = math.fsum(c * c for c in self.per_component) / len(self.per_component)
        if abs(self.l_bar ** 2 - mean_sq) > 1e-12 * max(mean_sq, 1e-300):
            raise ValueError("l_bar**2 must equal the mean of squared per-component constants")
        if self.l_full > self.l_bar * (1.0 + 1e-12):
            raise ValueError("l_full cannot exceed l_bar (mean of components dominates)")

    @classmethod
    def from_components(cls, l_full: float, per_component) -> "LipschitzData":
        per = tuple(float(c) for c in per_component)
        l_bar = math.sqrt(math.fsum(c * c for c in per) / len(per))
        return cls(l_full=float(l_full), per_component=per, l_bar=l_bar)


@dataclass(frozen=True)
class ProxFriendlyFunction:
    """A convex function ``g`` with an exactly computable prox operator.

    ``prox_map(alpha, v)`` returns ``argmin_y alpha*g(y) + 0.5*||y - v||^2``
    for any ``alpha > 0``; ``value`` returns ``g`` (``inf`` outside the
    domain); ``domain_test`` is a fast membership check.
    """

    prox_map: Callable[[float, np.ndarray], np.ndarray]
    value: Callable[[np.ndarray], float]
    domain_test: Callable[[np.ndarray], bool]


@dataclass(frozen=True)
class FiniteSumProblem:
    """A monotone variational inequality with finite-sum operator.

    ``component_eval(j, z)`` evaluates the j-th summand (0-based index,
    ``0 <= j < num_components``); ``full_eval(z)`` evaluates the average of
    all summands.  Both must be deterministic functions of their inputs.
    ``game`` carries the dense bilinear structure when the instance was
    built from a matrix game, which lets solvers dispatch to the fast
    kernels.
    """

    dim: int
    num_components: int
    component_eval: Callable[[int, np.ndarray], np.ndarray]
    full_eval: Callable[[np.ndarray], np.ndarray]
    prox: ProxFriendlyFunction
    lipschitz: Optional[LipschitzData] = None
    game: object = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.num_components < 1:
            raise ValueError("num_components must be positive")
        if self.lipschitz is not None and len(self.lipschitz.per_component) != self.num_components:
            raise ValueError("per-component Lipschitz list length must equal num_components")

    def component_mean(self, z: np.ndarray) -> np.ndarray:
        """Arithmetic mean of all component evaluations (test oracle)."""
        acc = np.zeros(self.dim, dtype=np.float64)
        for j in range(self.num_components):
            acc += self.component_eval(j, z)
        return acc / self.num_components


@dataclass(frozen=True)
class SolverParams:
    """Run parameters shared by the solvers.

    ``gamma`` (snapshot momentum) and ``prob`` (snapshot refresh
    probability) are tied, ``gamma == prob``, whenever parameters come from
    :func:`tune_params`.  ``gamma`` in ``[0, 1]`` and ``prob == 1`` are
    accepted for the deterministic-reduction test mode even though tuned
    runs keep ``gamma <= 1/16``.
    """

    eta: float
    gamma: float
    prob: float
    batch: int
    max_iters: int
    op_budget: Optional[float] = None
    seed: int = 0
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError("eta must be a positive finite real")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.prob <= 1.0:
            raise ValueError("prob must lie in (0, 1]")
        if self.batch < 1:
            raise ValueError("batch must be a positive integer")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.op_budget is not None and self.op_budget < 0:
            raise ValueError("op_budget must be nonnegative")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


def tune_params(
    l_full: float,
    l_bar: float,
    batch: int,
    gamma: float = THEOREM_GAMMA_MAX,
    *,
    num_components: int,
    oracle_optimal: bool = False,
    constant_mode: str = "worst_case",
    max_iters: int = 100_000,
    op_budget: Optional[float] = None,
    seed: int = 0,
) -> SolverParams:
    """Step size and snapshot schedule from the convergence analysis.

    Sets ``prob = gamma`` and
    ``eta = min(sqrt(gamma * batch) / (8 * l_bar), 1 / (8 * l_full))``.
    With ``oracle_optimal=True`` the supplied ``gamma`` is ignored and the
    oracle-cost-optimal refresh probability ``batch / num_components`` is
    used instead, clamped to 1/16 (the clamp is recorded in ``warnings``).

    ``constant_mode`` selects the variance constant in the step rule.  The
    default ``"worst_case"`` uses ``l_bar`` itself, which guarantees the
    convergence bound but can be very conservative: the per-component worst
    case is attained only when consecutive iterates differ along a single
    coordinate.  ``"empirical"`` sizes the step by the typical-direction
    constant ``l_bar / sqrt(M)`` instead (equivalently
    ``eta = min(sqrt(gamma * batch * M) / (8 * l_bar), 1 / (8 * l_full))``),
    which benchmark experiments use; runs record the mode in ``warnings``.

    A warning flag is also recorded when ``batch > l_bar * sqrt(M) / l_full``,
    the regime where the batch term dominates total oracle cost.
    """
    if not (l_full > 0 and math.isfinite(l_full)):
        raise ValueError("l_full must be positive")
    if not (l_bar > 0 and math.isfinite(l_bar)):
        raise ValueError("l_bar must be positive")
    if num_components < 1:
        raise ValueError("num_components must be positive")
    if not 1 <= batch <= num_components:
        raise ValueError("batch must lie in {1, ..., num_components}")
    if constant_mode not in ("worst_case", "empirical"):
        raise ValueError("constant_mode must be 'worst_case' or 'empirical'")

    warnings: list[str] = []
    if oracle_optimal:
        raw = batch / num_components
        gamma = min(raw, THEOREM_GAMMA_MAX)
        if gamma < raw:
            warnings.append(
                f"refresh probability clamped from {raw:.6g} to {THEOREM_GAMMA_MAX:.6g}"
            )
    else:
        if not 0.0 < gamma <= THEOREM_GAMMA_MAX:
            raise ValueError("gamma must lie in (0, 1/16] for tuned runs")

    if batch > l_bar * math.sqrt(num_components) / l_full:
        warnings.append("batch term dominates oracle cost for this batch size")

    l_var = l_bar
    if constant_mode == "empirical":
        l_var = l_bar / math.sqrt(num_components)
        warnings.append("empirical variance constant (l_bar/sqrt(M)); "
                        "outside the worst-case guarantee")
    eta = min(math.sqrt(gamma * batch) / (8.0 * l_var), 1.0 / (8.0 * l_full))
    return SolverParams(
        eta=eta,
        gamma=gamma,
        prob=gamma,
        batch=batch,
        max_iters=max_iters,
        op_budget=op_budget,
        seed=seed,
        warnings=tuple(warnings),
    )


def make_minimization_problem(
    component_grads: Sequence[Callable[[np.ndarray], np.ndarray]],
    g: ProxFriendlyFunction,
    dim: int,
    lipschitz: Optional[LipschitzData] = None,
) -> FiniteSumProblem:
    """Reduce regularized finite-sum minimization to a variational inequality.

    For ``min_x (1/M) sum_m f_m(x) + g(x)`` the operator is the averaged
    gradient, ``F = (1/M) sum_m grad f_m``; solutions of the resulting
    variational inequality are exactly the minimizers.
    """
    grads = list(component_grads)
    if not grads:
        raise ValueError("at least one component gradient is required")
    if dim < 1:
        raise ValueError("dim must be positive")

    def component_eval(j: int, z: np.ndarray) -> np.ndarray:
        out = np.asarray(grads[j](z), dtype=np.float64)
        if out.shape != (dim,):
            raise ValueError(
                f"gradient output shape {out.shape} does not match ({dim},)"
            )
        return out

    def full_eval(z: np.ndarray) -> np.ndarray:
        acc = component_eval(0, z).copy()
        for j in range(1, len(grads)):
            acc += component_eval(j, z)
        return acc / len(grads)

    return FiniteSumProblem(
        dim=dim,
        num_components=len(grads),
        component_eval=component_eval,
        full_eval=full_eval,
        prox=g,
        lipschitz=lipschitz,
    )


def make_saddle_problem(
    grad_x: Callable[[np.ndarray, np.ndarray], np.ndarray],
    grad_y: Callable[[np.ndarray, np.ndarray], np.ndarray],
    g1: ProxFriendlyFunction,
    g2: ProxFriendlyFunction,
    dim_x: int,
    dim_y: int,
    lipschitz: Optional[LipschitzData] = None,
) -> FiniteSumProblem:
    """Reduce a convex-concave saddle problem to a variational inequality.

    Stacks the gradients into ``F(x, y) = (grad_x f, -grad_y f)`` and takes
    ``g(x, y) = g1(x) + g2(y)`` with the blockwise product prox.  The
    resulting instance has a single component (``num_components = 1``).
    """
    if dim_x < 1 or dim_y < 1:
        raise ValueError("block dimensions must be positive")
    dim = dim_x + dim_y

    def full_eval(z: np.ndarray) -> np.ndarray:
        x, y = z[:dim_x], z[dim_x:]
        gx = np.asarray(grad_x(x, y), dtype=np.float64)
        gy = np.asarray(grad_y(x, y), dtype=np.float64)
        if gx.shape != (dim_x,) or gy.shape != (dim_y,):
            raise ValueError(
                f"gradient output shapes {gx.shape}, {gy.shape} do not match "
                f"declared block dims ({dim_x},), ({dim_y},)"
            )
        return np.concatenate([gx, -gy])

    def prox_map(alpha: float, v: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [g1.prox_map(alpha, v[:dim_x]), g2.prox_map(alpha, v[dim_x:])]
        )

    prox = ProxFriendlyFunction(
        prox_map=prox_map,
        value=lambda z: g1.value(z[:dim_x]) + g2.value(z[dim_x:]),
        domain_test=lambda z: g1.domain_test(z[:dim_x]) and g2.domain_test(z[dim_x:]),
    )
    return FiniteSumProblem(
        dim=dim,
        num_components=1,
        component_eval=lambda j, z: full_eval(z),
        full_eval=full_eval,
        prox=prox,
        lipschitz=lipschitz,
    )


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            status = "ok  " if c.passed else "FAIL"
            detail = f" ({c.detail})" if c.detail else ""
            lines.append(f"{status} {c.name}: worst {c.worst:.3e}{detail}")
        lines.append("all checks passed" if self.passed else "verification FAILED")
        return "\n".join(lines)


def verify_problem(
    problem: FiniteSumProblem,
    probes: int = 20,
    rng_seed: int = 0,
) -> VerificationReport:
    """Probe-based consistency checks of a problem instance.

    Samples probe points in the domain (Gaussian draws mapped through the
    prox), then checks on random points and pairs:

    * mean consistency: ``full_eval`` equals the average of all components
      (relative error <= 1e-10);
    * declared per-component Lipschitz constants are not exceeded;
    * monotonicity of the averaged operator.

    Random-probe checks can miss violations but never report false ones.
    """
    if probes < 1:
        raise ValueError("probes must be >= 1")
    stream = SplitMix64(rng_seed)
    points = []
    for _ in range(probes):
        raw = stream.normals(problem.dim)
        points.append(problem.prox.prox_map(1.0, raw))

    report = VerificationReport()

    worst_mean = 0.0
    for z in points:
        full = problem.full_eval(z)
        mean = problem.component_mean(z)
        err = float(np.linalg.norm(full - mean) / max(np.linalg.norm(full), 1e-300))
        worst_mean = max(worst_mean, err)
    report.checks.append(
        CheckResult("mean-consistency", worst_mean <= 1e-10, worst_mean,
                    "relative error of full_eval vs component average")
    )

    pairs = [(points[i], points[(i + 1) % len(points)]) for i in range(len(points))]
    if len(points) == 1:
        second = problem.prox.prox_map(1.0, stream.normals(problem.dim))
        pairs = [(points[0], second)]

    if problem.lipschitz is not None:
        worst_excess = 0.0
        worst_component = -1
        for u, v in pairs:
            dist = float(np.linalg.norm(u - v))
            if dist == 0.0:
                continue
            for j in range(problem.num_components):
                lj = problem.lipschitz.per_component[j]
                ratio = float(np.linalg.norm(problem.component_eval(j, u)
                                             - problem.component_eval(j, v))) / dist
                excess = ratio - lj * (1.0 + 1e-8)
                if excess > worst_excess:
                    worst_excess = excess
                    worst_component = j
        report.checks.append(
            CheckResult("component-lipschitz", worst_excess <= 0.0, worst_excess,
                        f"largest excess over declared constant (component {worst_component})"
                        if worst_component >= 0 else "no violation found")
        )

    worst_mono = 0.0
    for u, v in pairs:
        inner = float(np.dot(problem.full_eval(u) - problem.full_eval(v), u - v))
        violation = -inner
        worst_mono = max(worst_mono, violation)
    report.checks.append(
        CheckResult("monotonicity", worst_mono <= 1e-10, worst_mono,
                    "largest negative <F(u)-F(v), u-v>")
    )
    return report
