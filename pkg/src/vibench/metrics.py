"""Convergence measures and operation accounting.

The cost unit is the matvec-equivalent operation: one joint evaluation of
``A y`` and ``A^T x``.  A full operator evaluation costs one unit; one
component evaluation costs ``1/M``.  For games over simplices the quality
measure is the duality gap ``max_i (A^T x)_i - min_j (A y)_j``, which equals
the sup-based merit function over the full feasible product (the supremum
of a linear form over a product of simplices sits at a vertex pair).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FiniteSumProblem
from .problems import MatrixGame
from .prox import project_simplex, prox_residual

INFEASIBILITY_TOL = 1e-8


@dataclass
class OpAccount:
    """Monotone counters of oracle work for one run."""

    num_components: int
    component_evals: int = 0
    full_evals: int = 0

    @property
    def matvec_ops(self) -> float:
        return self.component_evals / self.num_components

    def charge_components(self, count: int) -> None:
        if count < 0:
            raise ValueError("cannot uncharge work")
        self.component_evals += count

    def charge_full(self, count: int = 1) -> None:
        if count < 0:
            raise ValueError("cannot uncharge work")
        self.full_evals += count
        self.component_evals += count * self.num_components


def _feasible_blocks(game: MatrixGame, z: np.ndarray):
    """Split, validate, and (within tolerance) re-project the two blocks."""
    d = game.dim
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (2 * d,):
        raise ValueError(f"point must have dimension {2 * d}")
    if not np.isfinite(z).all():
        raise ValueError("point has non-finite entries")
    blocks = []
    for block in (z[:d], z[d:]):
        infeas = max(abs(float(block.sum()) - 1.0), max(-float(block.min()), 0.0))
        if infeas > INFEASIBILITY_TOL:
            raise ValueError(
                f"point is infeasible beyond tolerance ({infeas:.3e} > "
                f"{INFEASIBILITY_TOL:.0e}); project it first"
            )
        blocks.append(project_simplex(block) if infeas > 0.0 else block)
    return blocks


def game_duality_gap(game: MatrixGame, z: np.ndarray) -> float:
    """Duality gap of a feasible pair: ``max(A^T x) - min(A y)``.

    Nonnegative for feasible points (weak duality) and zero exactly at
    saddle points.  Points infeasible by round-off (up to 1e-8) are
    silently re-projected; worse infeasibility raises.
    """
    x, y = _feasible_blocks(game, z)
    return float(np.max(game.matrix_t @ x) - np.min(game.matrix @ y))


def gap_lower_witness(game: MatrixGame, z: np.ndarray):
    """The vertex pair attaining the gap supremum, and its value.

    Returns ``(u_star, value)`` where ``u_star`` is a stacked feasible point
    (a pair of simplex vertices) and ``value`` equals
    :func:`game_duality_gap` on ``z``.
    """
    x, y = _feasible_blocks(game, z)
    d = game.dim
    col_scores = game.matrix_t @ x   # value contribution of y-vertex e_j
    row_scores = game.matrix @ y     # value contribution of x-vertex e_i
    i_star = int(np.argmin(row_scores))
    j_star = int(np.argmax(col_scores))
    u_star = np.zeros(2 * d, dtype=np.float64)
    u_star[i_star] = 1.0
    u_star[d + j_star] = 1.0
    return u_star, float(col_scores[j_star] - row_scores[i_star])


def residual_metric(problem: FiniteSumProblem, z: np.ndarray, eta: float) -> float:
    """Prox fixed-point residual; the gap substitute for non-game problems."""
    return prox_residual(problem, z, eta)


def slope_estimate(trace, window: tuple[float, float], field: str = "gap_avg") -> float:
    """Least-squares slope of log(gap) versus log(iteration) over a window.

    Uses trace rows with ``k_lo <= iter <= k_hi`` and a strictly positive
    gap; requires at least 10 such rows.
    """
    k_lo, k_hi = window
    ks = []
    gaps = []
    for row in trace.rows:
        if k_lo <= row.iteration <= k_hi:
            g = getattr(row, field)
            if g > 0 and np.isfinite(g):
                ks.append(row.iteration)
                gaps.append(g)
    if len(ks) < 10:
        raise ValueError(
            f"need at least 10 trace rows with positive {field} in "
            f"[{k_lo:g}, {k_hi:g}], found {len(ks)}"
        )
    lx = np.log(np.asarray(ks, dtype=np.float64))
    ly = np.log(np.asarray(gaps, dtype=np.float64))
    lx -= lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))
