"""Bilinear matrix games as finite-sum variational inequalities.

A zero-sum game ``min_x max_y x^T A y`` over a product of unit simplices
has the stacked operator ``F(x, y) = (A y, -A^T x)``.  Rewriting ``A`` as a
sum over paired column/row slices gives the finite-sum decomposition used
by the stochastic solvers: component ``j`` reads one column and one row,

    F_j(x, y) = d * (A[:, j] * y[j],  -x[j] * A[j, :]),

so the average of all ``d`` components reproduces the full operator and one
component evaluation costs ``1/d`` of a matvec pair.

Also here: seeded matrix generators, a text serialization format, exact
2x2 equilibria (a test oracle), and Lipschitz-constant estimation.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .core import FiniteSumProblem, LipschitzData
from .prox import SimplexDomain, simplex_product_function
from .rng import SplitMix64

GENERATOR_KINDS = ("policeman_burglar", "uniform_grid", "seeded_gaussian")


class MatrixFormatError(ValueError):
    """Malformed matrix file; carries 1-based line and column positions."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class PowerIterationError(RuntimeError):
    """Spectral norm estimation failed to converge; best estimate attached."""

    def __init__(self, message: str, best_estimate: float):
        super().__init__(message)
        self.best_estimate = best_estimate


def spectral_norm(A: np.ndarray, tol: float = 1e-8, max_iters: int = 10_000,
                  seed: int = 0x5EED) -> float:
    """Largest singular value via power iteration on ``A^T A``.

    Deterministic: the start vector comes from the seeded library stream.
    Raises :class:`PowerIterationError` when successive estimates fail to
    stabilize within ``tol`` (relative) after ``max_iters`` rounds.
    """
    A = np.asarray(A, dtype=np.float64)
    if not np.isfinite(A).all():
        raise ValueError("matrix must be finite")
    if not A.any():
        return 0.0
    d = A.shape[1]
    stream = SplitMix64(seed)
    v = stream.normals(d)
    v /= np.linalg.norm(v)
    sigma_prev = 0.0
    for _ in range(max_iters):
        u = A @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            # start vector sits in the nullspace; perturb and retry
            v = stream.normals(d)
            v /= np.linalg.norm(v)
            continue
        w = A.T @ u
        nw = np.linalg.norm(w)
        sigma = nw / nu
        v = w / nw
        if abs(sigma - sigma_prev) <= tol * max(sigma, 1.0):
            return float(sigma)
        sigma_prev = sigma
    raise PowerIterationError(
        f"power iteration did not converge within {max_iters} iterations",
        best_estimate=float(sigma_prev),
    )


class MatrixGame:
    """Immutable bilinear game instance over simplex x simplex.

    Holds the payoff matrix in row-major order plus a contiguous transpose
    copy (fast column reads for the component oracle) and cached row/column
    norms.  Component indices are 0-based.
    """

    def __init__(self, A: np.ndarray):
        A = np.array(A, dtype=np.float64, order="C", copy=True)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("payoff matrix must be square")
        if A.shape[0] < 1:
            raise ValueError("payoff matrix must be at least 1x1")
        if not np.isfinite(A).all():
            raise ValueError("payoff matrix must be finite")
        self._A = A
        self._AT = np.ascontiguousarray(A.T)
        self._col_norms = np.linalg.norm(A, axis=0)
        self._row_norms = np.linalg.norm(A, axis=1)
        for arr in (self._A, self._AT, self._col_norms, self._row_norms):
            arr.setflags(write=False)
        self._lipschitz: LipschitzData | None = None

    @property
    def matrix(self) -> np.ndarray:
        return self._A

    @property
    def matrix_t(self) -> np.ndarray:
        return self._AT

    @property
    def dim(self) -> int:
        return self._A.shape[0]

    @property
    def num_components(self) -> int:
        return self._A.shape[0]

    @property
    def column_norms(self) -> np.ndarray:
        return self._col_norms

    @property
    def row_norms(self) -> np.ndarray:
        return self._row_norms

    def full_operator(self, z: np.ndarray) -> np.ndarray:
        """F(x, y) = (A y, -A^T x); one matvec-equivalent operation."""
        d = self.dim
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (2 * d,):
            raise ValueError(f"point must have dimension {2 * d}")
        return np.concatenate([self._A @ z[d:], -(self._AT @ z[:d])])

    def component_operator(self, j: int, z: np.ndarray) -> np.ndarray:
        """Component j: scaled column/row pair, 1/d of a matvec pair."""
        d = self.dim
        if not 0 <= j < d:
            raise IndexError(f"component index {j} out of range [0, {d})")
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (2 * d,):
            raise ValueError(f"point must have dimension {2 * d}")
        out = np.empty(2 * d, dtype=np.float64)
        out[:d] = (d * z[d + j]) * self._AT[j]
        out[d:] = (-d * z[j]) * self._A[j]
        return out

    @property
    def lipschitz(self) -> LipschitzData:
        if self._lipschitz is None:
            self._lipschitz = component_lipschitz(self)
        return self._lipschitz

    def digest(self) -> str:
        """64-bit content hash (SHA-256 truncated) of dims + raw entries."""
        h = hashlib.sha256()
        h.update(f"{self.dim} {self.dim}\n".encode())
        h.update(self._A.tobytes())
        return h.digest()[:8].hex()

    def problem(self) -> FiniteSumProblem:
        """View this game as a generic finite-sum problem instance."""
        d = self.dim
        prox = simplex_product_function([SimplexDomain(d), SimplexDomain(d)])
        return FiniteSumProblem(
            dim=2 * d,
            num_components=d,
            component_eval=self.component_operator,
            full_eval=self.full_operator,
            prox=prox,
            lipschitz=self.lipschitz,
            game=self,
        )


def component_lipschitz(game: MatrixGame) -> LipschitzData:
    """Valid Lipschitz constants for the paired column/row decomposition.

    Component j moves only through column j (x-block) and row j (y-block),
    so ``L_j = d * max(||A[:, j]||, ||A[j, :]||)`` is a true upper bound.
    The full operator's constant is the spectral norm of A.
    """
    d = game.dim
    per = tuple(
        d * max(float(game.column_norms[j]), float(game.row_norms[j]))
        for j in range(d)
    )
    return LipschitzData.from_components(spectral_norm(game.matrix), per)


@dataclass(frozen=True)
class GeneratorSpec:
    """Deterministic matrix generator: same spec, bitwise-identical matrix."""

    kind: str
    dim: int
    seed: int = 0
    theta: float = 0.8

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; "
                             f"choose from {GENERATOR_KINDS}")
        if self.dim < 2:
            raise ValueError("generated games need dim >= 2")
        if self.kind == "policeman_burglar" and not self.theta > 0:
            raise ValueError("theta must be positive")


def generate_matrix(spec: GeneratorSpec) -> np.ndarray:
    """Generate the payoff matrix for a :class:`GeneratorSpec`.

    * ``policeman_burglar``: ``A[i, j] = w_i * (1 - exp(-theta * |i - j|))``
      with ``w = |z|``, ``z`` standard normal from the seeded stream.
    * ``uniform_grid``: ``A[i, j] = (i + j + 1) / (2 d - 1)`` (0-based
      ``i, j``); deterministic, the seed is ignored.
    * ``seeded_gaussian``: i.i.d. standard normal entries, row-major fill.
    """
    d = spec.dim
    if spec.kind == "uniform_grid":
        i = np.arange(d, dtype=np.float64)
        return (i[:, None] + i[None, :] + 1.0) / (2.0 * d - 1.0)
    stream = SplitMix64(spec.seed)
    if spec.kind == "seeded_gaussian":
        return stream.normals(d * d).reshape(d, d)
    w = np.abs(stream.normals(d))
    i = np.arange(d, dtype=np.float64)
    dist = np.abs(i[:, None] - i[None, :])
    return w[:, None] * (1.0 - np.exp(-spec.theta * dist))


def make_game(spec: GeneratorSpec) -> MatrixGame:
    return MatrixGame(generate_matrix(spec))


def save_matrix(A: np.ndarray, path) -> None:
    """Write a matrix in the plain-text exchange format.

    First line ``d d``, then d rows of d floats separated by single spaces,
    printed with 17 significant digits so values round-trip bit-exactly.
    Lines starting with ``#`` are comments on input.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("expected a matrix")
    if not np.isfinite(A).all():
        raise ValueError("refusing to serialize non-finite entries")
    rows, cols = A.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{rows} {cols}\n")
        for r in range(rows):
            fh.write(" ".join(f"{v:.17g}" for v in A[r]))
            fh.write("\n")


def load_matrix(path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix`."""
    with open(path, "r", encoding="ascii") as fh:
        raw_lines = fh.readlines()

    lines: list[tuple[int, str]] = []
    for lineno, text in enumerate(raw_lines, start=1):
        stripped = text.strip()
        if not stripped or stripped.startswith("#"):
            continue
        lines.append((lineno, stripped))

    if not lines:
        raise MatrixFormatError("empty matrix file", line=1)

    header_line, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise MatrixFormatError("header must be 'rows cols'", line=header_line)
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise MatrixFormatError("header must contain two integers",
                                line=header_line) from None
    if rows < 1 or cols < 1:
        raise MatrixFormatError("dimensions must be positive", line=header_line)

    body = lines[1:]
    if len(body) != rows:
        raise MatrixFormatError(
            f"header declares {rows} rows but file contains {len(body)}",
            line=header_line,
        )
    A = np.empty((rows, cols), dtype=np.float64)
    for r, (lineno, text) in enumerate(body):
        tokens = text.split(" ")
        if len(tokens) != cols:
            raise MatrixFormatError(
                f"expected {cols} values, found {len(tokens)}", line=lineno
            )
        col_pos = 1
        for c, tok in enumerate(tokens):
            try:
                val = float(tok)
            except ValueError:
                raise MatrixFormatError(f"bad float token {tok!r}",
                                        line=lineno, column=col_pos) from None
            if not math.isfinite(val):
                raise MatrixFormatError(f"non-finite token {tok!r}",
                                        line=lineno, column=col_pos)
            A[r, c] = val
            col_pos += len(tok) + 1
    return A


def exact_small_game_solution(A: np.ndarray):
    """Closed-form equilibrium of a 2x2 zero-sum game (test oracle).

    Scans for a pure saddle (entry minimal in its column, maximal in its
    row); otherwise applies the standard mixed-strategy formula.  Returns
    ``(x_star, y_star, value)`` for the minimizing row player ``x``.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (2, 2):
        raise ValueError("exact solution implemented for 2x2 games only")
    for i in range(2):
        for j in range(2):
            if A[i, j] == A[i].max() and A[i, j] == A[:, j].min():
                x = np.zeros(2)
                y = np.zeros(2)
                x[i] = 1.0
                y[j] = 1.0
                return x, y, float(A[i, j])
    a, b = A[0]
    c, d = A[1]
    denom = a - b - c + d
    p = (d - c) / denom
    q = (d - b) / denom
    x = np.array([p, 1.0 - p])
    y = np.array([q, 1.0 - q])
    value = (a * d - b * c) / denom
    return x, y, float(value)
