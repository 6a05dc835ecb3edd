"""Reference objectives and solvers: the quadratic matching score in its
Frobenius and trace forms, its sign-linearized L1 counterpart, a
projected-gradient relaxed solver, and an exhaustive oracle for small
instances."""

from __future__ import annotations

import enum
import itertools
import time
from dataclasses import dataclass

import numpy as np

from .clap_solver import (
    MatchProblem,
    MatchResult,
    SoftAssignment,
    _pad_rows,
    _similarity_values,
    hungarian,
    sinkhorn_log,
)
from .errors import EnumerationSizeError, InvalidInputError
from .graph_model import HardAssignment
from .psd_transform import row_absolute_radius

MAX_ENUM_ROWS = 8
MAX_ENUM_COLS = 9


class ObjectiveKind(enum.Enum):
    """Which structural scoring to apply on top of the unary term."""

    FROBENIUS = "frobenius"    # unary - lam * ||D_A - P D_B P^T||_F^2
    TRACE = "trace"            # unary + lam * tr(P^T D_A^T P D_B)
    LINEAR_L1 = "linear_l1"    # unary + lam * sum |H_A^T P H_B|

    @classmethod
    def parse(cls, name: str) -> "ObjectiveKind":
        try:
            return cls(name)
        except ValueError:
            raise InvalidInputError(f"unknown objective kind {name!r}") from None


def _assignment_values(p) -> np.ndarray:
    if isinstance(p, HardAssignment):
        return p.values
    if isinstance(p, SoftAssignment):
        return p.real
    return np.asarray(p, dtype=float)


def evaluate(kind: ObjectiveKind, p, u, lam: float, *, d_a=None, d_b=None,
             h_a=None, h_b=None) -> float:
    """Exact objective value of an assignment (hard or relaxed).

    Frobenius and trace forms take the raw or shifted edge matrices as the
    caller supplies them; the L1 form takes the PSD factors.
    """
    p_vals = _assignment_values(p)
    u_vals = _similarity_values(u)
    if p_vals.shape != u_vals.shape:
        raise InvalidInputError(
            f"assignment shape {p_vals.shape} does not match similarity {u_vals.shape}")
    unary = float(np.sum(p_vals * u_vals))
    try:
        if kind is ObjectiveKind.FROBENIUS:
            if d_a is None or d_b is None:
                raise InvalidInputError("frobenius objective needs d_a and d_b")
            da, db = _edge_values(d_a), _edge_values(d_b)
            return unary - lam * float(np.linalg.norm(da - p_vals @ db @ p_vals.T) ** 2)
        if kind is ObjectiveKind.TRACE:
            if d_a is None or d_b is None:
                raise InvalidInputError("trace objective needs d_a and d_b")
            da, db = _edge_values(d_a), _edge_values(d_b)
            return unary + lam * float(np.trace(p_vals.T @ da.T @ p_vals @ db))
        if kind is ObjectiveKind.LINEAR_L1:
            if h_a is None or h_b is None:
                raise InvalidInputError("linear_l1 objective needs h_a and h_b")
            return unary + lam * float(np.abs(np.asarray(h_a).T @ p_vals @ np.asarray(h_b)).sum())
    except ValueError as exc:
        raise InvalidInputError(f"dimension mismatch: {exc}") from exc
    raise InvalidInputError(f"unknown objective kind {kind!r}")


def _edge_values(d) -> np.ndarray:
    values = getattr(d, "values", d)
    return np.asarray(values, dtype=float)


def brute_force(u, lam: float, kind: ObjectiveKind, *, d_a=None, d_b=None,
                h_a=None, h_b=None) -> tuple[HardAssignment, float]:
    """Global maximizer of the given objective over every injective
    assignment, ties broken toward the lexicographically first one.

    Refuses instances above 8 rows or 9 columns; the enumeration is factorial.
    """
    u_vals = _similarity_values(u)
    n, m = u_vals.shape
    if n > m:
        raise InvalidInputError(f"need n <= m for injective assignments, got {n} > {m}")
    if n > MAX_ENUM_ROWS or m > MAX_ENUM_COLS:
        raise EnumerationSizeError(
            f"instance {n}x{m} exceeds the enumeration bound "
            f"{MAX_ENUM_ROWS}x{MAX_ENUM_COLS}")
    best_cols = None
    best_value = -np.inf
    for cols in itertools.permutations(range(m), n):
        p = np.zeros((n, m))
        p[np.arange(n), cols] = 1.0
        value = evaluate(kind, p, u_vals, lam, d_a=d_a, d_b=d_b, h_a=h_a, h_b=h_b)
        if value > best_value:
            best_value = value
            best_cols = cols
    return HardAssignment.from_cols(best_cols, m), float(best_value)


@dataclass(frozen=True)
class PgdParams:
    """Step size and budget for the projected-gradient baseline.

    A step size of None picks 1 / (2 * lam * d_max^2 + 1) from the problem
    scale. The solver runs its full iteration budget by default; set
    ``stop_tol`` > 0 to stop early once the iterate stalls.
    """

    lam: float = 0.1
    iters: int = 100
    step_size: float | None = None
    stop_tol: float = 0.0
    proj_tol: float = 1e-6
    proj_max_iters: int = 200

    def __post_init__(self):
        if self.lam < 0 or self.iters < 1:
            raise InvalidInputError("lam must be >= 0 and iters >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise InvalidInputError("step size must be > 0")
        if self.stop_tol < 0:
            raise InvalidInputError("stop tolerance must be >= 0")


def pgd_solve(problem: MatchProblem, params: PgdParams | None = None) -> MatchResult:
    """Projected gradient ascent on the quadratic trace objective over the
    relaxed feasible set.

    The iterate moves along U + 2 * lam * D_A P D_B, then is pulled back to
    the marginal polytope by Sinkhorn-normalizing its entrywise exponential
    (dummy rows pad rectangular problems). Discretization is the same
    Hungarian step the linear solver uses, which keeps the accuracy
    comparison about the objectives rather than the rounding.
    """
    if params is None:
        params = PgdParams()
    if problem.d_a is None or problem.d_b is None:
        raise InvalidInputError("problem carries no edge attributes; build them first")
    n, m = problem.n, problem.m
    if n > m:
        raise InvalidInputError(f"need n <= m, got n={n}, m={m}")

    d_a, d_b = problem.d_a.values, problem.d_b.values
    u_vals = problem.u.values
    step = params.step_size
    if step is None:
        if problem.structure is not None:
            d_max = problem.structure.d_max
        else:
            d_max = max(row_absolute_radius(d_a).max(initial=0.0),
                        row_absolute_radius(d_b).max(initial=0.0))
        step = 1.0 / (2.0 * params.lam * d_max ** 2 + 1.0)

    start = time.perf_counter()
    p = np.full((n, m), 1.0 / m)
    soft = None
    trace = []
    sinkhorn_total = 0
    converged = False
    for _ in range(params.iters):
        grad = u_vals + 2.0 * params.lam * (d_a @ p @ d_b)
        projected = sinkhorn_log(_pad_rows(p + step * grad, m), 1.0,
                                 params.proj_max_iters, params.proj_tol)
        sinkhorn_total += projected.iterations
        p_new = projected.values[:n]
        soft = SoftAssignment(projected.values, rows=n, converged=projected.converged,
                              iterations=projected.iterations)
        trace.append(float(np.sum(p_new * u_vals))
                     + params.lam * float(np.trace(p_new.T @ d_a.T @ p_new @ d_b)))
        delta = float(np.abs(p_new - p).max())
        p = p_new
        if params.stop_tol > 0 and delta <= params.stop_tol:
            converged = True
            break

    hard = hungarian(soft)
    wall_ms = (time.perf_counter() - start) * 1000.0
    return MatchResult(hard=hard, soft=soft, objective_trace=tuple(trace),
                       outer_iters=len(trace), sinkhorn_iters_total=sinkhorn_total,
                       wall_time_ms=wall_ms, converged=converged)
