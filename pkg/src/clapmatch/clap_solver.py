"""Concave-linear matcher: alternates a sign-matrix linearization of the L1
structure term with log-domain Sinkhorn scaling, then discretizes with the
Hungarian algorithm.

The relaxed objective being maximized is

    sum_ij P_ij U_ij  +  lam * sum_kl |(H_A^T P H_B)_kl|  +  epsilon * h(P)

over row-stochastic P with column sums at most one, where h(P) is the entropy
-sum P log P. For a fixed sign matrix S = sign(H_A^T P H_B) the objective is
linear plus entropy, hence strictly concave, and its maximizer under the
marginal constraints is exactly the entropic-transport coupling of the score
matrix U + lam * H_A S H_B^T, which Sinkhorn iteration computes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError
from .graph_model import (
    EdgeAttributeMatrix,
    GraphSide,
    HardAssignment,
    NodeSimilarityMatrix,
    build_adjacency_attributes,
    build_inner_product_attributes,
    build_length_attributes,
    node_similarity,
)
from .psd_transform import DEFAULT_EIG_TOL, FactoredStructure, prepare_structure

# |x| at or below this fraction of max|H_A^T P H_B| counts as the kink of the
# absolute value; its subgradient is taken as 0 to avoid sign chatter
SIGN_DEAD_ZONE = 1e-12


@dataclass(frozen=True)
class SolverParams:
    """Weights and stopping rules for :func:`solve`.

    The defaults run the plain fixed-temperature solve. Two optional
    sharpening stages exist for workloads that need the discrete result to
    sit close to the global maximum of the linear objective (the relaxation
    is only concave per sign region, so the plain path can settle on a
    nearby region): ``epsilon_start`` anneals the entropy weight down to
    ``epsilon`` over geometric levels, and ``refine`` polishes the rounded
    assignment with swap, 3-cycle, and re-linearized assignment moves.
    """

    lam: float = 0.1
    epsilon: float = 1.0
    sinkhorn_max_iters: int = 1000
    sinkhorn_tol: float = 1e-6
    outer_max_iters: int = 50
    outer_tol: float = 1e-5
    epsilon_start: float | None = None
    anneal_factor: float = 0.5
    refine: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise InvalidInputError(f"structure weight must be >= 0, got {self.lam}")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise InvalidInputError(f"entropy weight must be > 0, got {self.epsilon}")
        if self.sinkhorn_tol <= 0 or self.outer_tol <= 0:
            raise InvalidInputError("tolerances must be > 0")
        if self.sinkhorn_max_iters < 1 or self.outer_max_iters < 1:
            raise InvalidInputError("iteration caps must be >= 1")
        if self.epsilon_start is not None and self.epsilon_start < self.epsilon:
            raise InvalidInputError("epsilon_start must be >= epsilon")
        if not 0.0 < self.anneal_factor < 1.0:
            raise InvalidInputError("anneal_factor must be in (0, 1)")

    @property
    def epsilon_levels(self) -> tuple[float, ...]:
        if self.epsilon_start is None:
            return (self.epsilon,)
        levels = [self.epsilon_start]
        while levels[-1] > self.epsilon:
            levels.append(max(levels[-1] * self.anneal_factor, self.epsilon))
        return tuple(levels)


@dataclass(frozen=True)
class SoftAssignment:
    """Strictly positive relaxed assignment, possibly with dummy rows
    appended to square a rectangular problem."""

    values: np.ndarray
    rows: int
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        if vals.ndim != 2:
            raise InvalidInputError(f"soft assignment must be 2D, got {vals.shape}")
        if not np.isfinite(vals).all() or np.any(vals <= 0):
            raise InvalidInputError("soft assignment entries must be finite and > 0")
        if not 1 <= self.rows <= vals.shape[0]:
            raise InvalidInputError(f"real row count {self.rows} out of range")
        object.__setattr__(self, "values", vals)

    @property
    def padded(self) -> bool:
        return self.rows < self.values.shape[0]

    @property
    def real(self) -> np.ndarray:
        """The assignment without dummy padding rows."""
        return self.values[:self.rows]


@dataclass(frozen=True)
class MatchProblem:
    """A pair of graphs with node similarity, optional edge attributes and
    their factored structure, and optional ground truth."""

    a: GraphSide
    b: GraphSide
    u: NodeSimilarityMatrix
    d_a: EdgeAttributeMatrix | None = None
    d_b: EdgeAttributeMatrix | None = None
    structure: FactoredStructure | None = None
    truth: HardAssignment | None = None

    def __post_init__(self):
        if self.u.shape != (self.a.size, self.b.size):
            raise InvalidInputError(
                f"similarity shape {self.u.shape} does not match sides "
                f"({self.a.size}, {self.b.size})")
        if self.truth is not None and self.truth.shape != self.u.shape:
            raise InvalidInputError("ground truth shape does not match problem")
        if self.d_a is not None and self.d_a.size != self.a.size:
            raise InvalidInputError("d_a size does not match side a")
        if self.d_b is not None and self.d_b.size != self.b.size:
            raise InvalidInputError("d_b size does not match side b")

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def m(self) -> int:
        return self.b.size


@dataclass(frozen=True)
class MatchResult:
    hard: HardAssignment
    soft: SoftAssignment
    objective_trace: tuple[float, ...]
    outer_iters: int
    sinkhorn_iters_total: int
    wall_time_ms: float
    converged: bool


def _attribute_matrix(side: GraphSide, attribute: str, normalize: bool) -> EdgeAttributeMatrix:
    if side.size < 2:
        # a single node has no edges; all attribute kinds degenerate to [[0]]
        return EdgeAttributeMatrix(np.zeros((side.size, side.size)), attribute)
    if attribute == "length":
        return build_length_attributes(side.points, normalize=normalize)
    if attribute == "adjacency":
        return build_adjacency_attributes(side.points)
    if attribute == "inner_product":
        return build_inner_product_attributes(side.descriptors)
    raise InvalidInputError(f"unknown attribute kind {attribute!r}")


def with_attributes(problem: MatchProblem, attribute: str, *, normalize: bool = True,
                    tol: float = DEFAULT_EIG_TOL) -> MatchProblem:
    """Return a copy of the problem with edge attributes built and factored."""
    d_a = _attribute_matrix(problem.a, attribute, normalize)
    d_b = _attribute_matrix(problem.b, attribute, normalize)
    return replace(problem, d_a=d_a, d_b=d_b, structure=prepare_structure(d_a, d_b, tol))


def build_problem(a: GraphSide, b: GraphSide, *, attribute: str | None = None,
                  normalize: bool = True, scale: float = 1.0,
                  truth: HardAssignment | None = None,
                  tol: float = DEFAULT_EIG_TOL) -> MatchProblem:
    """Assemble a matching problem from two graph sides.

    When ``attribute`` is given the edge matrices and their PSD factors are
    built immediately; otherwise they can be added later with
    :func:`with_attributes`.
    """
    problem = MatchProblem(a=a, b=b, u=node_similarity(a, b, scale), truth=truth)
    if attribute is not None:
        problem = with_attributes(problem, attribute, normalize=normalize, tol=tol)
    return problem


def _soft_values(p) -> np.ndarray:
    return p.real if isinstance(p, SoftAssignment) else np.asarray(p, dtype=float)


def _similarity_values(u) -> np.ndarray:
    return u.values if isinstance(u, NodeSimilarityMatrix) else np.asarray(u, dtype=float)


def sign_matrix(h_a: np.ndarray, p, h_b: np.ndarray) -> np.ndarray:
    """Entrywise sign of H_A^T P H_B with a relative dead zone at the kink."""
    t = h_a.T @ _soft_values(p) @ h_b
    s = np.sign(t)
    s[np.abs(t) <= SIGN_DEAD_ZONE * np.abs(t).max(initial=0.0)] = 0.0
    return s


def score_matrix(u, h_a: np.ndarray, s: np.ndarray, h_b: np.ndarray, lam: float) -> np.ndarray:
    """Linearized per-match scores: U + lam * H_A S H_B^T."""
    return _similarity_values(u) + lam * (h_a @ s @ h_b.T)


def _logsumexp_rows(x: np.ndarray) -> np.ndarray:
    peak = x.max(axis=1)
    return peak + np.log(np.exp(x - peak[:, None]).sum(axis=1))


def sinkhorn_log(m, epsilon: float, max_iters: int = 1000, tol: float = 1e-6) -> SoftAssignment:
    """Entropic coupling of a square score matrix with unit marginals.

    Dual potentials are updated in the log domain with log-sum-exp row and
    column normalizations, which keeps the iteration stable for any score
    magnitude. Stops when both marginal errors drop below ``tol`` in the max
    norm; hitting the iteration cap returns the current iterate flagged as
    non-converged rather than raising.
    """
    scores = np.asarray(m, dtype=float)
    if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
        raise InvalidInputError(
            f"score matrix must be square (pad rectangular problems), got {scores.shape}")
    if not np.isfinite(scores).all():
        raise InvalidInputError("score matrix entries must be finite")
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise InvalidInputError(f"entropy weight must be > 0, got {epsilon}")

    log_kernel = scores / epsilon
    n = scores.shape[0]
    f = np.zeros(n)
    g = np.zeros(n)
    p = np.full((n, n), 1.0 / n)
    iterations = 0
    converged = False
    for it in range(max_iters):
        f = -_logsumexp_rows(log_kernel + g[None, :])
        g = -_logsumexp_rows((log_kernel + f[:, None]).T)
        # floor at the smallest normal double so entries stay strictly positive
        p = np.maximum(np.exp(log_kernel + f[:, None] + g[None, :]),
                       np.finfo(float).tiny)
        err = max(np.abs(p.sum(axis=1) - 1.0).max(), np.abs(p.sum(axis=0) - 1.0).max())
        iterations = it + 1
        if err <= tol:
            converged = True
            break
    return SoftAssignment(p, rows=n, converged=converged, iterations=iterations)


def objective_value(p, u, h_a: np.ndarray, h_b: np.ndarray,
                    lam: float, epsilon: float) -> float:
    """Value of the entropy-regularized linear objective at a strictly
    positive relaxed assignment."""
    p_vals = _soft_values(p)
    if np.any(p_vals <= 0):
        raise InvalidInputError(
            "objective needs strictly positive entries; evaluate discrete assignments "
            "with baselines.evaluate instead")
    u_vals = _similarity_values(u)
    unary = float(np.sum(p_vals * u_vals))
    structure = float(np.abs(h_a.T @ p_vals @ h_b).sum())
    entropy = float(-np.sum(p_vals * np.log(p_vals)))
    return unary + lam * structure + epsilon * entropy


def hungarian(p) -> HardAssignment:
    """Discrete assignment maximizing the total soft score, one column per
    row, dummy padding stripped. Ties resolve to the lowest column index."""
    p_vals = _soft_values(p)
    if not np.isfinite(p_vals).all():
        raise InvalidInputError("soft assignment must be finite")
    n, m = p_vals.shape
    if n > m:
        raise InvalidInputError(f"cannot assign {n} rows into {m} columns")
    _, cols = linear_sum_assignment(p_vals, maximize=True)
    return HardAssignment.from_cols(cols, m)


def _pad_rows(scores: np.ndarray, m: int) -> np.ndarray:
    n = scores.shape[0]
    if n == m:
        return scores
    return np.vstack([scores, np.zeros((m - n, m))])


def _linear_objective_of_cols(cols, u_vals, h_a, h_b, lam: float) -> float:
    rows = np.arange(len(cols))
    structure = float(np.abs(h_a.T @ h_b[list(cols)]).sum())
    return float(u_vals[rows, list(cols)].sum()) + lam * structure


def _refine_assignment(cols, u_vals, h_a, h_b, lam: float) -> list[int]:
    """Hill-climb the discrete linear objective from a rounded assignment.

    Moves: re-linearize the structure term at the current point and take the
    resulting assignment, swap two rows' columns, move a row to an unused
    column, rotate three rows' columns. Runs to a local maximum.
    """
    cols = list(cols)
    n, m = len(cols), u_vals.shape[1]
    best = _linear_objective_of_cols(cols, u_vals, h_a, h_b, lam)

    def candidates():
        p = np.zeros((n, m))
        p[np.arange(n), cols] = 1.0
        scores = score_matrix(u_vals, h_a, sign_matrix(h_a, p, h_b), h_b, lam)
        _, lp_cols = linear_sum_assignment(scores, maximize=True)
        yield list(lp_cols)
        for i in range(n):
            for j in range(i + 1, n):
                cand = cols.copy()
                cand[i], cand[j] = cand[j], cand[i]
                yield cand
        free = [c for c in range(m) if c not in set(cols)]
        for i in range(n):
            for c in free:
                cand = cols.copy()
                cand[i] = c
                yield cand
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    for a, b, c in ((j, k, i), (k, i, j)):
                        cand = cols.copy()
                        cand[i], cand[j], cand[k] = cols[a], cols[b], cols[c]
                        yield cand

    improved = True
    while improved:
        improved = False
        for cand in candidates():
            value = _linear_objective_of_cols(cand, u_vals, h_a, h_b, lam)
            if value > best + 1e-12:
                best, cols, improved = value, cand, True
                break
    return cols


def solve(problem: MatchProblem, params: SolverParams | None = None) -> MatchResult:
    """Run the alternating sign/Sinkhorn fixed point and discretize.

    Starts from the uniform coupling. Each outer iteration freezes the sign
    matrix at the current iterate, solves the resulting entropic-transport
    problem to optimality, and repeats until the iterate stalls, a sign
    pattern repeats (guarding against two-cycles), or the cap is reached.
    With ``epsilon_start`` set, the whole alternation runs once per entropy
    level from warm to cold, carrying the coupling across levels; with
    ``refine`` set, the rounded assignment is hill-climbed on the discrete
    linear objective before being returned.
    """
    if params is None:
        params = SolverParams()
    if problem.structure is None:
        raise InvalidInputError(
            "problem carries no factored structure; build it with with_attributes")
    n, m = problem.n, problem.m
    if n > m:
        raise InvalidInputError(f"need n <= m, got n={n}, m={m}")

    h_a, h_b = problem.structure.h_a, problem.structure.h_b
    u_vals = problem.u.values
    start = time.perf_counter()

    p = np.full((n, m), 1.0 / m)
    soft = None
    trace: list[float] = []
    sinkhorn_total = 0
    outer_total = 0
    converged = False
    for epsilon in params.epsilon_levels:
        seen_signs: set[bytes] = set()
        converged = False
        for _ in range(params.outer_max_iters):
            s = sign_matrix(h_a, p, h_b)
            key = s.tobytes()
            if key in seen_signs:
                # the subproblem for this sign pattern was already solved; the
                # iterate is a fixed point (or a cycle, for which it is the
                # best response), so stop
                converged = True
                break
            seen_signs.add(key)
            scores = score_matrix(u_vals, h_a, s, h_b, params.lam)
            inner = sinkhorn_log(_pad_rows(scores, m), epsilon,
                                 params.sinkhorn_max_iters, params.sinkhorn_tol)
            sinkhorn_total += inner.iterations
            outer_total += 1
            p_new = inner.values[:n]
            soft = SoftAssignment(inner.values, rows=n, converged=inner.converged,
                                  iterations=inner.iterations)
            trace.append(objective_value(p_new, u_vals, h_a, h_b, params.lam, epsilon))
            delta = float(np.abs(p_new - p).max())
            p = p_new
            if delta <= params.outer_tol:
                converged = True
                break

    hard = hungarian(soft)
    if params.refine:
        cols = _refine_assignment([j for _, j in hard.pairs], u_vals, h_a, h_b, params.lam)
        hard = HardAssignment.from_cols(cols, m)
    wall_ms = (time.perf_counter() - start) * 1000.0
    return MatchResult(hard=hard, soft=soft, objective_trace=tuple(trace),
                       outer_iters=outer_total, sinkhorn_iters_total=sinkhorn_total,
                       wall_time_ms=wall_ms, converged=converged)
