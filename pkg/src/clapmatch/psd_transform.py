"""Diagonal-shift PSD conversion of edge-attribute matrices and their
low-rank factorization.

Replacing both zero diagonals with the largest absolute row sum taken over
the two matrices puts every Gershgorin disc in the nonnegative half line, so
the shifted matrices are positive semi-definite and admit a factorization
D_hat = H H^T. For square problems the shift adds the same constant to the
structural trace score of every permutation, so it never changes which
assignments are optimal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotPsdError
from .graph_model import EdgeAttributeMatrix

DEFAULT_EIG_TOL = 1e-10


@dataclass(frozen=True)
class FactoredStructure:
    """Shifted edge matrices of both graphs with factors satisfying
    d_hat = h @ h.T, plus the shared diagonal value."""

    d_hat_a: np.ndarray
    d_hat_b: np.ndarray
    h_a: np.ndarray
    h_b: np.ndarray
    d_max: float

    def __post_init__(self):
        for name in ("d_hat_a", "d_hat_b", "h_a", "h_b"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.h_a.shape[0] != self.d_hat_a.shape[0]:
            raise InvalidInputError("h_a row count must match d_hat_a")
        if self.h_b.shape[0] != self.d_hat_b.shape[0]:
            raise InvalidInputError("h_b row count must match d_hat_b")
        if self.d_max < 0:
            raise InvalidInputError("shared diagonal value must be nonnegative")

    @property
    def ranks(self) -> tuple[int, int]:
        return self.h_a.shape[1], self.h_b.shape[1]


def _values(d) -> np.ndarray:
    if isinstance(d, EdgeAttributeMatrix):
        return d.values
    arr = np.asarray(d, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def row_absolute_radius(d) -> np.ndarray:
    """Per-row sum of absolute off-diagonal entries (the Gershgorin radius)."""
    vals = _values(d)
    return np.abs(vals).sum(axis=1) - np.abs(np.diagonal(vals))


def psd_shift(d_a, d_b) -> tuple[np.ndarray, np.ndarray, float]:
    """Overwrite both diagonals with the largest row radius of either matrix.

    Returns the two shifted matrices and the shared diagonal value d_max.
    Off-diagonal entries are untouched.
    """
    a, b = _values(d_a).copy(), _values(d_b).copy()
    radii = [row_absolute_radius(a), row_absolute_radius(b)]
    d_max = float(max(r.max(initial=0.0) for r in radii))
    np.fill_diagonal(a, d_max)
    np.fill_diagonal(b, d_max)
    return a, b, d_max


def factorize(d_hat, tol: float = DEFAULT_EIG_TOL) -> np.ndarray:
    """Rank-revealing factor H with H @ H.T reconstructing the PSD input.

    Uses a symmetric eigendecomposition and keeps only eigenpairs above
    tol * max|eigenvalue|; the shift typically makes the input singular
    (the Gershgorin bound is tight on the max-radius row), which rules out
    plain Cholesky and lets the factor shed rank. Eigenvalues in
    (-tol * scale, 0) are clamped to zero; anything lower raises.
    """
    vals = _values(d_hat)
    if not np.isfinite(vals).all():
        raise InvalidInputError("matrix to factorize must be finite")
    if not np.allclose(vals, vals.T, rtol=0, atol=0):
        raise InvalidInputError("matrix to factorize must be symmetric")
    if tol < 0:
        raise InvalidInputError("tolerance must be nonnegative")
    eigvals, eigvecs = np.linalg.eigh(vals)
    scale = float(np.abs(eigvals).max(initial=0.0))
    cutoff = tol * scale
    if eigvals[0] < -cutoff:
        raise NotPsdError(
            f"minimum eigenvalue {eigvals[0]:.3e} is below -{cutoff:.3e}; "
            "input was not diagonally shifted or numerics broke")
    keep = eigvals > cutoff
    return eigvecs[:, keep] * np.sqrt(eigvals[keep])


def prepare_structure(d_a: EdgeAttributeMatrix, d_b: EdgeAttributeMatrix,
                      tol: float = DEFAULT_EIG_TOL) -> FactoredStructure:
    """Shift a pair of edge-attribute matrices and factor both."""
    d_hat_a, d_hat_b, d_max = psd_shift(d_a, d_b)
    return FactoredStructure(
        d_hat_a=d_hat_a,
        d_hat_b=d_hat_b,
        h_a=factorize(d_hat_a, tol),
        h_b=factorize(d_hat_b, tol),
        d_max=d_max,
    )
