"""Greedy empirical-interpolation index selection and the associated
oblique projector / least-squares fits used for hyper-reduction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class SelectionIndices:
    """Distinct row indices picked by the greedy selection, in pick order."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        if idx.ndim != 1 or len(np.unique(idx)) != idx.size:
            raise ValueError("selection indices must be a 1-D list of distinct rows")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return int(self.indices.size)

    def matrix(self, n_rows: int) -> np.ndarray:
        """Dense selection matrix P (n_rows x len); columns are unit vectors."""
        p = np.zeros((n_rows, self.indices.size))
        p[self.indices, np.arange(self.indices.size)] = 1.0
        return p


def deim_select(basis: np.ndarray) -> SelectionIndices:
    """Greedy row selection on a column basis.

    The first index maximizes |first column|; each later index maximizes the
    residual of the next column after interpolating it at the rows already
    selected.  Ties resolve to the smallest index (argmax convention).
    Raises ``LinAlgError`` naming the offending column if the columns are
    dependent enough to make an intermediate system singular.
    """
    y = np.asarray(basis, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] > y.shape[0]:
        raise ValueError("basis must be a tall matrix (cols <= rows)")
    m, n = y.shape
    indices = np.empty(n, dtype=np.intp)
    indices[0] = int(np.argmax(np.abs(y[:, 0])))
    if y[indices[0], 0] == 0.0:
        raise np.linalg.LinAlgError("column 0 of the selection basis is zero")
    for j in range(1, n):
        sub = y[indices[:j], :j]
        try:
            coeff = scipy.linalg.lu_solve(scipy.linalg.lu_factor(sub), y[indices[:j], j])
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise np.linalg.LinAlgError(
                f"singular interpolation system at column {j}") from exc
        residual = y[:, j] - y[:, :j] @ coeff
        indices[j] = int(np.argmax(np.abs(residual)))
        if residual[indices[j]] == 0.0:
            raise np.linalg.LinAlgError(
                f"column {j} is dependent on previously selected columns")
    return SelectionIndices(indices)


def deim_apply(basis: np.ndarray, sel: SelectionIndices, f: np.ndarray) -> np.ndarray:
    """Oblique projection Y (P^T Y)^{-1} P^T f onto range(Y)."""
    y = np.asarray(basis, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    sub = y[sel.indices, :]
    return y @ np.linalg.solve(sub, f[sel.indices])


def selection_gain(basis: np.ndarray, sel: SelectionIndices) -> float:
    """Spectral norm of (P^T Y)^{-1}; the interpolation stability constant."""
    sub = np.asarray(basis)[sel.indices, :]
    smin = np.linalg.svd(sub, compute_uv=False)[-1]
    if smin == 0.0:
        raise np.linalg.LinAlgError("selected square system is singular")
    return float(1.0 / smin)


def ls_fit(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution with singular values below
    ``1e-12 * sigma_1`` treated as zero."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] < a.shape[1]:
        raise ValueError("least-squares fit expects rows >= cols")
    return np.linalg.lstsq(a, np.asarray(rhs, dtype=np.float64), rcond=1e-12)[0]
