"""Low-rank tensor decompositions: tensor train, Tucker (HOSVD), and CP-ALS.

The adaptive formats (``tt_svd``, ``hosvd``) take a relative accuracy ``eps``
and guarantee ``|t - reconstruct| <= eps * |t|`` in the Frobenius norm by
splitting the error budget equally over the truncated SVD sweeps.  CP is
fitted by alternating least squares at a user-chosen rank and reports the
accuracy it achieved instead of guaranteeing one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import store
from .tensors import frobenius_norm, guard_dense_size, unfold


@dataclass(frozen=True)
class TTDecomposition:
    """Tensor-train factors of an order-d tensor.

    ``first`` has orthonormal columns; ``last`` has mutually orthogonal
    columns whose norms carry the trailing singular values.  ``cores[i]`` has
    shape (ranks[i], dims[i+1], ranks[i+1]).
    """

    first: np.ndarray
    cores: tuple[np.ndarray, ...]
    last: np.ndarray

    @property
    def ranks(self) -> tuple[int, ...]:
        return (self.first.shape[1],) + tuple(c.shape[2] for c in self.cores)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.first.shape[0],) + tuple(c.shape[1] for c in self.cores) \
            + (self.last.shape[0],)

    @property
    def order(self) -> int:
        return len(self.cores) + 2


@dataclass(frozen=True)
class TuckerDecomposition:
    """Tucker core plus one orthonormal factor matrix per mode."""

    core: np.ndarray
    factors: tuple[np.ndarray, ...]

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.shape

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)


@dataclass(frozen=True)
class CPDecomposition:
    """Canonical polyadic factors; column norms are absorbed into the last
    factor, so reconstruction is the plain sum of rank-one terms."""

    factors: tuple[np.ndarray, ...]
    rel_error: float
    sweeps: int
    converged: bool

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)


Decomposition = TTDecomposition | TuckerDecomposition | CPDecomposition


def _kept_rank(s: np.ndarray, budget: float) -> int:
    """Smallest r with tail energy sum_{i>r} s_i^2 <= budget^2 (at least 1)."""
    tail = np.concatenate([np.cumsum((s * s)[::-1])[::-1], [0.0]])
    r = int(np.argmax(tail <= budget * budget))
    return max(r, 1)


def tt_svd(t: np.ndarray, eps: float) -> TTDecomposition:
    """Sequential truncated-SVD sweep producing a tensor train.

    Each of the order-1 unfolding SVDs is truncated with budget
    ``eps * |t| / sqrt(order - 1)``, which yields the usual relative
    eps-guarantee on reconstruction.  ``eps = 0`` keeps every singular value.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 2:
        raise ValueError("tensor train needs order >= 2")
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must be in [0, 1), got {eps}")
    dims = t.shape
    d = t.ndim
    budget = eps * frobenius_norm(t) / math.sqrt(d - 1)

    mat = t.reshape(dims[0], -1, order="F")
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    r = _kept_rank(s, budget)
    first = u[:, :r]
    rest = s[:r, None] * vt[:r]

    cores = []
    rank = r
    for k in range(1, d - 1):
        mat = rest.reshape(rank * dims[k], -1, order="F")
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        r = _kept_rank(s, budget)
        cores.append(u[:, :r].reshape(rank, dims[k], r, order="F"))
        rest = s[:r, None] * vt[:r]
        rank = r

    # rest is ranks[-1] x N; its rows are orthogonal with norms equal to the
    # trailing singular values, so columns of `last` inherit them.
    last = rest.T.copy()
    return TTDecomposition(first=first, cores=tuple(cores), last=last)


def hosvd(t: np.ndarray, eps: float) -> TuckerDecomposition:
    """Truncated higher-order SVD with per-mode budget ``eps*|t|/sqrt(order)``."""
    t = np.asarray(t, dtype=np.float64)
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must be in [0, 1), got {eps}")
    d = t.ndim
    budget = eps * frobenius_norm(t) / math.sqrt(d)
    factors = []
    for k in range(d):
        u, s, _ = np.linalg.svd(unfold(t, k), full_matrices=False)
        factors.append(u[:, :_kept_rank(s, budget)])
    core = t
    for k, f in enumerate(factors):
        core = np.moveaxis(np.tensordot(core, f, axes=(k, 0)), -1, k)
    return TuckerDecomposition(core=core, factors=tuple(factors))


def _khatri_rao(mats: list[np.ndarray]) -> np.ndarray:
    """Columnwise Kronecker stacking with the first matrix index fastest,
    matching the canonical (Fortran) unfolding column order."""
    out = mats[0]
    for m in mats[1:]:
        out = (m[:, None, :] * out[None, :, :]).reshape(-1, out.shape[1])
    return out


def cp_als(
    t: np.ndarray,
    rank: int,
    *,
    max_sweeps: int = 300,
    tol: float = 1e-9,
    seed: int = 0,
    init: str = "random",
) -> CPDecomposition:
    """Fit a rank-``rank`` CP model by alternating least squares.

    Stops when the relative-error improvement between sweeps drops below
    ``tol`` or after ``max_sweeps``.  Non-convergence is reported through the
    ``converged`` flag, not raised.  ``init`` is ``"random"`` (seeded uniform)
    or ``"hosvd"`` (leading singular vectors per mode, padded randomly).
    """
    t = np.asarray(t, dtype=np.float64)
    if rank < 1:
        raise ValueError("rank must be >= 1")
    d = t.ndim
    dims = t.shape
    norm_t = frobenius_norm(t)
    if norm_t == 0.0:
        factors = tuple(np.zeros((n, rank)) for n in dims)
        return CPDecomposition(factors, rel_error=0.0, sweeps=0, converged=True)

    rng = np.random.default_rng(seed)
    if init == "hosvd":
        factors = []
        for k in range(d):
            u = np.linalg.svd(unfold(t, k), full_matrices=False)[0]
            if u.shape[1] < rank:
                pad = rng.uniform(-1.0, 1.0, size=(dims[k], rank - u.shape[1]))
                u = np.hstack([u, pad])
            factors.append(u[:, :rank].copy())
    elif init == "random":
        factors = [rng.uniform(-1.0, 1.0, size=(n, rank)) for n in dims]
    else:
        raise ValueError(f"unknown init {init!r}")

    unfoldings = [unfold(t, k) for k in range(d)]
    grams = [f.T @ f for f in factors]

    err_prev = np.inf
    err = np.inf
    sweeps = 0
    converged = False
    for sweeps in range(1, max_sweeps + 1):
        for k in range(d):
            others = [factors[j] for j in range(d) if j != k]
            kr = _khatri_rao(others)
            gram = np.ones((rank, rank))
            for j in range(d):
                if j != k:
                    gram *= grams[j]
            mttkrp = unfoldings[k] @ kr
            factors[k] = np.linalg.lstsq(gram, mttkrp.T, rcond=None)[0].T
            grams[k] = factors[k].T @ factors[k]

        # Error from the last mode's normal-equation pieces; no dense rebuild.
        gram_all = grams[d - 1] * gram
        inner = float(np.sum(mttkrp * factors[d - 1]))
        sq = norm_t**2 - 2.0 * inner + float(np.sum(gram_all))
        err = math.sqrt(max(sq, 0.0)) / norm_t

        # Rebalance: unit columns everywhere except the last factor.
        scale = np.ones(rank)
        for k in range(d - 1):
            nrm = np.linalg.norm(factors[k], axis=0)
            nrm[nrm == 0.0] = 1.0
            factors[k] /= nrm
            scale *= nrm
        factors[d - 1] *= scale
        grams = [f.T @ f for f in factors]

        if abs(err_prev - err) < tol:
            converged = True
            break
        err_prev = err

    return CPDecomposition(tuple(np.ascontiguousarray(f) for f in factors),
                           rel_error=float(err), sweeps=sweeps, converged=converged)


def reconstruct(d: Decomposition) -> np.ndarray:
    """Expand a decomposition back to a dense tensor."""
    guard_dense_size(d.shape)
    if isinstance(d, TTDecomposition):
        out = d.first
        for core in d.cores:
            out = np.tensordot(out, core, axes=(-1, 0))
        return np.tensordot(out, d.last, axes=(-1, 1))
    if isinstance(d, TuckerDecomposition):
        out = d.core
        for k, f in enumerate(d.factors):
            out = np.moveaxis(np.tensordot(out, f, axes=(k, 1)), -1, k)
        return out
    if isinstance(d, CPDecomposition):
        kr = _khatri_rao(list(d.factors[1:]))
        return (d.factors[0] @ kr.T).reshape(d.shape, order="F")
    raise TypeError(f"not a decomposition: {type(d)!r}")


def relative_error(d: Decomposition, t: np.ndarray) -> float:
    """Frobenius distance between ``t`` and the reconstruction, over ``|t|``."""
    t = np.asarray(t, dtype=np.float64)
    if tuple(t.shape) != tuple(d.shape):
        raise ValueError(f"shape mismatch: tensor {t.shape}, decomposition {d.shape}")
    norm_t = frobenius_norm(t)
    if norm_t == 0.0:
        raise ValueError("relative error undefined for a zero tensor")
    return frobenius_norm(t - reconstruct(d)) / norm_t


_FORMAT_TAGS = {TTDecomposition: "TT", TuckerDecomposition: "TUCKER", CPDecomposition: "CP"}


def save_decomposition(path, d: Decomposition, *, eps: float | None = None) -> None:
    tag = _FORMAT_TAGS[type(d)]
    meta: dict = {"format": tag, "shape": list(d.shape)}
    blobs: dict[str, np.ndarray] = {}
    if isinstance(d, TTDecomposition):
        meta["ranks"] = list(d.ranks)
        blobs["first"] = d.first
        for i, core in enumerate(d.cores):
            blobs[f"core{i}"] = core
        blobs["last"] = d.last
    elif isinstance(d, TuckerDecomposition):
        meta["ranks"] = list(d.ranks)
        blobs["core"] = d.core
        for i, f in enumerate(d.factors):
            blobs[f"factor{i}"] = f
    else:
        meta["rank"] = d.rank
        meta["rel_error"] = d.rel_error
        meta["sweeps"] = d.sweeps
        meta["converged"] = d.converged
        for i, f in enumerate(d.factors):
            blobs[f"factor{i}"] = f
    if eps is not None:
        meta["eps"] = eps
    store.save_bundle(path, meta, blobs)


def load_decomposition(path) -> Decomposition:
    meta, blobs = store.load_bundle(path)
    tag = meta["format"]
    if tag == "TT":
        n_cores = len(meta["ranks"]) - 1
        return TTDecomposition(
            first=blobs["first"],
            cores=tuple(blobs[f"core{i}"] for i in range(n_cores)),
            last=blobs["last"],
        )
    if tag == "TUCKER":
        n = len(meta["shape"])
        return TuckerDecomposition(
            core=blobs["core"],
            factors=tuple(blobs[f"factor{i}"] for i in range(n)),
        )
    if tag == "CP":
        n = len(meta["shape"])
        return CPDecomposition(
            factors=tuple(blobs[f"factor{i}"] for i in range(n)),
            rel_error=meta["rel_error"],
            sweeps=meta["sweeps"],
            converged=meta["converged"],
        )
    raise ValueError(f"unknown decomposition tag {tag!r}")
