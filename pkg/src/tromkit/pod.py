"""Conventional POD-DEIM reduced-order model, the comparison baseline.

The projection basis is the leading left singular vectors of the mode-1
unfolding of the state-snapshot tensor; the interpolation basis likewise for
the nonlinear-term snapshots.  The reduced system is marched with the same
semi-implicit BDF2 family as the full-order model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .deim import SelectionIndices, deim_select
from .stepping import (AdvectiveTerm, AffineOperator, PointwiseTerm,
                       ReducedSystem, integrate_reduced)
from .tensors import unfold_mode1


def pod_basis(snapshot_tensor: np.ndarray, count: int | None = None
              ) -> tuple[np.ndarray, np.ndarray]:
    """Left singular vectors and singular values of the mode-1 unfolding.

    Uses a Gram eigen-decomposition when there are fewer columns than rows,
    a direct SVD otherwise; both agree to working accuracy.
    """
    mat = unfold_mode1(snapshot_tensor)
    m, cols = mat.shape
    if cols < m:
        gram = mat.T @ mat
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        svals = np.sqrt(evals)
        keep = svals > 0
        u = (mat @ evecs[:, order][:, keep]) / svals[keep]
    else:
        u, svals, _ = np.linalg.svd(mat, full_matrices=False)
    if count is not None:
        if count > u.shape[1]:
            raise ValueError(f"requested {count} modes, only {u.shape[1]} available")
        u = u[:, :count]
    return u, svals


@dataclass(frozen=True)
class PodRom:
    """Offline data of the baseline ROM: bases, selection, and the
    pre-composed projection factors."""

    u_basis: np.ndarray            # M x n_u, orthonormal
    f_basis: np.ndarray            # M x n_f, orthonormal
    selection: SelectionIndices
    f_map: np.ndarray              # (U^T Y)(P^T Y)^{-1}
    u_sing_vals: np.ndarray        # full spectrum of the state unfolding
    f_sing_vals: np.ndarray
    a_terms_reduced: tuple[np.ndarray, ...] | None
    a_op: AffineOperator | None

    @property
    def dims(self) -> tuple[int, int]:
        return self.u_basis.shape[1], self.f_basis.shape[1]


def pod_offline(u_snaps: np.ndarray, f_snaps: np.ndarray, n_u: int, n_f: int,
                a_op: AffineOperator | None = None) -> PodRom:
    """Build the baseline ROM from the two snapshot tensors."""
    u_basis, u_svals = pod_basis(u_snaps)
    f_basis, f_svals = pod_basis(f_snaps)
    for name, have, want, svals in (("state", u_basis.shape[1], n_u, u_svals),
                                    ("term", f_basis.shape[1], n_f, f_svals)):
        if want > have or svals[want - 1] <= svals[0] * 1e-14:
            raise ValueError(f"{name} snapshots are rank-deficient below n={want}")
    u_basis = u_basis[:, :n_u]
    f_basis = f_basis[:, :n_f]
    sel = deim_select(f_basis)
    f_map = (u_basis.T @ f_basis) @ np.linalg.inv(f_basis[sel.indices, :])
    reduced = a_op.reduce(u_basis) if a_op is not None else None
    return PodRom(u_basis=u_basis, f_basis=f_basis, selection=sel, f_map=f_map,
                  u_sing_vals=u_svals, f_sing_vals=f_svals,
                  a_terms_reduced=reduced, a_op=a_op)


def pod_reduced_system(rom: PodRom, alpha, term) -> ReducedSystem:
    if rom.a_terms_reduced is None:
        raise ValueError("offline stage was built without an operator")
    a_red = rom.a_op.assemble_reduced(rom.a_terms_reduced, alpha)
    rows = rom.selection.indices
    sel_state = rom.u_basis[rows, :]
    sel_grad = None
    if isinstance(term, AdvectiveTerm):
        sel_grad = term.grad[rows, :] @ rom.u_basis
    return ReducedSystem(a_red=a_red, f_map=rom.f_map, sel_state=sel_state,
                         u0_sel=np.zeros(rows.size), term=term, sel_grad=sel_grad)


def pod_solve(rom: PodRom, alpha, term, u0: np.ndarray, dt: float, n_steps: int,
              stab: float = 0.0, lift: bool = True):
    """Integrate the projected system; returns (betas, states or None).

    ``betas`` holds reduced coordinates at t = dt .. n_steps*dt; ``states``
    is the lifted trajectory when requested.
    """
    base = pod_reduced_system(rom, alpha, term)
    u0 = np.asarray(u0, dtype=np.float64)
    if isinstance(term, AdvectiveTerm):
        f0_red = None
        n0_red = rom.u_basis.T @ (u0[:, None] * (term.grad @ rom.u_basis))
    else:
        f0_red = rom.u_basis.T @ term.full(u0)
        n0_red = None
    sys = ReducedSystem(a_red=base.a_red, f_map=base.f_map, sel_state=base.sel_state,
                        u0_sel=u0[rom.selection.indices],
                        term=term, sel_grad=base.sel_grad, stab=stab,
                        f0_red=f0_red, n0_red=n0_red)
    beta0 = rom.u_basis.T @ u0
    betas = integrate_reduced(sys, beta0, dt, n_steps)
    return betas, (rom.u_basis @ betas if lift else None)
