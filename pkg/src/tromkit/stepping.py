"""Semi-implicit BDF2 time stepping shared by the full-order solvers and the
projected reduced systems.

Two nonlinearity shapes cover the test problems:

* ``PointwiseTerm`` -- f acts entrywise on the state and is evaluated
  explicitly at the extrapolated state ``2 u_j - u_{j-1}``;
* ``AdvectiveTerm`` -- f(u) = -u * (G u); the transported factor is treated
  implicitly inside each step (the coefficient is extrapolated), which keeps
  the step a linear solve.

The first step is BDF1.  Both integrators record the nonlinear-term value
actually used at step ``j`` as the j-th f-snapshot, and both produce states
at times ``dt, 2 dt, ..., n_steps * dt``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class AffineOperator:
    """Linear operator sum_i g_i(alpha) * A_i with sparse terms."""

    terms: tuple[sp.spmatrix, ...]
    coeff: Callable[[np.ndarray], np.ndarray]

    def assemble(self, alpha) -> sp.csr_matrix:
        g = np.atleast_1d(self.coeff(np.atleast_1d(np.asarray(alpha, dtype=np.float64))))
        out = g[0] * self.terms[0]
        for gi, ti in zip(g[1:], self.terms[1:]):
            out = out + gi * ti
        return sp.csr_matrix(out)

    def reduce(self, basis: np.ndarray) -> tuple[np.ndarray, ...]:
        """Project every term: basis^T A_i basis."""
        return tuple(basis.T @ (t @ basis) for t in self.terms)

    def assemble_reduced(self, reduced_terms, alpha) -> np.ndarray:
        g = np.atleast_1d(self.coeff(np.atleast_1d(np.asarray(alpha, dtype=np.float64))))
        out = g[0] * reduced_terms[0]
        for gi, ti in zip(g[1:], reduced_terms[1:]):
            out = out + gi * ti
        return out


@dataclass(frozen=True)
class PointwiseTerm:
    """Entrywise nonlinearity: f(u)_i = fn(u_i); each entry needs one state entry."""

    fn: Callable[[np.ndarray], np.ndarray]

    def full(self, u: np.ndarray) -> np.ndarray:
        return self.fn(u)


@dataclass(frozen=True)
class AdvectiveTerm:
    """Quasi-linear transport nonlinearity f(u) = -u * (G u)."""

    grad: sp.csr_matrix

    def mixed(self, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        return -w * (self.grad @ v)

    def full(self, u: np.ndarray) -> np.ndarray:
        return self.mixed(u, u)


def integrate_full(a_mat: sp.spmatrix, term, u0: np.ndarray, dt: float,
                   n_steps: int, stab: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Run the full-order scheme; returns (states, f_values), each M x n_steps.

    ``states[:, j-1]`` is the solution at t = j dt and ``f_values[:, j-1]``
    the nonlinear-term value used by the BDF2 step launched from it.  One
    extra internal step past the last stored state supplies the final
    f-snapshot, mirroring how the snapshots are defined.
    """
    a_mat = sp.csr_matrix(a_mat)
    u0 = np.asarray(u0, dtype=np.float64)
    m = u0.size
    states = np.empty((m, n_steps))
    f_vals = np.empty((m, n_steps))
    eye = sp.identity(m, format="csr")

    if isinstance(term, PointwiseTerm):
        c1 = 1.0 / dt + stab
        lu1 = spla.splu((c1 * eye - a_mat).tocsc())
        u_prev = u0
        u_curr = lu1.solve(c1 * u0 + term.full(u0))
        c0 = 1.5 / dt + stab
        lu = spla.splu((c0 * eye - a_mat).tocsc())
        states[:, 0] = u_curr
        for j in range(1, n_steps + 1):
            w = 2.0 * u_curr - u_prev
            fj = term.full(w)
            f_vals[:, j - 1] = fj
            if j == n_steps:
                break
            rhs = (2.0 * u_curr - 0.5 * u_prev) / dt + stab * w + fj
            u_prev, u_curr = u_curr, lu.solve(rhs)
            states[:, j] = u_curr
        return states, f_vals

    if isinstance(term, AdvectiveTerm):
        if stab != 0.0:
            raise ValueError("stabilization shift applies to the pointwise form only")
        g = term.grad
        c1 = 1.0 / dt
        mat1 = (c1 * eye - a_mat + sp.diags(u0) @ g).tocsc()
        u_prev = u0
        u_curr = spla.spsolve(mat1, c1 * u0)
        c0 = 1.5 / dt
        states[:, 0] = u_curr
        for j in range(1, n_steps + 1):
            w = 2.0 * u_curr - u_prev
            mat = (c0 * eye - a_mat + sp.diags(w) @ g).tocsc()
            rhs = (2.0 * u_curr - 0.5 * u_prev) / dt
            u_next = spla.spsolve(mat, rhs)
            f_vals[:, j - 1] = -w * (g @ u_next)
            if j == n_steps:
                break
            u_prev, u_curr = u_curr, u_next
            states[:, j] = u_curr
        return states, f_vals

    raise TypeError(f"unsupported nonlinearity {type(term)!r}")


@dataclass(frozen=True)
class ReducedSystem:
    """Everything a projected BDF2 step needs, sized by ranks only.

    ``f_map`` composes the hyper-reduced nonlinearity back into the reduced
    state equation; ``sel_state`` maps reduced coordinates to the state
    entries the nonlinearity needs at the selected rows; ``u0_sel`` holds the
    exact initial-state entries there (the early steps reference the initial
    state directly).  ``sel_grad`` is the selected-rows transport matrix for
    the advective form.

    The BDF1 start-up step evaluates the nonlinearity at the fully known
    initial state, so its exactly projected contribution (``f0_red`` for the
    pointwise form, the matrix ``n0_red`` for the advective one) is supplied
    up front; later steps never touch full-size data.
    """

    a_red: np.ndarray
    f_map: np.ndarray
    sel_state: np.ndarray
    u0_sel: np.ndarray
    term: PointwiseTerm | AdvectiveTerm
    sel_grad: np.ndarray | None = None
    stab: float = 0.0
    f0_red: np.ndarray | None = None
    n0_red: np.ndarray | None = None


def integrate_reduced(sys: ReducedSystem, beta0: np.ndarray, dt: float,
                      n_steps: int) -> np.ndarray:
    """Project the full-order scheme onto the reduced space; returns the
    coefficient trajectory, n x n_steps, at times dt .. n_steps*dt."""
    n = beta0.size
    eye = np.eye(n)
    betas = np.empty((n, n_steps))

    if isinstance(sys.term, PointwiseTerm):
        fn = sys.term.fn
        c1 = 1.0 / dt + sys.stab
        b_prev = beta0
        f_first = sys.f0_red if sys.f0_red is not None else sys.f_map @ fn(sys.u0_sel)
        b_curr = np.linalg.solve(c1 * eye - sys.a_red, c1 * beta0 + f_first)
        c0 = 1.5 / dt + sys.stab
        step_mat = c0 * eye - sys.a_red
        betas[:, 0] = b_curr
        sel_prev = sys.u0_sel
        sel_curr = sys.sel_state @ b_curr
        for j in range(1, n_steps):
            w_sel = 2.0 * sel_curr - sel_prev
            rhs = (2.0 * b_curr - 0.5 * b_prev) / dt \
                + sys.stab * (2.0 * b_curr - b_prev) + sys.f_map @ fn(w_sel)
            b_prev, b_curr = b_curr, np.linalg.solve(step_mat, rhs)
            betas[:, j] = b_curr
            sel_prev, sel_curr = sel_curr, sys.sel_state @ b_curr
        return betas

    if isinstance(sys.term, AdvectiveTerm):
        if sys.sel_grad is None:
            raise ValueError("advective reduced system needs sel_grad")
        c1 = 1.0 / dt
        n_first = sys.n0_red if sys.n0_red is not None \
            else sys.f_map @ (sys.u0_sel[:, None] * sys.sel_grad)
        b_prev = beta0
        b_curr = np.linalg.solve(c1 * eye - sys.a_red + n_first, c1 * beta0)
        c0 = 1.5 / dt
        betas[:, 0] = b_curr
        sel_prev = sys.u0_sel
        sel_curr = sys.sel_state @ b_curr
        for j in range(1, n_steps):
            w_sel = 2.0 * sel_curr - sel_prev
            mat = c0 * eye - sys.a_red + sys.f_map @ (w_sel[:, None] * sys.sel_grad)
            rhs = (2.0 * b_curr - 0.5 * b_prev) / dt
            b_prev, b_curr = b_curr, np.linalg.solve(mat, rhs)
            betas[:, j] = b_curr
            sel_prev, sel_curr = sel_curr, sys.sel_state @ b_curr
        return betas

    raise TypeError(f"unsupported nonlinearity {type(sys.term)!r}")
