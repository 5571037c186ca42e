"""Nonlinear and linear solvers for the space-time systems.

The nonlinear systems are solved by a damped Newton method whose damping
parameter is chosen by a residual-based line search (halving, first decrease
accepted).  Jacobian and adjoint systems are solved either by a sparse direct
factorization or by full (restart-free) GMRES with a relative tolerance of
1e-8, capped at 100 iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_jacobian, assemble_residual
from .problems import ProblemDefinition
from .spaces import FeFunction, FeSpace


@dataclass
class NewtonConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    max_iter: int = 50
    max_line_search_steps: int = 30

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("Newton tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("need max_iter >= 1")


@dataclass
class LinearSolverConfig:
    kind: str = "direct"  # "direct" or "gmres"
    gmres_rel_tol: float = 1e-8
    gmres_max_iter: int = 100
    preconditioner: str = "jacobi"  # "none", "jacobi", "ilu0"

    def __post_init__(self):
        if self.kind not in ("direct", "gmres"):
            raise ValueError(f"unknown linear solver kind {self.kind!r}")
        if self.preconditioner not in ("none", "jacobi", "ilu0"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.gmres_rel_tol <= 0:
            raise ValueError("GMRES tolerance must be positive")


@dataclass
class LinearSolveResult:
    x: np.ndarray
    iters: int
    converged: bool
    residual_history: list = field(default_factory=list)


@dataclass
class SolveStats:
    newton_iters: int = 0
    total_inner_iters: int = 0
    final_residual_norm: float = np.inf
    converged: bool = False
    residual_history: list = field(default_factory=list)
    inner_converged: bool = True


def gmres(matvec, b: np.ndarray, rel_tol: float = 1e-8, max_iter: int = 100,
          right_prec=None) -> LinearSolveResult:
    """Full GMRES without restarts, started from zero.

    Right preconditioning keeps the monitored Arnoldi residual equal to the
    true residual; the iteration stops when it drops below rel_tol * |b| or
    after max_iter steps (flagged as not converged).
    """
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return LinearSolveResult(np.zeros(n), 0, True, [0.0])
    if right_prec is None:
        right_prec = lambda v: v

    max_iter = min(max_iter, n)
    V = np.zeros((max_iter + 1, n))
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = bnorm
    V[0] = b / bnorm
    history = [bnorm]
    tol = rel_tol * bnorm
    k = 0
    for j in range(max_iter):
        w = matvec(right_prec(V[j]))
        for i in range(j + 1):  # modified Gram-Schmidt
            H[i, j] = w @ V[i]
            w -= H[i, j] * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        if H[j + 1, j] > 1e-300:
            V[j + 1] = w / H[j + 1, j]
        for i in range(j):  # apply accumulated Givens rotations
            h0 = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = h0
        denom = np.hypot(H[j, j], H[j + 1, j])
        if denom == 0.0:
            k = j  # breakdown: the last Krylov direction is unusable
            break
        cs[j] = H[j, j] / denom
        sn[j] = H[j + 1, j] / denom
        H[j, j] = denom
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        history.append(abs(g[j + 1]))
        k = j + 1
        if abs(g[j + 1]) <= tol:
            break
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        y[i] = (g[i] - H[i, i + 1:k] @ y[i + 1:k]) / H[i, i]
    x = right_prec(V[:k].T @ y)
    return LinearSolveResult(x, k, history[-1] <= tol, history)


class Ilu0:
    """Incomplete LU factorization with zero fill on the sparsity pattern."""

    def __init__(self, A: sp.csr_matrix):
        A = A.tocsr().copy()
        A.sort_indices()
        n = A.shape[0]
        indptr, indices, data = A.indptr, A.indices, A.data
        diag = np.zeros(n, dtype=np.int64)
        for i in range(n):
            row = indices[indptr[i]:indptr[i + 1]]
            pos = np.searchsorted(row, i)
            if pos == len(row) or row[pos] != i:
                raise ValueError("ILU(0) needs a full diagonal")
            diag[i] = indptr[i] + pos
        for i in range(n):
            for idx in range(indptr[i], diag[i]):
                kcol = indices[idx]
                data[idx] /= data[diag[kcol]]
                lik = data[idx]
                row_i = indices[indptr[i]:indptr[i + 1]]
                for idx2 in range(diag[kcol] + 1, indptr[kcol + 1]):
                    j = indices[idx2]
                    pos = np.searchsorted(row_i, j)
                    if pos < len(row_i) and row_i[pos] == j:
                        data[indptr[i] + pos] -= lik * data[idx2]
        self.L = sp.tril(A, k=-1, format="csr") + sp.eye(n, format="csr")
        self.U = sp.triu(A, k=0, format="csr")

    def solve(self, b: np.ndarray) -> np.ndarray:
        y = spla.spsolve_triangular(self.L, b, lower=True)
        return spla.spsolve_triangular(self.U, y, lower=False)


def make_preconditioner(K: sp.csr_matrix, kind: str):
    if kind == "none":
        return None
    if kind == "jacobi":
        d = K.diagonal()
        if np.any(d == 0.0):
            raise ValueError("Jacobi preconditioner needs a nonzero diagonal")
        inv = 1.0 / d
        return lambda v: inv * v
    if kind == "ilu0":
        fac = Ilu0(K)
        return fac.solve
    raise ValueError(f"unknown preconditioner {kind!r}")


def linear_solve(K: sp.spmatrix, b: np.ndarray,
                 cfg: LinearSolverConfig) -> LinearSolveResult:
    """Solve K x = b by the configured method.

    Direct solves use a sparse LU factorization; GMRES failures are reported
    through the ``converged`` flag, never raised.
    """
    if K.shape[0] != K.shape[1] or K.shape[0] != b.shape[0]:
        raise ValueError("system dimensions do not match")
    if cfg.kind == "direct":
        try:
            lu = spla.splu(sp.csc_matrix(K))
            x = lu.solve(b)
        except RuntimeError:  # singular factorization is reported, not raised
            return LinearSolveResult(np.zeros_like(b), 0, False, [])
        if not np.all(np.isfinite(x)):
            return LinearSolveResult(np.zeros_like(b), 0, False, [])
        return LinearSolveResult(x, 1, True, [])
    K = sp.csr_matrix(K)
    prec = make_preconditioner(K, cfg.preconditioner)
    return gmres(lambda v: K @ v, b, cfg.gmres_rel_tol, cfg.gmres_max_iter,
                 right_prec=prec)


def random_initial_guess(space: FeSpace, seed: int = 0,
                         amplitude: float = 0.5) -> FeFunction:
    """Deterministic pseudo-random start vector supported on the free dofs."""
    rng = np.random.default_rng(seed)
    coeffs = amplitude * rng.uniform(-1.0, 1.0, size=space.n_dofs)
    coeffs[space.constrained] = 0.0
    return FeFunction(space, coeffs)


def newton_solve(prob: ProblemDefinition, space: FeSpace, init: FeFunction,
                 ncfg: NewtonConfig = None, lcfg: LinearSolverConfig = None,
                 order: int = None) -> tuple[FeFunction, SolveStats]:
    """Damped Newton iteration for the nonlinear space-time system.

    The step length is halved until the residual norm decreases; close to the
    solution the full step is always accepted.  Inner solver failures are
    recorded and the iteration continues with the returned correction.
    """
    ncfg = ncfg or NewtonConfig()
    lcfg = lcfg or LinearSolverConfig()
    u = init.copy()
    u.coeffs[space.constrained] = 0.0
    r = assemble_residual(space, u, prob, order)
    rnorm = np.linalg.norm(r)
    tol = max(ncfg.abs_tol, ncfg.rel_tol * rnorm)
    stats = SolveStats(residual_history=[rnorm])
    while rnorm > tol and stats.newton_iters < ncfg.max_iter:
        K = assemble_jacobian(space, u, prob, order)
        res = linear_solve(K, -r, lcfg)
        stats.total_inner_iters += res.iters
        if not res.converged:
            stats.inner_converged = False
        w = res.x
        lam = 1.0
        accepted = False
        for _ in range(ncfg.max_line_search_steps):
            trial = u.coeffs + lam * w
            r_trial = assemble_residual(space, FeFunction(space, trial),
                                        prob, order)
            rt = np.linalg.norm(r_trial)
            if rt < rnorm:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break
        u.coeffs = trial
        r, rnorm = r_trial, rt
        stats.newton_iters += 1
        stats.residual_history.append(rnorm)
    stats.final_residual_norm = rnorm
    stats.converged = rnorm <= tol
    return u, stats


def solve_adjoint(space: FeSpace, u: FeFunction, goal,
                  prob: ProblemDefinition, lcfg: LinearSolverConfig = None,
                  order: int = None) -> tuple[FeFunction, LinearSolveResult]:
    """Discrete adjoint solve: the transposed Jacobian at u against the goal
    gradient.  Linear, backward in time."""
    lcfg = lcfg or LinearSolverConfig()
    g = goal.gradient(space, u)
    K = assemble_jacobian(space, u, prob, order)
    res = linear_solve(sp.csr_matrix(K.T), g, lcfg)
    return FeFunction(space, res.x), res
