"""Symmetric eigendecomposition and row orthonormalisation."""
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, InfeasibleError, MultitabError

SYMMETRY_TOL = 1e-10
OFFDIAG_TOL = 1e-12
MAX_SWEEPS = 100
REDRAW_NORM = 1e-8
MAX_REDRAWS = 100


@dataclass(frozen=True)
class SymEigResult:
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # column k pairs with eigenvalues[k]


def _offdiag_norm(a):
    # summed directly: ||A||^2 - ||diag A||^2 cancels catastrophically
    off = a - np.diag(np.diag(a))
    return float(np.sqrt((off * off).sum()))


def sym_eig(p, tol=OFFDIAG_TOL, max_sweeps=MAX_SWEEPS):
    """Cyclic Jacobi eigendecomposition of a real symmetric matrix.

    Sweeps over all (i, j) pairs with i < j, annihilating each off-diagonal
    entry by a plane rotation, until the off-diagonal Frobenius norm drops
    below ``tol``.
    """
    a = np.array(p, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"sym_eig needs a square matrix, got shape {a.shape}")
    if a.size and np.max(np.abs(a - a.T)) >= SYMMETRY_TOL:
        raise ContractError("sym_eig: input is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        if _offdiag_norm(a) < tol:
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                aij = a[i, j]
                if aij == 0.0:
                    continue
                with np.errstate(over="ignore"):   # tiny aij: theta -> inf, handled below
                    theta = (a[j, j] - a[i, i]) / (2.0 * aij)
                if abs(theta) > 1e150:
                    t = 0.5 / theta     # theta^2 would overflow
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (i, j) plane rotation [[c, s], [-s, c]]
                ai, aj = a[:, i].copy(), a[:, j].copy()
                a[:, i] = c * ai - s * aj
                a[:, j] = s * ai + c * aj
                ai, aj = a[i, :].copy(), a[j, :].copy()
                a[i, :] = c * ai - s * aj
                a[j, :] = s * ai + c * aj
                a[i, j] = a[j, i] = 0.0
                vi, vj = v[:, i].copy(), v[:, j].copy()
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
    else:
        if _offdiag_norm(a) >= tol:
            raise MultitabError(f"sym_eig: no convergence after {max_sweeps} sweeps")
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    return SymEigResult(vals[order], v[:, order])


def _orthonormalize_row(row, basis):
    # two passes of modified Gram-Schmidt keep |dot| at round-off level
    for _ in range(2):
        for b in basis:
            row = row - np.dot(row, b) * b
    return row


def gram_schmidt(rows, rng):
    """Orthonormalise the rows of a t x d matrix in order.

    A row whose residual norm falls below 1e-8 after projection is replaced
    by a fresh standard normal draw from ``rng``.
    """
    rows = np.array(rows, dtype=np.float64)
    t, d = rows.shape
    if t > d:
        raise InfeasibleError(f"cannot orthonormalise {t} rows in dimension {d}")
    out = np.empty_like(rows)
    for i in range(t):
        row = _orthonormalize_row(rows[i], out[:i])
        redraws = 0
        while np.linalg.norm(row) < REDRAW_NORM:
            if redraws == MAX_REDRAWS:
                raise InfeasibleError(f"row {i}: still degenerate after {MAX_REDRAWS} redraws")
            redraws += 1
            row = _orthonormalize_row(rng.normal(d), out[:i])
        out[i] = row / np.linalg.norm(row)
    return out


def random_orthonormal_rows(t, d, rng):
    return gram_schmidt(rng.normal((t, d)), rng)
