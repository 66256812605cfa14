"""Orthogonal decomposition of one-step martingale increments.

Given values ``W`` at the children of a node, the centred increment
``D = W - E[W | node]`` splits uniquely into

* ``Z * dXc``        -- the projection on the continuous driver increment,
* ``J``              -- the jump integral, a function of the jump class only,
* ``M``              -- the remainder, conditionally orthogonal to both.

The jump integral is written through a predictable integrand ``U`` on the
nonzero marks so that ``J = U(mark) - U^`` on a jump and ``J = -U^`` without
one, ``U^`` being ``sum_l U_l nu_l``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels


@dataclass
class StepDecomposition:
    """Arrays over ``n`` parent nodes and ``B`` atoms of one step."""

    Y: np.ndarray       # (n,)    conditional expectation
    Z: np.ndarray       # (n,)
    U: np.ndarray       # (n, L)  integrand on the nonzero marks
    J: np.ndarray       # (n, B)  jump integral increment
    M: np.ndarray       # (n, B)  orthogonal remainder
    degenerate: bool    # no continuous variance: Z forced to 0


def martingale_decompose(W, probs, dxc, mark, n_marks: int) -> StepDecomposition:
    """Exact decomposition of ``W`` (shape ``(n, B)``) over the atoms of one step.

    ``probs``/``dxc``/``mark`` describe the ``B`` atoms as seen by the player
    being decomposed against; ``mark`` is ``-1`` where no jump occurs.  ``W``
    need not be centred.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    probs = np.asarray(probs, dtype=float)
    dxc = np.asarray(dxc, dtype=float)
    cls = np.asarray(mark, dtype=np.int64) + 1
    Y, Z, d, var = kernels.node_moments(W, probs, dxc, cls, n_marks + 1)
    degenerate = not var > 0
    p_cls = np.bincount(cls, weights=probs, minlength=n_marks + 1)
    no_jump = p_cls[0] > 0
    if no_jump:
        U = d[:, 1:] - d[:, :1]
    else:
        U = d[:, 1:].copy()
    J = d[:, cls]
    D = W - Y[:, None]
    M = D - Z[:, None] * dxc[None, :] - J
    return StepDecomposition(Y, Z, U, J, M, degenerate)


def regression_basis(state: np.ndarray, extra: np.ndarray | None = None, degree: int = 2) -> np.ndarray:
    """Monomials of total degree ``<= degree`` in the state columns, plus ``extra``."""
    n, dim = state.shape
    cols = [np.ones(n)]
    if degree >= 1:
        cols += [state[:, a] for a in range(dim)]
    if degree >= 2:
        cols += [state[:, a] * state[:, b] for a in range(dim) for b in range(a, dim)]
    if extra is not None:
        cols.append(extra)
    return np.stack(cols, axis=1)


def _fit(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    # column scaling keeps lstsq well conditioned when states are large
    scale = np.maximum(np.abs(X).max(axis=0), 1e-300)
    coef, *_ = np.linalg.lstsq(X / scale, y, rcond=None)
    return (X / scale) @ coef


def regression_decompose(W, basis, dxc, mark, n_marks: int, nu: np.ndarray, cont_var: float):
    """Least-squares analogue of :func:`martingale_decompose` over particles.

    Conditional expectations given the parent state are replaced by
    projections on ``basis`` (shape ``(S, F)``); the moments of the increment
    law are exact (``nu``, ``cont_var``) because the driver law is known.
    Returns the same fields with ``J``/``M`` of shape ``(S,)``.
    """
    W = np.asarray(W, dtype=float)
    Y = _fit(basis, W)
    D = W - Y
    if cont_var > 0:
        Z = _fit(basis, D * dxc) / cont_var
        degenerate = False
    else:
        Z = np.zeros_like(W)
        degenerate = True
    cls = np.asarray(mark, dtype=np.int64) + 1
    zeta = float(nu.sum())
    d = np.zeros((W.size, n_marks + 1))
    p_cls = np.concatenate([[1.0 - zeta], nu])
    for l in range(n_marks + 1):
        if p_cls[l] > 1e-15:
            d[:, l] = _fit(basis, D * (cls == l)) / p_cls[l]
    if p_cls[0] > 1e-15:
        U = d[:, 1:] - d[:, :1]
    else:
        U = d[:, 1:].copy()
    J = d[np.arange(W.size), cls]
    M = D - Z * dxc - J
    return StepDecomposition(Y, Z, U, J, M, degenerate)
