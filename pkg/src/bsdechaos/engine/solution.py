"""Path-level solution containers, Picard diagnostics and the residual check."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from ..calculus import StandardData, gamma_rows
from ..errors import InvalidArgument


@dataclass(frozen=True, eq=False)
class SolutionProcesses:
    """``(Y, Z, U, M)`` along weighted driver paths of one player.

    Paths are every leaf of a scenario tree (exact weights), or sampled paths
    of a lattice or ensemble (weights ``1/S``).  Shapes: ``Y``/``mu_*``
    ``(S, k+1)``; ``Z``, ``zx``, ``jump``, ``dM``, ``F``, ``gamma``
    ``(S, k)``; ``U`` ``(S, k, L)`` on the nonzero marks of each step.
    ``zx = Z dXc`` and ``jump`` is the jump-integral increment.  ``F`` is the
    generator value used by the pass that produced the solution.
    """

    weights: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    zx: np.ndarray
    jump: np.ndarray
    dM: np.ndarray
    F: np.ndarray
    gamma: np.ndarray
    mu_mean: np.ndarray
    mu_second: np.ndarray
    xi: np.ndarray
    backend: str = "tree"
    meta: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.Z.shape[1]

    @property
    def n_paths(self) -> int:
        return self.weights.size

    @property
    def law_mean(self) -> np.ndarray:
        return self.weights @ self.Y

    @property
    def law_second(self) -> np.ndarray:
        return self.weights @ (self.Y * self.Y)

    @property
    def martingale_part(self) -> np.ndarray:
        """Terminal value of ``Z . X_c + U * (mu - nu)``."""
        return (self.zx + self.jump).sum(axis=1)

    def __sub__(self, other: "SolutionProcesses") -> "SolutionProcesses":
        if self.Y.shape != other.Y.shape or not np.array_equal(self.weights, other.weights):
            raise InvalidArgument("solutions live on different paths")
        L = max(self.U.shape[2], other.U.shape[2])

        def pad(u):
            return np.pad(u, ((0, 0), (0, 0), (0, L - u.shape[2])))

        return replace(
            self,
            Y=self.Y - other.Y, Z=self.Z - other.Z, U=pad(self.U) - pad(other.U),
            zx=self.zx - other.zx, jump=self.jump - other.jump, dM=self.dM - other.dM,
            F=self.F - other.F, gamma=self.gamma - other.gamma, xi=self.xi - other.xi,
            backend=f"{self.backend}-diff", meta={})

    def summary(self) -> dict:
        return {
            "backend": self.backend,
            "paths": int(self.n_paths),
            "Y0_mean": float(self.law_mean[0]),
            "law_mean": self.law_mean.tolist(),
            "law_var": (self.law_second - self.law_mean ** 2).tolist(),
            **{k: v for k, v in self.meta.items() if isinstance(v, (int, float, str))},
        }


def zero_solution(weights: np.ndarray, steps: int, n_marks: int, backend: str = "tree") -> SolutionProcesses:
    S = weights.size
    z = np.zeros((S, steps))
    y = np.zeros((S, steps + 1))
    return SolutionProcesses(weights, y, z, np.zeros((S, steps, n_marks)), z, z, z, z, z,
                             y, y, np.zeros(S), backend)


@dataclass
class PicardState:
    """Picard progress: ``deltas[q-1]`` is the squared star norm of ``S^(q) - S^(q-1)``."""

    q: int = 0
    deltas: list = field(default_factory=list)
    rate_bound: float = float("nan")
    M_tilde: float = float("nan")
    b7_passes: bool = False
    converged: bool = False
    tol: float = 1e-10
    backend: str = "tree"
    residual: float = float("nan")
    iterate: object = None
    history: list = field(default_factory=list)

    def ratios(self) -> list:
        d = self.deltas
        return [d[i + 1] / d[i] if d[i] > 0 else 0.0 for i in range(len(d) - 1)]

    def to_dict(self) -> dict:
        return {"q": self.q, "deltas": [float(x) for x in self.deltas],
                "ratios": [float(x) for x in self.ratios()],
                "rate_bound": self.rate_bound, "M_tilde": self.M_tilde,
                "b7_passes": self.b7_passes, "converged": self.converged,
                "tol": self.tol, "backend": self.backend, "residual": self.residual}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def solution_json(sols, state: PicardState | None = None) -> str:
    if isinstance(sols, SolutionProcesses):
        sols = [sols]
    out = {"players": [s.summary() for s in sols]}
    if state is not None:
        out["picard"] = state.to_dict()
    return json.dumps(out, indent=2, sort_keys=True)


def own_generator(sol: SolutionProcesses, sd: StandardData) -> np.ndarray:
    """Generator evaluated at the solution's own ``(Y, Zc, Gamma(U), law)``."""
    ch = sd.ch
    k = ch.steps
    t = sd.times[1:]
    G = np.zeros_like(sol.Z)
    for j in range(1, k + 1):
        nu = ch.nu[j - 1]
        if nu.size:
            marks = ch.marks[j - 1][:, 0]
            th = np.asarray(sd.theta(t[j - 1], marks), dtype=float) * np.ones(nu.size)
            G[:, j - 1] = gamma_rows(sol.U[:, j - 1, :nu.size], th, nu, ch.dC[j - 1])
    c = np.asarray(ch.c, dtype=float).reshape(k)
    return np.asarray(sd.generator(t[None, :], sol.Y[:, 1:], sol.Z * c[None, :], G,
                                   sol.mu_mean[:, 1:], sol.mu_second[:, 1:]), dtype=float) \
        * np.ones_like(sol.Z)


def residual_check(sol: SolutionProcesses, sd: StandardData, backend=None) -> float:
    """Largest one-step defect of the backward equation along every path.

    ``|Y_{j-1} - Y_j - f dC + Z dXc + J + dM|`` with ``f`` evaluated at the
    solution itself, together with the terminal defect ``|Y_T - xi|``.
    """
    if sol.steps != sd.steps:
        raise InvalidArgument("solution and data use different grids")
    F = own_generator(sol, sd)
    dC = sd.ch.dC[None, :]
    defect = sol.Y[:, :-1] - sol.Y[:, 1:] - F * dC + sol.zx + sol.jump + sol.dM
    term = np.abs(sol.Y[:, -1] - sol.xi)
    return float(max(np.max(np.abs(defect)), np.max(term)))
