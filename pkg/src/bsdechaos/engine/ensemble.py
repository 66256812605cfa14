"""Regression Monte Carlo backward passes over particle ensembles.

Particles are grouped in worlds of ``P`` players (particle ``w * P + i`` is
player ``i`` of world ``w``).  Conditional expectations given the parent
state are least-squares projections on polynomials of degree ``<= degree``
in the player's own driver state, plus, for systems, the world average of
the previous iterate's ``Y`` as one extra feature.  Regressions are pooled
over worlds and players, which is legitimate because players are
exchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..calculus import StandardData, gamma_rows
from ..drivers import ParticleEnsemble
from ..errors import InvalidArgument, NumericOverflow
from .decompose import regression_basis, regression_decompose
from .solution import SolutionProcesses


@dataclass
class ParticleState:
    Y: np.ndarray      # (S, k+1)
    Z: np.ndarray      # (S, k)
    U: np.ndarray      # (S, k, L)
    G: np.ndarray
    J: np.ndarray
    M: np.ndarray
    F: np.ndarray
    mu_mean: np.ndarray
    mu_second: np.ndarray


class EnsembleSolver:
    def __init__(self, sd: StandardData, ens: ParticleEnsemble, players: int = 1,
                 law: str = "mv", degree: int = 2):
        if ens.n_particles % players:
            raise InvalidArgument("particle count must be a multiple of the number of players")
        self.sd, self.ens, self.P, self.law, self.degree = sd, ens, players, law, degree
        self.k = sd.steps
        self.S = ens.n_particles
        self.W = self.S // players
        ch = sd.ch
        self.L = max(ch.max_marks(), 1)
        self.c = np.asarray(ch.c, dtype=float).reshape(self.k)
        xc = ens.xc[:, -1].reshape(self.W, players)
        xj = ens.xj[:, -1].reshape(self.W, players)
        if players == 1 and law == "mv":
            self.xi = np.asarray(sd.terminal.single(xc, xj), dtype=float).ravel()
        else:
            self.xi = np.asarray(sd.terminal.system(xc, xj), dtype=float).ravel()
        self.dxc, self.mark, self.theta_vals = [None], [None], [None]
        for j in range(1, self.k + 1):
            _, dxc, _, mark = sd.driver.step_atoms(j)
            a = ens.atoms[:, j - 1]
            self.dxc.append(dxc[a, 0])
            self.mark.append(mark[a])
            marks = ch.marks[j - 1]
            self.theta_vals.append(np.asarray(sd.theta(sd.times[j], marks[:, 0]), dtype=float)
                                   * np.ones(marks.shape[0]) if marks.size else np.zeros(0))

    def _law(self, y: np.ndarray):
        if self.law == "mv":
            return np.full(self.S, y.mean()), np.full(self.S, (y * y).mean())
        g = y.reshape(self.W, self.P)
        return (np.repeat(g.mean(axis=1), self.P), np.repeat((g * g).mean(axis=1), self.P))

    def zero_state(self) -> ParticleState:
        S, k = self.S, self.k
        z = np.zeros((S, k))
        y = np.zeros((S, k + 1))
        return ParticleState(y, z, np.zeros((S, k, self.L)), z, z, z, z, y, y)

    def backward(self, prev: ParticleState) -> ParticleState:
        sd, k, S = self.sd, self.k, self.S
        ch = sd.ch
        Y = np.empty((S, k + 1))
        Z, G, J, M, F = (np.zeros((S, k)) for _ in range(5))
        U = np.zeros((S, k, self.L))
        Y[:, k] = self.xi
        for j in range(k, 0, -1):
            dC = ch.dC[j - 1]
            if dC > 0:
                F[:, j - 1] = np.asarray(sd.generator(
                    sd.times[j], prev.Y[:, j], prev.Z[:, j - 1] * self.c[j - 1], prev.G[:, j - 1],
                    prev.mu_mean[:, j], prev.mu_second[:, j]), dtype=float)
            W = Y[:, j] + F[:, j - 1] * dC
            if not np.all(np.isfinite(W)):
                raise NumericOverflow(f"non-finite values in the backward pass at step {j}")
            state = np.stack([self.ens.xc[:, j - 1], self.ens.xj[:, j - 1]], axis=1)
            extra = prev.mu_mean[:, j - 1] if (self.law != "mv" and self.P > 1) else None
            basis = regression_basis(state, extra, self.degree)
            nu = ch.nu[j - 1]
            dec = regression_decompose(W, basis, self.dxc[j], self.mark[j], nu.size, nu, ch.cont_var[j - 1])
            Y[:, j - 1] = dec.Y
            Z[:, j - 1] = dec.Z
            U[:, j - 1, :nu.size] = dec.U
            G[:, j - 1] = gamma_rows(dec.U, self.theta_vals[j], nu, dC)
            J[:, j - 1], M[:, j - 1] = dec.J, dec.M
        mm = np.empty((S, k + 1))
        ms = np.empty((S, k + 1))
        for j in range(k + 1):
            mm[:, j], ms[:, j] = self._law(Y[:, j])
        return ParticleState(Y, Z, U, G, J, M, F, mm, ms)

    def to_paths(self, st: ParticleState, player: int | None = None) -> SolutionProcesses:
        """Paths of one player across worlds (``player=None``: all particles)."""
        rows = np.arange(self.S) if player is None else np.arange(player, self.S, self.P)
        S = rows.size
        zx = st.Z[rows] * np.stack([self.dxc[j][rows] for j in range(1, self.k + 1)], axis=1)
        return SolutionProcesses(np.full(S, 1.0 / S), st.Y[rows], st.Z[rows], st.U[rows], zx,
                                 st.J[rows], st.M[rows], st.F[rows], st.G[rows],
                                 st.mu_mean[rows], st.mu_second[rows], self.xi[rows], "ensemble",
                                 meta={"basis": f"poly(deg<={self.degree}) in own (Xc, Xj)"
                                       + (" + world mean of Y" if self.P > 1 else "")})
