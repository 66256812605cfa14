"""Exact backward passes on scenario trees and recombining lattices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..calculus import StandardData, gamma_rows
from ..errors import NumericOverflow
from .decompose import martingale_decompose
from .solution import SolutionProcesses


@dataclass
class NodeState:
    """Node arrays of one Picard iterate (index ``j`` = depth or step).

    ``Y[j]`` is ``(n_j, P)``; ``Z[j]``/``G[j]`` are ``(n_{j-1}, P)``;
    ``U[j]`` is ``(n_{j-1}, P, L)``; ``J[j]``, ``M[j]``, ``F[j]`` are
    ``(n_{j-1}, B_j, P)``; ``mu_mean[j]``/``mu_second[j]`` are ``(n_j,)``.
    """

    Y: list
    Z: list
    U: list
    G: list
    J: list
    M: list
    F: list
    mu_mean: list
    mu_second: list
    degenerate: list


class GraphSolver:
    """Picard passes over an exact filtration with ``P`` players.

    ``law='mv'`` feeds the generator the exact law of player 0 at each time
    (McKean-Vlasov); ``law='empirical'`` feeds it the empirical measure of
    the ``P`` players at the current node (mean-field system).
    """

    def __init__(self, sd: StandardData, graph, law: str = "mv"):
        self.sd = sd
        self.g = graph
        self.law = law
        self.P = graph.players
        ch = sd.ch
        self.k = sd.steps
        self.L = max(ch.max_marks(), 1)
        self.c = np.asarray(ch.c, dtype=float).reshape(self.k)
        self.theta_vals = []
        for j in range(1, self.k + 1):
            marks = ch.marks[j - 1]
            th = np.asarray(sd.theta(sd.times[j], marks[:, 0]), dtype=float) * np.ones(marks.shape[0]) \
                if marks.size else np.zeros(0)
            self.theta_vals.append(th)
        xc, xj = graph.state_c[-1], graph.state_j[-1]
        if self.P == 1:
            self.xi = np.asarray(sd.terminal.single(xc, xj), dtype=float).reshape(-1, 1)
        else:
            self.xi = np.asarray(sd.terminal.system(xc, xj), dtype=float)

    def _law(self, Yj: np.ndarray, j: int):
        if self.law == "mv":
            p = self.g.node_prob[j]
            m = float(p @ Yj[:, 0])
            s = float(p @ (Yj[:, 0] ** 2))
            n = Yj.shape[0]
            return np.full(n, m), np.full(n, s)
        return Yj.mean(axis=1), (Yj * Yj).mean(axis=1)

    def zero_state(self) -> NodeState:
        g, P, L = self.g, self.P, self.L
        Y = [np.zeros((n, P)) for n in g.n_nodes]
        Z = [None] + [np.zeros((g.n_nodes[j - 1], P)) for j in range(1, self.k + 1)]
        U = [None] + [np.zeros((g.n_nodes[j - 1], P, L)) for j in range(1, self.k + 1)]
        G = [None] + [np.zeros((g.n_nodes[j - 1], P)) for j in range(1, self.k + 1)]
        JMF = [None] + [np.zeros((g.n_nodes[j - 1], g.atom_prob[j].size, P)) for j in range(1, self.k + 1)]
        mm = [np.zeros(n) for n in g.n_nodes]
        return NodeState(Y, Z, U, G, JMF, list(JMF), list(JMF), mm, list(mm), [False] * (self.k + 1))

    def backward(self, prev: NodeState) -> NodeState:
        sd, g, P, L, k = self.sd, self.g, self.P, self.L, self.k
        ch = sd.ch
        Y = [None] * (k + 1)
        Z, U, G, J, M, F = ([None] * (k + 1) for _ in range(6))
        degenerate = [False] * (k + 1)
        Y[k] = self.xi.copy()
        for j in range(k, 0, -1):
            kids = g.children[j]
            n_par, B = kids.shape
            dC = ch.dC[j - 1]
            if dC > 0:
                Fj = sd.generator(sd.times[j], prev.Y[j][kids],
                                  prev.Z[j][:, None, :] * self.c[j - 1],
                                  prev.G[j][:, None, :],
                                  prev.mu_mean[j][kids][..., None],
                                  prev.mu_second[j][kids][..., None])
                Fj = np.broadcast_to(np.asarray(Fj, dtype=float), (n_par, B, P)).copy()
            else:
                Fj = np.zeros((n_par, B, P))
            W = Y[j][kids] + Fj * dC
            if not np.all(np.isfinite(W)):
                raise NumericOverflow(f"non-finite values in the backward pass at step {j}")
            nu = ch.nu[j - 1]
            Lj = nu.size
            Yp = np.empty((n_par, P))
            Zj = np.empty((n_par, P))
            Uj = np.zeros((n_par, P, L))
            Gj = np.zeros((n_par, P))
            Jj = np.empty((n_par, B, P))
            Mj = np.empty((n_par, B, P))
            for i in range(P):
                dec = martingale_decompose(W[:, :, i], g.atom_prob[j], g.atom_dxc[j][:, i],
                                           g.atom_mark[j][:, i], Lj)
                Yp[:, i], Zj[:, i] = dec.Y, dec.Z
                Uj[:, i, :Lj] = dec.U
                Jj[:, :, i], Mj[:, :, i] = dec.J, dec.M
                Gj[:, i] = gamma_rows(dec.U, self.theta_vals[j - 1], nu, dC)
                degenerate[j] = degenerate[j] or dec.degenerate
            Y[j - 1] = Yp
            Z[j], U[j], G[j], J[j], M[j], F[j] = Zj, Uj, Gj, Jj, Mj, Fj
        laws = [self._law(y, j) for j, y in enumerate(Y)]
        return NodeState(Y, Z, U, G, J, M, F, [a for a, _ in laws], [b for _, b in laws], degenerate)

    def to_paths(self, st: NodeState, nodes: np.ndarray, atoms: np.ndarray, weights: np.ndarray,
                 player: int = 0, backend: str = "tree") -> SolutionProcesses:
        g, k, i = self.g, self.k, player
        S = nodes.shape[0]
        Y = np.empty((S, k + 1))
        mu_m = np.empty((S, k + 1))
        mu_s = np.empty((S, k + 1))
        for j in range(k + 1):
            Y[:, j] = st.Y[j][nodes[:, j], i]
            mu_m[:, j] = st.mu_mean[j][nodes[:, j]]
            mu_s[:, j] = st.mu_second[j][nodes[:, j]]
        Z, zx, jump, dM, F, G = (np.empty((S, k)) for _ in range(6))
        U = np.empty((S, k, self.L))
        for j in range(1, k + 1):
            par, a = nodes[:, j - 1], atoms[:, j - 1]
            Z[:, j - 1] = st.Z[j][par, i]
            U[:, j - 1] = st.U[j][par, i]
            G[:, j - 1] = st.G[j][par, i]
            zx[:, j - 1] = Z[:, j - 1] * g.atom_dxc[j][a, i]
            jump[:, j - 1] = st.J[j][par, a, i]
            dM[:, j - 1] = st.M[j][par, a, i]
            F[:, j - 1] = st.F[j][par, a, i]
        xi = self.xi[nodes[:, k], i]
        return SolutionProcesses(weights, Y, Z, U, zx, jump, dM, F, G, mu_m, mu_s, xi, backend)
