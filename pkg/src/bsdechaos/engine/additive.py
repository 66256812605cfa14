"""Exact mean-field systems with a linear generator on the single-player lattice.

For ``f = a y + bz z + bu u + e mean(mu) + c0`` and terminal values
``g(X^i) + N^-gamma kappa mean_{l != i} X^l``, every Picard iterate of the
``N``-player system is additive across players:

    Y^i_t = A_t(X^i_t) + sum_{l != i} B_t(X^l_t),

with ``A`` and ``B`` functions on one player's lattice.  Conditional
expectations under the joint filtration split into one-player expectations
because the players' increments are independent, and the decomposition of
player ``i``'s increment against its own drivers only sees the ``A`` part;
the increments of the ``B`` parts of the other players are orthogonal to
player ``i``'s drivers and land in ``M^i``.  This makes the system exact at
a cost independent of ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..calculus import StandardData, gamma_rows
from ..drivers import RecombiningLattice
from ..errors import InvalidArgument, NumericOverflow
from .decompose import martingale_decompose
from .solution import SolutionProcesses


@dataclass
class AdditiveState:
    A: list     # A[j] (n_j,)
    B: list     # B[j] (n_j,)
    Z: list     # Z[j] (n_{j-1},)
    U: list     # U[j] (n_{j-1}, L)
    G: list     # G[j] (n_{j-1},)
    J: list     # J[j] (n_{j-1}, B)
    Mown: list
    Moth: list
    Fown: list
    Foth: list


class AdditiveSolver:
    def __init__(self, sd: StandardData, lattice: RecombiningLattice, players: int):
        g = sd.generator
        if g.family != "linear":
            raise InvalidArgument("the additive backend needs the linear generator family")
        if players < 1:
            raise InvalidArgument("players must be positive")
        self.sd, self.g, self.N = sd, lattice, int(players)
        self.k = sd.steps
        p = g.params
        self.a, self.bz, self.bu, self.e, self.c0 = p["a"], p["bz"], p["bu"], p["e"], p["c0"]
        ch = sd.ch
        self.L = max(ch.max_marks(), 1)
        self.c = np.asarray(ch.c, dtype=float).reshape(self.k)
        self.theta_vals = [None]
        for j in range(1, self.k + 1):
            marks = ch.marks[j - 1]
            self.theta_vals.append(np.asarray(sd.theta(sd.times[j], marks[:, 0]), dtype=float)
                                   * np.ones(marks.shape[0]) if marks.size else np.zeros(0))
        xc, xj = lattice.state_c[-1][:, 0], lattice.state_j[-1][:, 0]
        self.A_T = np.asarray(sd.terminal.single(xc, xj), dtype=float) * np.ones(xc.size)
        term = sd.terminal
        if self.N > 1 and term.kappa != 0:
            self.B_T = self.N ** (-term.gamma) * term.kappa * (xc + xj) / (self.N - 1)
        else:
            self.B_T = np.zeros(xc.size)

    def zero_state(self) -> AdditiveState:
        g, k, L = self.g, self.k, self.L
        nn = g.n_nodes
        nodes = [np.zeros(n) for n in nn]
        par = [None] + [np.zeros(nn[j - 1]) for j in range(1, k + 1)]
        pb = [None] + [np.zeros((nn[j - 1], g.atom_prob[j].size)) for j in range(1, k + 1)]
        return AdditiveState(nodes, list(nodes), par, [None] + [np.zeros((nn[j - 1], L)) for j in range(1, k + 1)],
                             list(par), pb, list(pb), list(pb), list(pb), list(pb))

    def backward(self, prev: AdditiveState) -> AdditiveState:
        sd, g, k, N = self.sd, self.g, self.k, self.N
        ch = sd.ch
        A = [None] * (k + 1)
        B = [None] * (k + 1)
        Z, U, G, J, Mo, Mt, Fo, Ft = ([None] * (k + 1) for _ in range(8))
        A[k], B[k] = self.A_T.copy(), self.B_T.copy()
        for j in range(k, 0, -1):
            kids = g.children[j]
            dC = ch.dC[j - 1]
            pa, pb = prev.A[j][kids], prev.B[j][kids]
            agg = self.e / N * (pa + (N - 1) * pb)
            fo = (self.a * pa + agg + self.bz * self.c[j - 1] * prev.Z[j][:, None]
                  + self.bu * prev.G[j][:, None] + self.c0)
            ft = (self.a * pb + agg) if N > 1 else np.zeros_like(pb)
            Wo = A[j][kids] + fo * dC
            Wt = B[j][kids] + ft * dC
            if not (np.all(np.isfinite(Wo)) and np.all(np.isfinite(Wt))):
                raise NumericOverflow(f"non-finite values in the backward pass at step {j}")
            nu = ch.nu[j - 1]
            dec = martingale_decompose(Wo, g.atom_prob[j], g.atom_dxc[j][:, 0], g.atom_mark[j][:, 0], nu.size)
            A[j - 1] = dec.Y
            B[j - 1] = Wt @ g.atom_prob[j]
            Uj = np.zeros((kids.shape[0], self.L))
            Uj[:, :nu.size] = dec.U
            Z[j], U[j], J[j], Mo[j] = dec.Z, Uj, dec.J, dec.M
            G[j] = gamma_rows(dec.U, self.theta_vals[j], nu, dC)
            Mt[j] = Wt - B[j - 1][:, None]
            Fo[j], Ft[j] = fo, ft
        return AdditiveState(A, B, Z, U, G, J, Mo, Mt, Fo, Ft)

    def change(self, new: AdditiveState, old: AdditiveState) -> float:
        """Squared sup-norm of the change of one iterate (node arrays)."""
        N = self.N
        out = 0.0
        for j in range(self.k + 1):
            d = np.abs(new.A[j] - old.A[j]).max() + (N - 1) * np.abs(new.B[j] - old.B[j]).max()
            out = max(out, d)
            if j:
                out = max(out, np.abs(new.Z[j] - old.Z[j]).max(), np.abs(new.U[j] - old.U[j]).max())
        return float(out * out)

    def world_paths(self, st: AdditiveState, atoms: np.ndarray) -> SolutionProcesses:
        """Solutions of every player of every world.

        ``atoms`` is ``(W, N, k)``; the result has ``W * N`` rows (row
        ``w * N + i`` is player ``i`` of world ``w``) with uniform weights.
        """
        Wn, N, k = atoms.shape
        if N != self.N:
            raise InvalidArgument("worlds must have as many players as the solver")
        g = self.g
        flat = atoms.reshape(Wn * N, k)
        nodes = g.path_nodes(flat)
        S = Wn * N
        Y = np.empty((S, k + 1))
        for j in range(k + 1):
            a = st.A[j][nodes[:, j]].reshape(Wn, N)
            b = st.B[j][nodes[:, j]].reshape(Wn, N)
            Y[:, j] = (a + b.sum(axis=1, keepdims=True) - b).ravel()
        mu = Y.reshape(Wn, N, k + 1)
        mu_m = np.repeat(mu.mean(axis=1), N, axis=0)
        mu_s = np.repeat((mu * mu).mean(axis=1), N, axis=0)
        Z, zx, jump, dM, F, G = (np.empty((S, k)) for _ in range(6))
        U = np.empty((S, k, self.L))
        for j in range(1, k + 1):
            par, a = nodes[:, j - 1], flat[:, j - 1]
            Z[:, j - 1] = st.Z[j][par]
            U[:, j - 1] = st.U[j][par]
            G[:, j - 1] = st.G[j][par]
            zx[:, j - 1] = Z[:, j - 1] * g.atom_dxc[j][a, 0]
            jump[:, j - 1] = st.J[j][par, a]
            mt = st.Moth[j][par, a].reshape(Wn, N)
            ft = st.Foth[j][par, a].reshape(Wn, N)
            dM[:, j - 1] = st.Mown[j][par, a] + (mt.sum(axis=1, keepdims=True) - mt).ravel()
            F[:, j - 1] = st.Fown[j][par, a] + (ft.sum(axis=1, keepdims=True) - ft).ravel()
        xc = g.state_c[-1][nodes[:, k], 0].reshape(Wn, N)
        xj = g.state_j[-1][nodes[:, k], 0].reshape(Wn, N)
        xi = np.asarray(self.sd.terminal.system(xc, xj), dtype=float).ravel()
        return SolutionProcesses(np.full(S, 1.0 / S), Y, Z, U, zx, jump, dM, F, G, mu_m, mu_s, xi, "additive")
