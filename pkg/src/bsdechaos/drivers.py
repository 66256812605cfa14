"""Discrete-time martingale drivers with independent, finite-support increments.

A driver is a pair ``(X_c, X_j)``: ``X_c`` plays the role of the continuous
martingale part and ``X_j`` the purely discontinuous part whose nonzero
increments are the jump marks.  Because increments are independent and
finitely supported, the bracket clock ``C``, the jump kernel ``K``, the
density ``c`` and the instantaneous compensator mass ``zeta`` are all
deterministic and computed here in closed form.

Three discrete filtrations are offered on top of a driver:

* :class:`ScenarioTree` -- the exact (non-recombining) joint tree of ``N``
  independent copies;
* :class:`RecombiningLattice` -- one player, nodes merged by state value;
* :class:`ParticleEnsemble` -- seeded Monte Carlo paths.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb

from .errors import CapacityError, InvalidArgument

_SUM_TOL = 1e-12

#: particles drawn from one Philox key; fixes the stream layout so results do
#: not depend on how blocks are scheduled over threads.
ENSEMBLE_BLOCK = 1024


@dataclass(frozen=True)
class GridSpec:
    steps: int
    horizon: float

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidArgument(f"steps must be a positive integer, got {self.steps!r}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise InvalidArgument(f"horizon must be positive and finite, got {self.horizon!r}")

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.steps + 1, dtype=float) * (self.horizon / self.steps)
        t[-1] = self.horizon
        return t

    @property
    def dt(self) -> float:
        return self.horizon / self.steps


@dataclass(frozen=True, eq=False)
class IncrementLaw:
    """Finite-support law of one increment; ``marks`` has shape ``(m, dim)``."""

    marks: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        marks = np.asarray(self.marks, dtype=float)
        if marks.ndim == 1:
            marks = marks[:, None]
        probs = np.asarray(self.probs, dtype=float).ravel()
        if marks.shape[0] != probs.shape[0] or probs.size == 0:
            raise InvalidArgument("marks and probs must have the same positive length")
        if np.any(probs <= 0) or np.any(probs > 1):
            raise InvalidArgument("atom probabilities must lie in (0, 1]")
        if abs(probs.sum() - 1.0) > _SUM_TOL:
            raise InvalidArgument(f"probabilities sum to {probs.sum()!r}, not 1")
        mean = probs @ marks
        if np.max(np.abs(mean)) > _SUM_TOL:
            raise InvalidArgument(f"increment law has nonzero mean {mean}")
        if len({tuple(r) for r in marks}) != marks.shape[0]:
            raise InvalidArgument("increment marks must be distinct")
        marks.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self) -> int:
        return self.marks.shape[1]

    @property
    def size(self) -> int:
        return self.marks.shape[0]

    def second_moment(self) -> np.ndarray:
        """``E[dX dX^T]`` as a ``(dim, dim)`` matrix."""
        return (self.marks * self.probs[:, None]).T @ self.marks

    @classmethod
    def symmetric(cls, h: float, dim: int = 1) -> "IncrementLaw":
        if h == 0:
            return cls.zero(dim)
        e = np.zeros(dim)
        e[0] = h
        return cls(np.stack([e, -e]), [0.5, 0.5])

    @classmethod
    def zero(cls, dim: int = 1) -> "IncrementLaw":
        return cls(np.zeros((1, dim)), [1.0])

    @classmethod
    def binomial_walk(cls, substeps: int, h: float) -> "IncrementLaw":
        """Law of a sum of ``substeps`` independent ``+-h`` coin steps."""
        i = np.arange(substeps + 1)
        probs = comb(substeps, i) / 2.0**substeps
        return cls(((2 * i - substeps) * h)[:, None], probs)


@dataclass(frozen=True, eq=False)
class DriverSpec:
    grid: GridSpec
    cont_laws: tuple
    jump_laws: tuple
    mode: str = "custom"
    skeleton_steps: int | None = None

    def __post_init__(self):
        k = self.grid.steps
        if len(self.cont_laws) != k or len(self.jump_laws) != k:
            raise InvalidArgument("one continuous and one jump law per grid step is required")
        if len({law.dim for law in self.cont_laws}) != 1 or len({law.dim for law in self.jump_laws}) != 1:
            raise InvalidArgument("law dimensions must not change across steps")
        if self.p > 3 or self.n > 3:
            raise InvalidArgument("driver dimensions above 3 are not supported")

    @property
    def steps(self) -> int:
        return self.grid.steps

    @property
    def p(self) -> int:
        return self.cont_laws[0].dim

    @property
    def n(self) -> int:
        return self.jump_laws[0].dim

    def step_atoms(self, j: int):
        """Joint single-player atoms of step ``j`` (1-based).

        Returns ``(probs, dxc, dxj, mark)`` where ``mark`` indexes the nonzero
        jump marks of the step's kernel and is ``-1`` where no jump occurs.
        The atom ``a`` is ``cont atom a // m_j`` combined with ``jump atom
        a % m_j``.
        """
        cl, jl = self.cont_laws[j - 1], self.jump_laws[j - 1]
        probs = np.outer(cl.probs, jl.probs).ravel()
        dxc = np.repeat(cl.marks, jl.size, axis=0)
        dxj = np.tile(jl.marks, (cl.size, 1))
        nz = np.any(jl.marks != 0, axis=1)
        ids = np.full(jl.size, -1)
        ids[nz] = np.arange(nz.sum())
        mark = np.tile(ids, cl.size)
        return probs, dxc, dxj, mark


def make_donsker_driver(k: int, horizon: float = 1.0, mode: str = "rademacher",
                        skeleton_steps: int | None = None) -> DriverSpec:
    """Symmetric random-walk driver with per-step variance ``horizon / k``.

    ``gaussian_coupled`` builds every coarse increment as the sum of
    ``skeleton_steps / k`` fine coin steps whose signs are read off a shared
    Brownian skeleton (see :func:`sample_ensemble`), so drivers with different
    ``k`` but the same skeleton are pathwise coupled.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidArgument(f"k must be a positive integer, got {k!r}")
    grid = GridSpec(int(k), float(horizon))
    zero = IncrementLaw.zero()
    if mode == "rademacher":
        law = IncrementLaw.symmetric(math.sqrt(horizon / k))
        return DriverSpec(grid, (law,) * k, (zero,) * k, mode="rademacher")
    if mode == "gaussian_coupled":
        ks = skeleton_steps if skeleton_steps is not None else max(256, k)
        if ks % k:
            raise InvalidArgument(f"skeleton_steps={ks} is not a multiple of k={k}")
        law = IncrementLaw.binomial_walk(ks // k, math.sqrt(horizon / ks))
        return DriverSpec(grid, (law,) * k, (zero,) * k, mode="gaussian_coupled", skeleton_steps=ks)
    raise InvalidArgument(f"unknown driver mode {mode!r}")


def make_jump_driver(k: int, horizon: float = 1.0, mark_scale: float = 1.0) -> DriverSpec:
    """Pure-jump driver: every step jumps by ``+-mark_scale / sqrt(k)``."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidArgument(f"k must be a positive integer, got {k!r}")
    if not mark_scale > 0:
        raise InvalidArgument("mark_scale must be positive (a zero jump driver is degenerate)")
    grid = GridSpec(int(k), float(horizon))
    law = IncrementLaw.symmetric(mark_scale / math.sqrt(k))
    return DriverSpec(grid, (IncrementLaw.zero(),) * k, (law,) * k, mode="jump")


def make_mixed_driver(k: int, horizon: float = 1.0, jump_share: float = 0.5) -> DriverSpec:
    """Independent coin ``X_c`` and coin-jump ``X_j`` splitting variance ``horizon/k``."""
    if not 0 <= jump_share <= 1:
        raise InvalidArgument("jump_share must lie in [0, 1]")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidArgument(f"k must be a positive integer, got {k!r}")
    grid = GridSpec(int(k), float(horizon))
    h = horizon / k
    cl = IncrementLaw.symmetric(math.sqrt((1 - jump_share) * h))
    jl = IncrementLaw.symmetric(math.sqrt(jump_share * h))
    return DriverSpec(grid, (cl,) * k, (jl,) * k, mode="mixed")


@dataclass(frozen=True, eq=False)
class Characteristics:
    """Deterministic characteristics on the grid; step ``j`` sits at index ``j-1``.

    ``nu[j-1]`` are the compensator weights ``nu({t_j} x {x_l})`` of the
    nonzero marks ``marks[j-1]``; ``K = nu / dC`` (empty when ``dC == 0``).
    """

    times: np.ndarray
    C: np.ndarray
    dC: np.ndarray
    c: np.ndarray
    zeta: np.ndarray
    marks: tuple
    nu: tuple
    cont_var: np.ndarray

    @property
    def steps(self) -> int:
        return self.dC.size

    def kernel(self, j: int):
        """``(marks, K-weights)`` of step ``j``."""
        dC = self.dC[j - 1]
        if dC == 0:
            return self.marks[j - 1][:0], self.nu[j - 1][:0]
        return self.marks[j - 1], self.nu[j - 1] / dC

    def kernel_integral(self, g, j: int) -> float:
        marks, w = self.kernel(j)
        if w.size == 0:
            return 0.0
        return float(np.asarray(g(marks), dtype=float) @ w)

    def nu_integral(self, g, j: int) -> float:
        nu = self.nu[j - 1]
        if nu.size == 0:
            return 0.0
        return float(np.asarray(g(self.marks[j - 1]), dtype=float) @ nu)

    def max_marks(self) -> int:
        return max((m.shape[0] for m in self.marks), default=0)


def characteristics(d: DriverSpec) -> Characteristics:
    k = d.steps
    dC = np.empty(k)
    zeta = np.empty(k)
    cont_var = np.empty(k)
    c = np.empty(k) if d.p == 1 else np.empty((k, d.p, d.p))
    marks, nus = [], []
    for j in range(k):
        cl, jl = d.cont_laws[j], d.jump_laws[j]
        sc = cl.second_moment()
        nz = np.any(jl.marks != 0, axis=1)
        m, nu = jl.marks[nz], jl.probs[nz]
        jump_tr = float(nu @ np.sum(m * m, axis=1))
        dC[j] = np.trace(sc) + jump_tr
        cont_var[j] = np.trace(sc)
        zeta[j] = nu.sum()
        if d.p == 1:
            c[j] = math.sqrt(sc[0, 0] / dC[j]) if dC[j] > 0 else 0.0
        else:
            if dC[j] > 0:
                w, v = np.linalg.eigh(sc / dC[j])
                c[j] = (v * np.sqrt(np.clip(w, 0, None))) @ v.T
            else:
                c[j] = 0.0
        m.setflags(write=False)
        marks.append(m)
        nus.append(nu)
    C = np.concatenate([[0.0], np.cumsum(dC)])
    return Characteristics(d.grid.times, C, dC, c, zeta, tuple(marks), tuple(nus), cont_var)


# ---------------------------------------------------------------------------
# exact filtrations


class _Graph:
    """Common layout of the exact backends.

    Depth ``j`` has ``n_nodes[j]`` nodes.  For ``j >= 1`` the joint atoms of
    step ``j`` are ``atom_prob[j]`` (``(B,)``), ``atom_dxc[j]``/``atom_dxj[j]``
    (``(B, players)``) and ``atom_mark[j]`` (``(B, players)``);
    ``children[j]`` maps ``(parent, atom)`` to the node index at depth ``j``.
    """

    steps: int
    players: int

    def path_nodes(self, atoms: np.ndarray) -> np.ndarray:
        """Node indices along paths given the atom drawn at each step."""
        S = atoms.shape[0]
        nodes = np.zeros((S, self.steps + 1), dtype=np.int64)
        for j in range(1, self.steps + 1):
            nodes[:, j] = self.children[j][nodes[:, j - 1], atoms[:, j - 1]]
        return nodes


def _joint_atoms(d: DriverSpec, j: int, players: int):
    probs, dxc, dxj, mark = d.step_atoms(j)
    if d.p != 1 or d.n != 1:
        raise InvalidArgument("exact backends support p = n = 1 only")
    b = probs.size
    if players == 1:
        return probs.copy(), dxc[:, :1].copy(), dxj[:, :1].copy(), mark[:, None].copy()
    idx = np.indices((b,) * players).reshape(players, -1).T  # (B, N), player 0 slowest
    jp = np.prod(probs[idx], axis=1)
    return jp, dxc[idx, 0], dxj[idx, 0], mark[idx]


class ScenarioTree(_Graph):
    """Exact joint tree over ``players`` independent copies of one driver."""

    def __init__(self, d: DriverSpec, players: int, max_nodes: int = 10**6):
        if players < 1:
            raise InvalidArgument("players must be positive")
        self.driver = d
        self.steps = d.steps
        self.players = int(players)
        branching = [d.step_atoms(j)[0].size ** players for j in range(1, d.steps + 1)]
        leaves = 1
        for b in branching:
            leaves *= b
        if leaves > max_nodes:
            raise CapacityError(
                f"scenario tree needs {leaves} leaves, budget is {max_nodes}",
                required=leaves, budget=max_nodes)
        self.branching = tuple(branching)
        self.n_nodes = [1]
        self.atom_prob, self.atom_dxc, self.atom_dxj, self.atom_mark = [None], [None], [None], [None]
        self.children = [None]
        self.node_prob = [np.ones(1)]
        self.state_c = [np.zeros((1, players))]
        self.state_j = [np.zeros((1, players))]
        for j in range(1, self.steps + 1):
            p, dxc, dxj, mark = _joint_atoms(d, j, players)
            B = p.size
            n_prev = self.n_nodes[-1]
            self.atom_prob.append(p)
            self.atom_dxc.append(dxc)
            self.atom_dxj.append(dxj)
            self.atom_mark.append(mark)
            self.children.append(np.arange(n_prev * B, dtype=np.int64).reshape(n_prev, B))
            self.node_prob.append(np.outer(self.node_prob[-1], p).ravel())
            self.state_c.append((self.state_c[-1][:, None, :] + dxc[None]).reshape(-1, players))
            self.state_j.append((self.state_j[-1][:, None, :] + dxj[None]).reshape(-1, players))
            self.n_nodes.append(n_prev * B)

    @property
    def leaves(self) -> int:
        return self.n_nodes[-1]

    def leaf_paths(self):
        """Every root-to-leaf path: ``(nodes (S, k+1), atoms (S, k), weights)``."""
        S = self.leaves
        nodes = np.empty((S, self.steps + 1), dtype=np.int64)
        atoms = np.empty((S, self.steps), dtype=np.int64)
        leaf = np.arange(S, dtype=np.int64)
        div = 1
        for j in range(self.steps, -1, -1):
            nodes[:, j] = leaf // div
            if j >= 1:
                atoms[:, j - 1] = nodes[:, j] % self.branching[j - 1]
                div *= self.branching[j - 1]
        return nodes, atoms, self.node_prob[-1].copy()


def build_tree(d: DriverSpec, players: int = 1, max_nodes: int = 10**6) -> ScenarioTree:
    return ScenarioTree(d, players, max_nodes)


class RecombiningLattice(_Graph):
    """Single-player filtration with nodes merged by ``(X_c, X_j)`` value.

    With independent increments the conditional law of the future depends on
    the present only through the current state, so every Markov functional of
    the driver lives exactly on this lattice.
    """

    players = 1

    def __init__(self, d: DriverSpec, max_nodes: int = 10**6, decimals: int = 11):
        self.driver = d
        self.steps = d.steps
        self.n_nodes = [1]
        self.atom_prob, self.atom_dxc, self.atom_dxj, self.atom_mark = [None], [None], [None], [None]
        self.children = [None]
        self.node_prob = [np.ones(1)]
        self.state_c = [np.zeros((1, 1))]
        self.state_j = [np.zeros((1, 1))]
        total = 1
        for j in range(1, self.steps + 1):
            p, dxc, dxj, mark = _joint_atoms(d, j, 1)
            n_prev = self.n_nodes[-1]
            cand_c = (self.state_c[-1][:, None, 0] + dxc[None, :, 0]).ravel()
            cand_j = (self.state_j[-1][:, None, 0] + dxj[None, :, 0]).ravel()
            key = np.stack([np.round(cand_c, decimals), np.round(cand_j, decimals)], axis=1)
            uniq, inv = np.unique(key, axis=0, return_inverse=True)
            inv = inv.ravel()
            n_new = uniq.shape[0]
            total += n_new
            if total > max_nodes:
                raise CapacityError(f"lattice exceeds node budget {max_nodes}",
                                    required=total, budget=max_nodes)
            # representative exact states (first occurrence) rather than rounded keys
            first = np.full(n_new, -1, dtype=np.int64)
            order = np.arange(inv.size)[::-1]
            first[inv[order]] = order
            prob = np.bincount(inv, weights=(self.node_prob[-1][:, None] * p[None]).ravel(),
                               minlength=n_new)
            self.atom_prob.append(p)
            self.atom_dxc.append(dxc)
            self.atom_dxj.append(dxj)
            self.atom_mark.append(mark)
            self.children.append(inv.reshape(n_prev, p.size).astype(np.int64))
            self.node_prob.append(prob)
            self.state_c.append(cand_c[first][:, None])
            self.state_j.append(cand_j[first][:, None])
            self.n_nodes.append(n_new)


def build_lattice(d: DriverSpec, max_nodes: int = 10**6) -> RecombiningLattice:
    return RecombiningLattice(d, max_nodes)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """``n_particles`` i.i.d. driver paths.

    ``atoms[s, j-1]`` is the joint single-player atom (see
    :meth:`DriverSpec.step_atoms`) realised by particle ``s`` at step ``j``;
    ``xc``/``xj`` are the running driver values on the grid.
    """

    driver: DriverSpec
    n_particles: int
    seed: int
    atoms: np.ndarray
    xc: np.ndarray
    xj: np.ndarray
    rng: dict = field(default_factory=dict)


def _block_key(seed: int, block: int):
    return np.array([seed & 0xFFFFFFFFFFFFFFFF, block], dtype=np.uint64)


def _sample_block(d: DriverSpec, seed: int, block: int, size: int) -> np.ndarray:
    k = d.steps
    gen = np.random.Generator(np.random.Philox(key=_block_key(seed, block)))
    atoms = np.empty((size, k), dtype=np.int64)
    if d.mode == "gaussian_coupled":
        ks = d.skeleton_steps
        skel = gen.standard_normal((size, ks))
        ups = (skel > 0).reshape(size, k, ks // k).sum(axis=2)
        u_jump = gen.random((size, k))
        for j in range(k):
            jl = d.jump_laws[j]
            ij = np.minimum(np.searchsorted(np.cumsum(jl.probs), u_jump[:, j], side="right"), jl.size - 1)
            atoms[:, j] = ups[:, j] * jl.size + ij
        return atoms
    u = gen.random((size, k, 2))
    for j in range(k):
        cl, jl = d.cont_laws[j], d.jump_laws[j]
        ic = np.minimum(np.searchsorted(np.cumsum(cl.probs), u[:, j, 0], side="right"), cl.size - 1)
        ij = np.minimum(np.searchsorted(np.cumsum(jl.probs), u[:, j, 1], side="right"), jl.size - 1)
        atoms[:, j] = ic * jl.size + ij
    return atoms


def sample_ensemble(d: DriverSpec, n: int, seed: int, threads: int = 1) -> ParticleEnsemble:
    """Draw ``n`` i.i.d. paths.

    Particle ``s`` always comes from Philox key ``(seed, s // ENSEMBLE_BLOCK)``
    so the output is bitwise identical for any ``threads``.  In
    ``gaussian_coupled`` mode the fine skeleton signs only depend on
    ``(seed, particle, skeleton_steps)``, which couples drivers across ``k``.
    """
    if n < 1:
        raise InvalidArgument("n must be positive")
    seed = int(seed)
    blocks = [(b, min(ENSEMBLE_BLOCK, n - b * ENSEMBLE_BLOCK))
              for b in range(-(-n // ENSEMBLE_BLOCK))]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda bs: _sample_block(d, seed, *bs), blocks))
    else:
        parts = [_sample_block(d, seed, *bs) for bs in blocks]
    atoms = np.concatenate(parts, axis=0)
    xc = np.zeros((n, d.steps + 1))
    xj = np.zeros((n, d.steps + 1))
    for j in range(1, d.steps + 1):
        _, dxc, dxj, _ = d.step_atoms(j)
        xc[:, j] = xc[:, j - 1] + dxc[atoms[:, j - 1], 0]
        xj[:, j] = xj[:, j - 1] + dxj[atoms[:, j - 1], 0]
    return ParticleEnsemble(d, n, seed, atoms, xc, xj,
                            rng={"generator": "philox", "seed": seed, "block": ENSEMBLE_BLOCK})
