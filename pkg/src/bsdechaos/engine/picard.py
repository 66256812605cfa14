"""Picard iteration for McKean-Vlasov equations and mean-field systems."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..calculus import StandardData, contraction_constant, star_norm_sq
from ..drivers import RecombiningLattice, ScenarioTree, sample_ensemble
from ..errors import InvalidArgument, NonContraction, NumericOverflow
from .additive import AdditiveSolver
from .ensemble import EnsembleSolver
from .graph import GraphSolver
from .solution import PicardState, SolutionProcesses, residual_check, zero_solution

BACKENDS = ("tree", "lattice", "ensemble", "additive")


@dataclass(frozen=True)
class Backend:
    """Backend choice and its budget.

    ``n_particles`` is the ensemble size, or the number of sampled paths on
    which lattice solutions are reported (lattice expectations inside the
    solver are exact; only norms are sampled).
    """

    kind: str = "tree"
    max_nodes: int = 10**6
    n_particles: int = 4096
    seed: int = 0
    degree: int = 2
    threads: int = 1

    def __post_init__(self):
        if self.kind not in BACKENDS:
            raise InvalidArgument(f"unknown backend {self.kind!r}; choose from {BACKENDS}")

    @property
    def default_tol(self) -> float:
        return 1e-4 if self.kind == "ensemble" else 1e-10


def _delta(new, old, sd: StandardData) -> float:
    vals = [star_norm_sq(a - b, sd.weight, sd.ch, sd.beta_hat).total for a, b in zip(new, old)]
    return float(np.mean(vals))


class _Runner:
    """Uniform interface: ``zero()``, ``step(state)``, ``paths(state) -> [sol]``."""

    def __init__(self, sd: StandardData, backend: Backend, players: int, law: str):
        self.sd, self.backend, self.players, self.law = sd, backend, players, law
        d = sd.driver
        kind = backend.kind
        if kind == "tree":
            g = ScenarioTree(d, players, backend.max_nodes)
            self.solver = GraphSolver(sd, g, law)
            self.nodes, self.atoms, self.weights = g.leaf_paths()
        elif kind == "lattice":
            if players != 1:
                raise InvalidArgument("the lattice backend solves single-player equations; "
                                      "use 'additive' for linear systems")
            g = RecombiningLattice(d, backend.max_nodes)
            self.solver = GraphSolver(sd, g, law)
            ens = sample_ensemble(d, backend.n_particles, backend.seed, backend.threads)
            self.atoms = ens.atoms
            self.nodes = g.path_nodes(ens.atoms)
            self.weights = np.full(ens.n_particles, 1.0 / ens.n_particles)
        elif kind == "ensemble":
            n = backend.n_particles - backend.n_particles % players
            if n < players:
                raise InvalidArgument("ensemble needs at least one particle per player")
            ens = sample_ensemble(d, n, backend.seed, backend.threads)
            self.solver = EnsembleSolver(sd, ens, players, law, backend.degree)
        else:
            g = RecombiningLattice(d, backend.max_nodes)
            self.solver = AdditiveSolver(sd, g, players)
            worlds = max(1, backend.n_particles // players)
            ens = sample_ensemble(d, worlds * players, backend.seed, backend.threads)
            self.world_atoms = ens.atoms.reshape(worlds, players, d.steps)

    def zero(self):
        return self.solver.zero_state()

    def step(self, st):
        return self.solver.backward(st)

    def paths(self, st) -> list:
        kind = self.backend.kind
        if kind in ("tree", "lattice"):
            return [self.solver.to_paths(st, self.nodes, self.atoms, self.weights, i, kind)
                    for i in range(self.players)]
        if kind == "ensemble":
            return [self.solver.to_paths(st, i) for i in range(self.players)]
        allp = self.solver.world_paths(st, self.world_atoms)
        N = self.players
        W = self.world_atoms.shape[0]
        out = []
        for i in range(N):
            rows = np.arange(i, W * N, N)
            out.append(_take(allp, rows))
        return out

    def delta(self, new, old, new_paths, old_paths) -> float:
        if self.backend.kind == "additive":
            return self.solver.change(new, old)
        return _delta(new_paths, old_paths, self.sd)


def _take(sol: SolutionProcesses, rows: np.ndarray) -> SolutionProcesses:
    w = sol.weights[rows]
    return replace(sol, weights=w / w.sum(), Y=sol.Y[rows], Z=sol.Z[rows], U=sol.U[rows],
                   zx=sol.zx[rows], jump=sol.jump[rows], dM=sol.dM[rows], F=sol.F[rows],
                   gamma=sol.gamma[rows], mu_mean=sol.mu_mean[rows], mu_second=sol.mu_second[rows],
                   xi=sol.xi[rows])


def _iterate(runner: _Runner, tol: float, q_max: int, keep_history: bool = False):
    sd = runner.sd
    M = contraction_constant(sd.beta_hat, sd.weight.Phi)
    st = PicardState(rate_bound=2.0 * M, M_tilde=M, b7_passes=3.0 * M < 1.0, tol=tol,
                     backend=runner.backend.kind)
    cur = runner.zero()
    cur_paths = runner.paths(cur)
    if keep_history:
        st.history.append(cur_paths)
    growth = 0
    for q in range(1, q_max + 1):
        new = runner.step(cur)
        new_paths = runner.paths(new)
        delta = runner.delta(new, cur, new_paths, cur_paths)
        if not math.isfinite(delta):
            raise NumericOverflow(f"Picard difference is not finite at q={q}")
        st.deltas.append(delta)
        st.q = q
        cur, cur_paths = new, new_paths
        if keep_history:
            st.history.append(cur_paths)
        if delta < tol:
            st.converged = True
            break
        if q >= 2 and st.deltas[-2] > 1e-25 and delta > st.deltas[-2]:
            growth += 1
            if growth >= 3 and st.b7_passes:
                raise NonContraction(f"Picard differences grew for 3 consecutive iterations "
                                     f"although 3*M={3 * M:.4g} < 1: {st.deltas[-4:]}")
        else:
            growth = 0
    st.iterate = cur
    st.residual = max(residual_check(s, sd) for s in cur_paths)
    return cur_paths, st


def solve_mckean_vlasov(sd: StandardData, tol: float | None = None, q_max: int = 60,
                        backend: Backend | None = None, keep_history: bool = False):
    """Picard-solve the McKean-Vlasov equation; returns ``(solution, PicardState)``.

    The contraction condition ``3 M < 1`` is reported in the state
    (``b7_passes``) rather than enforced, so that data outside the
    contraction regime can still be run.
    """
    backend = backend or Backend()
    if backend.kind == "additive":
        backend = replace(backend, kind="lattice")
    runner = _Runner(sd, backend, 1, "mv")
    sols, st = _iterate(runner, backend.default_tol if tol is None else tol, q_max, keep_history)
    return sols[0], st


def solve_mean_field(sd: StandardData, N: int, tol: float | None = None, q_max: int = 60,
                     backend: Backend | None = None, keep_history: bool = False):
    """Picard-solve the ``N``-player system; returns ``(list of N solutions, PicardState)``."""
    if N < 1:
        raise InvalidArgument("N must be positive")
    backend = backend or Backend()
    if backend.kind == "lattice":
        raise InvalidArgument("systems need the tree, ensemble or additive backend")
    runner = _Runner(sd, backend, int(N), "empirical")
    return _iterate(runner, backend.default_tol if tol is None else tol, q_max, keep_history)


_RUNNER_CACHE: dict = {}


def picard_iterate_mv(sd: StandardData, prev: SolutionProcesses | None = None,
                      backend: Backend | None = None) -> SolutionProcesses:
    """One explicit Picard pass for the McKean-Vlasov equation.

    ``prev`` must come from this function (it carries the node-level iterate
    in ``meta['iterate']``); ``None`` starts from the zero process.
    """
    backend = backend or Backend()
    key = (id(sd), backend)
    runner = _RUNNER_CACHE.get(key)
    if runner is None or runner.sd is not sd:
        runner = _Runner(sd, backend, 1, "mv")
        _RUNNER_CACHE.clear()
        _RUNNER_CACHE[key] = runner
    state = runner.zero() if prev is None else prev.meta.get("iterate")
    if state is None:
        raise InvalidArgument("prev does not carry a node-level iterate")
    new = runner.step(state)
    sol = runner.paths(new)[0]
    return replace(sol, meta={"iterate": new, "q": (0 if prev is None else prev.meta.get("q", 0)) + 1})


__all__ = ["Backend", "solve_mckean_vlasov", "solve_mean_field", "picard_iterate_mv",
           "residual_check", "zero_solution", "PicardState", "SolutionProcesses"]
