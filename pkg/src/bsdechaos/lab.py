"""Data sequences and the (k, N) convergence sweeps.

Every sweep cell is a pure function of ``(seed, k, N, rep)``: particle pools
are drawn from Philox streams keyed by ``(seed, rep)`` only, so the same
particles (and, in ``gaussian_coupled`` mode, the same fine skeleton) are
reused across ``k`` and ``N``.  A pool of ``n`` particles is cut into
``n // N`` worlds of ``N`` players.  Results therefore do not depend on the
number of worker threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calculus import (THETAS, StandardData, TerminalSpec, contraction_constant, linear_generator,
                       make_standard_data, star_norm_rows, stochastic_exponential, validate_standard_data)
from .drivers import make_donsker_driver, make_jump_driver, make_mixed_driver, sample_ensemble
from .engine.picard import Backend, _iterate, _Runner
from .engine.solution import SolutionProcesses, own_generator
from .errors import InvalidArgument, ValidationFailure
from .measures import EmpiricalMeasure, embed_step_path, w2_sq

CSV_COLUMNS = ("k", "N", "rep", "seed", "err_star_sq", "err_y_sup_sq", "err_mart_L2", "norm_M_sq",
               "w2_terminal_sq", "var_diag", "picard_q", "runtime_ms")


def derive_seed(seed: int, *ids: int) -> int:
    """64-bit seed for a sub-stream, a pure function of ``(seed, *ids)``."""
    s = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, ids)]).generate_state(2, np.uint32)
    return int(s[0]) | (int(s[1]) << 32)


# ---------------------------------------------------------------------------
# data sequences


@dataclass(frozen=True)
class DataSequenceSpec:
    ks: tuple = (4, 8, 16, 32)
    mode: str = "gaussian_coupled"
    horizon: float = 1.0
    skeleton_steps: int | None = None
    jump_share: float = 0.5
    mark_scale: float = 1.0
    generator: dict = field(default_factory=dict)
    terminal: TerminalSpec = TerminalSpec()
    theta: str = "identity"
    beta_hat: float = 240.0

    def driver(self, k: int):
        if self.mode == "gaussian_coupled":
            ks = self.skeleton_steps or max(max(self.ks), 256)
            return make_donsker_driver(k, self.horizon, "gaussian_coupled", ks)
        if self.mode in ("rademacher", "independent"):
            return make_donsker_driver(k, self.horizon, "rademacher")
        if self.mode == "mixed":
            return make_mixed_driver(k, self.horizon, self.jump_share)
        if self.mode == "jump":
            return make_jump_driver(k, self.horizon, self.mark_scale)
        raise InvalidArgument(f"unknown driver mode {self.mode!r}")


def build_data_sequence(spec: DataSequenceSpec, strict: bool = True) -> list:
    """One validated :class:`StandardData` per ``k`` (ascending)."""
    if not spec.ks or any(k < 1 for k in spec.ks):
        raise InvalidArgument("k values must be positive")
    if spec.theta not in THETAS:
        raise InvalidArgument(f"unknown Theta family {spec.theta!r}")
    out = []
    for k in sorted(set(spec.ks)):
        sd = make_standard_data(spec.driver(k), linear_generator(**spec.generator), spec.terminal,
                                THETAS[spec.theta], spec.beta_hat)
        rep = validate_standard_data(sd)
        if strict and not rep.passed:
            raise ValidationFailure(f"k={k}: assumption(s) {', '.join(rep.failed())} failed", rep)
        out.append(sd)
    return out


def sequence_digest(seq) -> list:
    """Per-``k`` assumption digest including the S9 check ``Phi^k -> 0``."""
    rows = []
    phis = [sd.weight.Phi for sd in seq]
    for sd in seq:
        rep = validate_standard_data(sd)
        M = contraction_constant(sd.beta_hat, sd.weight.Phi)
        rows.append({"k": sd.steps, "passed": rep.passed, "failed": rep.failed(), "Phi": sd.weight.Phi,
                     "M_tilde": M, "b7_margin": 1.0 - 3.0 * M, "A_bar": sd.weight.Abar_check})
    rows.append({"S9.i_Phi_nonincreasing": bool(all(b <= a + 1e-15 for a, b in zip(phis, phis[1:])))})
    return rows


# ---------------------------------------------------------------------------
# statistics


def slope(rows, x_col=None, y_col=None):
    """Least-squares slope of ``log y`` against ``log x`` and its standard error.

    ``rows`` is a sequence of mappings (then ``x_col``/``y_col`` name the
    columns) or of ``(x, y)`` pairs.
    """
    if x_col is not None:
        xs = np.array([float(r[x_col]) for r in rows])
        ys = np.array([float(r[y_col]) for r in rows])
    else:
        arr = np.asarray(rows, dtype=float)
        xs, ys = arr[:, 0], arr[:, 1]
    if xs.size < 3:
        raise InvalidArgument("slope needs at least 3 rows")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidArgument("slope needs positive values")
    lx, ly = np.log(xs), np.log(ys)
    X = np.stack([np.ones_like(lx), lx], axis=1)
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    resid = ly - X @ coef
    dof = xs.size - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    se = math.sqrt(s2 / sxx) if sxx > 0 else float("inf")
    return float(coef[1]), se


def _mean_se(v):
    v = np.asarray(v, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


@dataclass
class ConvergenceMatrix:
    """Sweep rows plus a JSON-able summary."""

    rows: list
    summary: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(_jsonable(self.summary), indent=2, sort_keys=True)

    @property
    def ks(self):
        return sorted({r["k"] for r in self.rows})

    @property
    def Ns(self):
        return sorted({r["N"] for r in self.rows})

    def cell(self, k, N, col="err_star_sq"):
        v = [r[col] for r in self.rows if r["k"] == k and r["N"] == N]
        if not v:
            raise KeyError((k, N))
        return _mean_se(v)

    def matrix(self, col="err_y_sup_sq"):
        ks, Ns = self.ks, self.Ns
        mean = np.full((len(ks), len(Ns)), np.nan)
        se = np.full_like(mean, np.nan)
        for a, k in enumerate(ks):
            for b, N in enumerate(Ns):
                try:
                    mean[a, b], se[a, b] = self.cell(k, N, col)
                except KeyError:
                    pass
        return ks, Ns, mean, se

    def diagonal(self, col="err_y_sup_sq"):
        ks, Ns, mean, se = self.matrix(col)
        n = min(len(ks), len(Ns))
        return [(ks[i], Ns[i], mean[i, i], se[i, i]) for i in range(n)]


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else str(f)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


# ---------------------------------------------------------------------------
# solvers on the lattice


@dataclass
class _LatticeMV:
    runner: _Runner
    state: object
    q: int

    def paths(self, atoms: np.ndarray) -> SolutionProcesses:
        g = self.runner.solver.g
        nodes = g.path_nodes(atoms)
        w = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
        return self.runner.solver.to_paths(self.state, nodes, atoms, w, 0, "lattice")

    def law(self, j: int) -> EmpiricalMeasure:
        g = self.runner.solver.g
        p = g.node_prob[j]
        keep = p > 0
        y = self.state.Y[j][keep, 0]
        return EmpiricalMeasure(y, p[keep] / p[keep].sum())


@dataclass
class _LatticeMF:
    runner: _Runner
    state: object
    q: int

    def paths(self, world_atoms: np.ndarray) -> SolutionProcesses:
        return self.runner.solver.world_paths(self.state, world_atoms)


def _solve_mv(sd: StandardData, tol: float, q_max: int) -> _LatticeMV:
    runner = _Runner(sd, Backend("lattice", n_particles=16), 1, "mv")
    _, st = _iterate(runner, tol, q_max)
    return _LatticeMV(runner, st.iterate, st.q)


def _solve_mf(sd: StandardData, N: int, tol: float, q_max: int) -> _LatticeMF:
    runner = _Runner(sd, Backend("additive", n_particles=N), N, "empirical")
    _, st = _iterate(runner, tol, q_max)
    return _LatticeMF(runner, st.iterate, st.q)


def _pmap(fn, items, threads: int):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _pool_atoms(sd: StandardData, n: int, seed: int, rep: int) -> np.ndarray:
    return sample_ensemble(sd.driver, n, derive_seed(seed, rep)).atoms


# ---------------------------------------------------------------------------
# diagnostics


def variation_diagnostic(sol_mf: SolutionProcesses, sol_mv: SolutionProcesses, sd: StandardData) -> float:
    """Mean square of the total variation of the difference of the generator integrals.

    Both integrals are step functions on the grid, so the total variation
    of their difference is ``sum_j |f^N_j - f_j| dC_j`` along each path.
    """
    d = own_generator(sol_mf, sd) - own_generator(sol_mv, sd)
    tv = np.abs(d) @ sd.ch.dC
    return float(sol_mf.weights @ (tv * tv))


def _terminal_w2(a: np.ndarray, b: np.ndarray) -> float:
    return w2_sq(EmpiricalMeasure.uniform(a), EmpiricalMeasure.uniform(b))


def _sup_sq_on(fine_times, Ya, ta, Yb, tb):
    ea = embed_step_path(Ya, ta, fine_times)
    eb = embed_step_path(Yb, tb, fine_times)
    return np.max((ea - eb) ** 2, axis=1)


def _chaos_bound(sd: StandardData, mf: SolutionProcesses, mv_law, mv_paths: SolutionProcesses, N: int):
    """Right-hand side of the system-average propagation-of-chaos inequality.

    Uses the i.i.d. McKean-Vlasov paths of each world as the reference
    empirical measure and the exact lattice law of the McKean-Vlasov
    solution.
    """
    w = sd.weight
    M = contraction_constant(sd.beta_hat, w.Phi)
    if 3.0 * M >= 1.0:
        return float("nan"), float("nan")
    E = stochastic_exponential(w.A, sd.beta_hat)
    k = sd.steps
    c1 = (26.0 + 2.0 / sd.beta_hat + (9.0 * sd.beta_hat + 2.0) * w.Phi) / (1.0 - 3.0 * M)
    c2 = 2.0 * M / (1.0 - 3.0 * M) / sd.beta_hat
    term = float(E[k - 1] * np.mean((mf.xi - mv_paths.xi) ** 2))
    dE = np.diff(E)
    n_worlds = mv_paths.Y.shape[0] // N
    integral = 0.0
    for j in range(1, k + 1):
        if dE[j - 1] == 0:
            continue
        law = mv_law(j)
        ys = mv_paths.Y[:, j].reshape(n_worlds, N)
        w2 = np.mean([w2_sq(EmpiricalMeasure.uniform(y), law) for y in ys])
        integral += w2 * dE[j - 1]
    return c1 * term + c2 * integral, integral


def _law_w2_sup(mv: _LatticeMV, mv_paths: SolutionProcesses, N: int, k: int) -> float:
    n_worlds = mv_paths.Y.shape[0] // N
    best = 0.0
    for j in range(k + 1):
        law = mv.law(j)
        ys = mv_paths.Y[:, j].reshape(n_worlds, N)
        best = max(best, float(np.mean([w2_sq(EmpiricalMeasure.uniform(y), law) for y in ys])))
    return best


# ---------------------------------------------------------------------------
# sweeps


def chaos_sweep(sd: StandardData, Ns, reps: int = 20, seed: int = 0, threads: int = 1,
                pool_size: int | None = None, tol: float = 1e-24, q_max: int = 60,
                timing: bool = False, law_checks: bool = True) -> ConvergenceMatrix:
    """``N``-player systems against i.i.d. McKean-Vlasov copies on the same paths.

    ``err_star_sq`` is the system average ``(1/N) sum_i`` of the squared
    star norm of the difference, estimated over a pool of ``pool_size``
    particles per repetition (default ``max(Ns)``).
    """
    Ns = sorted(set(int(n) for n in Ns))
    if not Ns or Ns[0] < 1:
        raise InvalidArgument("N values must be positive")
    pool = pool_size or Ns[-1]
    if pool < Ns[-1]:
        raise InvalidArgument("pool smaller than the largest N")
    k = sd.steps
    t0 = time.perf_counter()
    mv = _solve_mv(sd, tol, q_max)
    mfs = dict(zip(Ns, _pmap(lambda N: _solve_mf(sd, N, tol, q_max), Ns, threads)))
    t_solve = time.perf_counter() - t0

    def cell(args):
        N, rep = args
        c0 = time.perf_counter()
        atoms = _pool_atoms(sd, pool, seed, rep)
        W = pool // N
        used = atoms[:W * N]
        mf = mfs[N].paths(used.reshape(W, N, k))
        mvp = mv.paths(used)
        diff = mf - mvp
        comps = star_norm_rows(diff, sd.weight, sd.ch, sd.beta_hat)
        own = star_norm_rows(mf, sd.weight, sd.ch, sd.beta_hat)
        row = {
            "k": k, "N": N, "rep": rep, "seed": derive_seed(seed, rep),
            "err_star_sq": float(comps.sum(axis=1).mean()),
            "err_y_sup_sq": float(np.mean(np.max(diff.Y ** 2, axis=1))),
            "err_mart_L2": float(np.mean(diff.martingale_part ** 2)),
            "norm_M_sq": float(own[:, 4].mean()),
            "w2_terminal_sq": _terminal_w2(mf.Y[:, -1], mvp.Y[:, -1]),
            "var_diag": variation_diagnostic(mf, mvp, sd),
            "picard_q": mfs[N].q,
        }
        extra = {}
        if law_checks:
            bound, integral = _chaos_bound(sd, mf, mv.law, mvp, N)
            extra = {"bound": bound, "law_w2_integral": integral,
                     "law_w2_sup": _law_w2_sup(mv, mvp, N, k)}
        row["runtime_ms"] = int(round(1000 * (time.perf_counter() - c0))) if timing else 0
        return row, extra

    cells = [(N, rep) for N in Ns for rep in range(reps)]
    results = _pmap(cell, cells, threads)
    rows = [r for r, _ in results]
    cm = ConvergenceMatrix(rows)
    per_N = {}
    for (N, _), (r, extra) in zip(cells, results):
        per_N.setdefault(N, {"err": [], "bound_ok": [], "law_w2_sup": []})
        per_N[N]["err"].append(r["err_star_sq"])
        if extra:
            per_N[N]["bound_ok"].append(bool(r["err_star_sq"] <= extra["bound"]) if math.isfinite(extra["bound"]) else None)
            per_N[N]["law_w2_sup"].append(extra["law_w2_sup"])
    means = [(N, _mean_se(v["err"])[0]) for N, v in per_N.items()]
    summary = {"k": k, "reps": reps, "pool": pool, "seed": seed, "Ns": Ns,
               "err_star_sq": {N: _mean_se(v["err"]) for N, v in per_N.items()},
               "mv_picard_q": mv.q, "solve_seconds": t_solve if timing else 0.0}
    if len(means) >= 3 and all(m > 0 for _, m in means):
        summary["slope_err_star_sq_vs_N"] = slope(means)
    if law_checks:
        summary["chaos_bound_holds"] = {N: v["bound_ok"] for N, v in per_N.items()}
        lw = [(N, float(np.mean(v["law_w2_sup"]))) for N, v in per_N.items()]
        summary["law_w2_sup"] = dict(lw)
        if len(lw) >= 3 and all(m > 0 for _, m in lw):
            summary["slope_law_w2_sup_vs_N"] = slope(lw)
    cm.summary = summary
    return cm


def _check_coupled(seq):
    for sd in seq:
        if sd.driver.mode != "gaussian_coupled":
            raise InvalidArgument("stability sweeps need gaussian_coupled drivers")
    if len({sd.driver.skeleton_steps for sd in seq}) != 1:
        raise InvalidArgument("all drivers of a stability sweep must share one skeleton")


def stability_sweep(seq, reference_k: int | None = None, tol: float = 1e-24, seed: int = 0,
                    reps: int = 1, n_paths: int = 2000, threads: int = 1, q_max: int = 60,
                    mean_field_N: int | None = None, timing: bool = False) -> ConvergenceMatrix:
    """Each ``k`` against the finest grid on coupled paths.

    With ``mean_field_N`` the ``N``-player systems are compared instead of
    the McKean-Vlasov solutions (the mean-field stability variant).
    """
    seq = sorted(seq, key=lambda sd: sd.steps)
    _check_coupled(seq)
    by_k = {sd.steps: sd for sd in seq}
    ref_k = reference_k or seq[-1].steps
    if ref_k not in by_k:
        raise InvalidArgument(f"reference k={ref_k} is not in the sequence")
    N = mean_field_N or 1
    if mean_field_N:
        sols = dict(zip(by_k, _pmap(lambda sd: _solve_mf(sd, N, tol, q_max), by_k.values(), threads)))
    else:
        sols = dict(zip(by_k, _pmap(lambda sd: _solve_mv(sd, tol, q_max), by_k.values(), threads)))
    ref_sd = by_k[ref_k]
    fine = ref_sd.times
    n = n_paths - n_paths % N

    def paths(k, rep):
        atoms = _pool_atoms(by_k[k], n, seed, rep)
        if mean_field_N:
            return sols[k].paths(atoms.reshape(n // N, N, k))
        return sols[k].paths(atoms)

    def cell(args):
        k, rep = args
        c0 = time.perf_counter()
        sd = by_k[k]
        sol = paths(k, rep)
        ref = paths(ref_k, rep)
        sup = _sup_sq_on(fine, sol.Y, sd.times, ref.Y, fine)
        own = star_norm_rows(sol, sd.weight, sd.ch, sd.beta_hat)
        qv = np.concatenate([np.zeros((sol.Y.shape[0], 1)), np.cumsum(np.diff(sol.Y) ** 2, axis=1)], axis=1)
        qv_ref = np.concatenate([np.zeros((ref.Y.shape[0], 1)), np.cumsum(np.diff(ref.Y) ** 2, axis=1)], axis=1)
        qv_sup = np.sqrt(_sup_sq_on(fine, qv, sd.times, qv_ref, fine))
        row = {
            "k": k, "N": N, "rep": rep, "seed": derive_seed(seed, rep),
            "err_star_sq": float("nan"),
            "err_y_sup_sq": float(sup.mean()),
            "err_mart_L2": float(np.mean((sol.martingale_part - ref.martingale_part) ** 2)),
            "norm_M_sq": float(own[:, 4].mean()),
            "w2_terminal_sq": _terminal_w2(sol.Y[:, -1], ref.Y[:, -1]),
            "var_diag": float("nan"),
            "picard_q": sols[k].q,
            "runtime_ms": 0,
        }
        extra = {"qv_sup_mean": float(qv_sup.mean()), "qv_j1_mean": float(np.minimum(qv_sup, 1).mean()),
                 "y_sup_tail_R8": float(np.mean(np.max(sol.Y ** 2, axis=1)
                                                * (np.max(np.abs(sol.Y), axis=1) > 8.0)))}
        if timing:
            row["runtime_ms"] = int(round(1000 * (time.perf_counter() - c0)))
        return row, extra

    cells = [(k, rep) for k in by_k for rep in range(reps)]
    results = _pmap(cell, cells, threads)
    cm = ConvergenceMatrix([r for r, _ in results])
    ks = list(by_k)
    errs = {k: _mean_se([r["err_y_sup_sq"] for r in cm.rows if r["k"] == k]) for k in ks}
    summary = {"reference_k": ref_k, "N": N, "reps": reps, "n_paths": n, "seed": seed,
               "err_y_sup_sq": errs,
               "bracket_distances": {k: {"qv_sup_mean": float(np.mean([e["qv_sup_mean"] for (kk, _), (_, e) in zip(cells, results) if kk == k])),
                                         "qv_j1_mean": float(np.mean([e["qv_j1_mean"] for (kk, _), (_, e) in zip(cells, results) if kk == k]))}
                                     for k in ks},
               "assumptions": sequence_digest(seq)}
    coarse = [(k, errs[k][0]) for k in ks if k != ref_k]
    if len(coarse) >= 3 and all(v > 0 for _, v in coarse):
        summary["slope_err_y_sup_sq_vs_k"] = slope(coarse)
    cm.summary = summary
    return cm


def double_sweep(seq, Ns, reps: int = 10, seed: int = 0, threads: int = 1, tol: float = 1e-24,
                 q_max: int = 60, pool_size: int | None = None, timing: bool = False,
                 include_reference: bool = False) -> ConvergenceMatrix:
    """Full ``(k, N)`` grid of ``N``-player errors against the finest-``k`` McKean-Vlasov solution.

    The reference grid itself is solved but, unless ``include_reference``,
    not emitted as a row: against itself it only measures the chaos error
    and would trivially hold the matrix minimum.
    """
    seq = sorted(seq, key=lambda sd: sd.steps)
    _check_coupled(seq)
    Ns = sorted(set(int(n) for n in Ns))
    by_k = {sd.steps: sd for sd in seq}
    ref_k = seq[-1].steps
    ref_sd = by_k[ref_k]
    pool = pool_size or Ns[-1]
    fine = ref_sd.times
    mvs = dict(zip(by_k, _pmap(lambda sd: _solve_mv(sd, tol, q_max), by_k.values(), threads)))
    row_ks = [k for k in by_k if include_reference or k != ref_k or len(by_k) == 1]
    pairs = [(k, N) for k in row_ks for N in Ns]
    mfs = dict(zip(pairs, _pmap(lambda kn: _solve_mf(by_k[kn[0]], kn[1], tol, q_max), pairs, threads)))
    mvs = {k: v for k, v in mvs.items() if k in row_ks or k == ref_k}

    def cell(args):
        k, N, rep = args
        c0 = time.perf_counter()
        sd = by_k[k]
        W = pool // N
        atoms = _pool_atoms(sd, pool, seed, rep)[:W * N]
        ref_atoms = _pool_atoms(ref_sd, pool, seed, rep)[:W * N]
        mf = mfs[(k, N)].paths(atoms.reshape(W, N, k))
        mv = mvs[k].paths(atoms)
        ref = mvs[ref_k].paths(ref_atoms)
        sup = _sup_sq_on(fine, mf.Y, sd.times, ref.Y, fine)
        chaos = star_norm_rows(mf - mv, sd.weight, sd.ch, sd.beta_hat).sum(axis=1)
        own = star_norm_rows(mf, sd.weight, sd.ch, sd.beta_hat)
        row = {
            "k": k, "N": N, "rep": rep, "seed": derive_seed(seed, rep),
            "err_star_sq": float(chaos.mean()),
            "err_y_sup_sq": float(sup.mean()),
            "err_mart_L2": float(np.mean((mf.martingale_part - ref.martingale_part) ** 2)),
            "norm_M_sq": float(own[:, 4].mean()),
            "w2_terminal_sq": _terminal_w2(mf.Y[:, -1], ref.Y[:, -1]),
            "var_diag": variation_diagnostic(mf, mv, sd),
            "picard_q": mfs[(k, N)].q,
            "runtime_ms": int(round(1000 * (time.perf_counter() - c0))) if timing else 0,
        }
        j1 = float(np.mean(np.minimum(np.sqrt(sup), 1.0) ** 2))
        return row, j1

    cells = [(k, N, rep) for k in row_ks for N in Ns for rep in range(reps)]
    results = _pmap(cell, cells, threads)
    cm = ConvergenceMatrix([r for r, _ in results])
    ks, Ns_, mean, se = cm.matrix("err_y_sup_sq")
    j1 = {}
    for (k, N, _), (_, v) in zip(cells, results):
        j1.setdefault(f"{k},{N}", []).append(v)
    cm.summary = {"reference_k": ref_k, "reps": reps, "pool": pool, "seed": seed, "ks": ks, "Ns": Ns_,
                  "err_y_sup_sq_mean": mean, "err_y_sup_sq_se": se,
                  "diagonal": cm.diagonal("err_y_sup_sq"),
                  "j1_path_w2_proxy": {key: float(np.mean(v)) for key, v in j1.items()},
                  "assumptions": sequence_digest(seq)}
    return cm
