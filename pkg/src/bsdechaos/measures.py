"""Wasserstein-2 distances, the empirical coupling bound and Fournier-Guillin sizing."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from .errors import InsufficientMoments, InvalidArgument

MAX_ASSIGNMENT = 512


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Finitely many weighted atoms; ``points`` has shape ``(n, d)``."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.size or w.size == 0:
            raise InvalidArgument("points and weights must have the same positive length")
        if np.any(w <= 0):
            raise InvalidArgument("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidArgument(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "EmpiricalMeasure":
        pts = np.asarray(points, dtype=float)
        n = pts.shape[0]
        return cls(pts, np.full(n, 1.0 / n))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    def second_moment(self) -> float:
        return float(self.weights @ np.sum(self.points ** 2, axis=1))


def quantile_grid(ppf, m: int) -> EmpiricalMeasure:
    """Uniform measure on the midpoint quantiles ``ppf((i + 1/2) / m)``, a fine proxy for a 1-D law."""
    if m < 1:
        raise InvalidArgument("m must be positive")
    u = (np.arange(m) + 0.5) / m
    return EmpiricalMeasure.uniform(np.asarray(ppf(u), dtype=float)[:, None])


def _is_uniform(m: EmpiricalMeasure) -> bool:
    return bool(np.allclose(m.weights, 1.0 / m.size, rtol=0, atol=1e-15))


def w2_sq(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """Squared W2 distance (see :func:`w2_exact`)."""
    if a.dim != b.dim:
        raise InvalidArgument("measures live in different dimensions")
    if a.dim == 1:
        ia = np.argsort(a.points[:, 0], kind="stable")
        ib = np.argsort(b.points[:, 0], kind="stable")
        return max(0.0, float(kernels.w2_sorted(a.points[ia, 0], a.weights[ia],
                                                 b.points[ib, 0], b.weights[ib])))
    if a.size != b.size or not (_is_uniform(a) and _is_uniform(b)):
        raise InvalidArgument("in dimension > 1 both measures must be uniform on the same number of atoms")
    if a.size > MAX_ASSIGNMENT:
        raise InvalidArgument(f"assignment limited to {MAX_ASSIGNMENT} atoms")
    cost = np.sum((a.points[:, None, :] - b.points[None, :, :]) ** 2, axis=2)
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].mean())


def w2_exact(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """W2 distance: quantile coupling in 1-D, optimal assignment otherwise."""
    return math.sqrt(w2_sq(a, b))


def coupling_bound(xs, ys) -> float:
    """``(1/N) sum |x_i - y_i|^2``, an upper bound on ``W2^2`` of the two empirical laws."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise InvalidArgument("point lists must have equal lengths and dimensions")
    d = (x - y).reshape(x.shape[0], -1)
    return float(np.mean(np.sum(d * d, axis=1)))


# ---------------------------------------------------------------------------
# dyadic annuli


def annulus_index(points: np.ndarray) -> np.ndarray:
    """Index ``m`` of the dyadic shell containing each point.

    Shell 0 is the cube ``(-1, 1]^d``; shell ``m >= 1`` is
    ``(-2^m, 2^m]^d`` minus ``(-2^(m-1), 2^(m-1)]^d``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    # smallest m with every coordinate in (-2^m, 2^m]
    m = np.zeros(pts.shape[0], dtype=np.int64)
    for col in pts.T:
        mc = np.zeros(col.size, dtype=np.int64)
        big = (col > 1) | (col <= -1)
        if np.any(big):
            a = np.abs(col[big])
            e = np.ceil(np.log2(a)).astype(np.int64)
            # right-closed on the positive side, open on the negative side
            e = np.where((col[big] < 0) & (np.exp2(e) == a), e + 1, e)
            mc[big] = np.maximum(e, 1)
        m = np.maximum(m, mc)
    return m


@dataclass(frozen=True)
class MomentTable:
    """``M2[m] = int_{B_m} |x|^2``, ``mass[m] = law(B_m)``, beyond ``m_max`` in the tails."""

    M2: tuple
    mass: tuple
    tail_M2: float
    tail_mass: float

    def tail_after(self, ell: int) -> float:
        return float(sum(self.M2[ell + 1:]) + self.tail_M2)


def fg_moments(law, m_max: int = 40) -> MomentTable:
    if not isinstance(law, EmpiricalMeasure):
        law = EmpiricalMeasure.uniform(law)
    idx = annulus_index(law.points)
    sq = np.sum(law.points ** 2, axis=1)
    inside = idx <= m_max
    M2 = np.bincount(idx[inside], weights=law.weights[inside] * sq[inside], minlength=m_max + 1)
    mass = np.bincount(idx[inside], weights=law.weights[inside], minlength=m_max + 1)
    return MomentTable(tuple(float(v) for v in M2), tuple(float(v) for v in mass),
                       float(law.weights[~inside] @ sq[~inside]), float(law.weights[~inside].sum()))


@dataclass(frozen=True)
class FgReport:
    eps: float
    C_d: float
    R0: float
    dim: int
    eps1: float
    ell1: int
    eps2: float
    ell2: int
    N_eps: int
    moments: tuple = field(default=())

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def fg_sample_size(eps: float, C_d: float = 1.0, R0: float = 1.0, moments: MomentTable | None = None,
                   dim: int = 1, max_level: int = 200) -> FgReport:
    """Sample size after which the dyadic bound is below ``eps``.

    Levels are searched over the naturals starting at 1.  ``N(eps)`` is
    computed in exact rational arithmetic (the inputs are read through their
    shortest decimal representation) except for the square root of ``R0``.
    """
    for name, v in (("eps", eps), ("C_d", C_d), ("R0", R0)):
        if not v > 0:
            raise InvalidArgument(f"{name} must be positive")
    if moments is None:
        moments = MomentTable((0.0,), (1.0,), 0.0, 0.0)
    eps1 = eps / (33.0 * C_d)
    ell1 = None
    for ell in range(1, max_level + 1):
        if ell >= len(moments.M2) and moments.tail_M2 > 0:
            break
        if moments.tail_after(ell) < eps1:
            ell1 = ell
            break
    if ell1 is None:
        raise InsufficientMoments(f"second-moment tail never drops below eps1={eps1:.3g} "
                                  f"within the available {len(moments.M2)} shells")
    eps2 = eps / ((6.0 + 24.0 * ell1 * R0) * C_d)
    # sum_{l > L} 4^-l = 4^-L / 3
    ell2 = 1
    while Fraction(1, 3 * 4 ** ell2) >= Fraction(repr(eps2)):
        ell2 += 1
    fe, fc = Fraction(repr(float(eps))), Fraction(repr(float(C_d)))
    root = math.sqrt(R0)
    fr = Fraction(repr(root)) if root != int(root) else Fraction(int(root))
    val = 9 * fc * fc * 2 ** (dim * ell2 + 2) * (2 ** (ell1 + 1) * ell1 * fr + 1) ** 2 / (fe * fe)
    N = math.floor(val) + 1
    return FgReport(float(eps), float(C_d), float(R0), int(dim), eps1, ell1, eps2, ell2, int(N),
                    moments.M2)


def fg_bound(law, N: int, C_d: float = 1.0, m_max: int = 40, l_max: int = 60) -> dict:
    """Dyadic double series bounding ``E[W2^2(empirical_N, law)]`` up to ``C_d``.

    Returns ``{"bound", "remainder", "m_max", "l_max"}``; ``remainder``
    bounds the omitted shells through ``law(B_m) <= 4^-(m-1) M2(m)`` and the
    omitted levels through ``sum_{l > l_max} 4^-l * 2 law(B_m)``.
    """
    if N < 1:
        raise InvalidArgument("N must be positive")
    if not isinstance(law, EmpiricalMeasure):
        law = EmpiricalMeasure.uniform(law)
    tab = fg_moments(law, m_max)
    d = law.dim
    ls = np.arange(l_max + 1)
    total = 0.0
    rem = 0.0
    for m, pm in enumerate(tab.mass):
        if pm <= 0:
            continue
        terms = np.minimum(2.0 * pm, np.exp2(d * ls / 2.0) * math.sqrt(pm / N))
        total += 4.0 ** m * float(np.sum(4.0 ** (-ls) * terms))
        rem += 4.0 ** m * 2.0 * pm * 4.0 ** (-l_max) / 3.0
    if tab.tail_mass > 0:
        # each omitted shell contributes at most 4^m * 2 law(B_m) * 4/3 <= (8/3) * 4 M2(m)
        rem += (32.0 / 3.0) * tab.tail_M2
    return {"bound": C_d * total, "remainder": C_d * rem, "m_max": m_max, "l_max": l_max,
            "label": "up to C_d"}


def path_distance(a, b, times_a=None, times_b=None):
    """``(sup_t |a_t - b_t|, min(sup, 1))`` for right-continuous step paths.

    Paths given without times are spread uniformly over ``[0, 1]``; with
    times both grids must end at the same horizon.  The sup is taken over the
    union of the two grids.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ta = np.linspace(0.0, 1.0, a.shape[-1]) if times_a is None else np.asarray(times_a, dtype=float)
    tb = np.linspace(0.0, 1.0, b.shape[-1]) if times_b is None else np.asarray(times_b, dtype=float)
    if not math.isclose(ta[-1], tb[-1], rel_tol=1e-12) or ta[0] != tb[0]:
        raise InvalidArgument("paths have incompatible horizons")
    grid = np.union1d(ta, tb)
    ea = embed_step_path(a, ta, grid)
    eb = embed_step_path(b, tb, grid)
    sup = np.max(np.abs(ea - eb), axis=-1)
    return sup, np.minimum(sup, 1.0)


def embed_step_path(values: np.ndarray, times: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Right-continuous step function given on ``times`` evaluated on ``grid``."""
    idx = np.searchsorted(times, grid + 1e-12 * max(1.0, abs(times[-1])), side="right") - 1
    return np.take(values, np.clip(idx, 0, times.size - 1), axis=-1)
