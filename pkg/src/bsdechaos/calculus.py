"""Weights, norms, the jump functional and the contraction constant.

Everything here is a pure function of immutable inputs.  Steps are 1-based
(``j = 1..k``), arrays indexed by step store step ``j`` at position ``j-1``,
arrays indexed by grid time store ``t_j`` at position ``j``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .drivers import Characteristics, DriverSpec, characteristics
from .errors import InvalidArgument

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# generators, Theta, terminal conditions


def _as_coeff(v) -> Callable:
    if callable(v):
        return v
    v = float(v)
    return lambda t: np.full(np.shape(t), v) if np.ndim(t) else v


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """``f(t, y, z, u, mean, second)`` with the law entering through summaries.

    ``z`` is ``Z c`` and ``u`` is ``Gamma(U)``; ``mean``/``second`` are the
    first two moments of the law argument.  All arguments broadcast.
    ``lipschitz`` holds ``(r, theta_c, theta_j, theta_law)`` as constants or
    functions of ``t``.
    """

    fn: Callable
    lipschitz: tuple
    family: str = "custom"
    uses_second_moment: bool = False
    params: dict = field(default_factory=dict)

    def __call__(self, t, y, z, u, mean, second):
        return self.fn(t, y, z, u, mean, second)

    def coefficients(self, t):
        return tuple(np.asarray(_as_coeff(c)(t), dtype=float) for c in self.lipschitz)

    @property
    def is_zero(self) -> bool:
        return self.family == "linear" and all(self.params[n] == 0 for n in ("a", "bz", "bu", "e", "c0"))


def linear_generator(a=0.0, bz=0.0, bu=0.0, e=0.0, c0=0.0) -> GeneratorSpec:
    """``f = a*y + bz*z + bu*u + e*mean(mu) + c0``.

    The Lipschitz coefficients follow from Cauchy-Schwarz over the ``m``
    nonzero slopes: ``|sum c_i d_i|^2 <= m sum c_i^2 d_i^2``, together with
    ``|mean(mu) - mean(mu')| <= W_2(mu, mu')``.
    """
    slopes = (a, bz, bu, e)
    m = sum(1 for s in slopes if s != 0) or 1
    lip = tuple(m * s * s for s in slopes)

    def fn(t, y, z, u, mean, second):
        return a * y + bz * z + bu * u + e * mean + c0

    return GeneratorSpec(fn, lip, family="linear",
                         params={"a": a, "bz": bz, "bu": bu, "e": e, "c0": c0})


@dataclass(frozen=True, eq=False)
class ThetaSpec:
    fn: Callable = lambda t, x: x
    name: str = "identity"

    def __call__(self, t, x):
        return self.fn(t, x)

    def check(self, ch: Characteristics):
        """Largest ratio ``|Theta| / |I|`` over all kernel atoms (must be <= 1)."""
        worst = 0.0
        for j in range(1, ch.steps + 1):
            marks = ch.marks[j - 1]
            if marks.size == 0:
                continue
            x = marks[:, 0] if marks.shape[1] == 1 else marks
            absI = np.linalg.norm(marks, axis=1) + np.all(marks == 0, axis=1)
            th = np.abs(np.asarray(self.fn(ch.times[j], x), dtype=float))
            worst = max(worst, float(np.max(th / absI)))
        return worst


THETAS = {
    "identity": ThetaSpec(lambda t, x: x, "identity"),
    "zero": ThetaSpec(lambda t, x: 0.0 * x, "zero"),
    "tanh": ThetaSpec(lambda t, x: np.tanh(x), "tanh"),
    "clip": ThetaSpec(lambda t, x: np.clip(x, -0.5, 0.5), "clip"),
}


def _const_payoff(v):
    return lambda xc, xj: np.full(np.shape(xc), v)


PAYOFFS = {
    "zero": lambda xc, xj: 0.0 * xc,
    "identity": lambda xc, xj: xc + 0.0 * xj,
    "jump": lambda xc, xj: xj + 0.0 * xc,
    "sum": lambda xc, xj: xc + xj,
    "square": lambda xc, xj: xc * xc,
    "cos": lambda xc, xj: np.cos(xc),
    "tanh": lambda xc, xj: np.tanh(xc + xj),
    "exp": lambda xc, xj: np.exp(xc),
    "expexp": lambda xc, xj: np.exp(np.exp(3.0 * (xc + xj))),
}


def payoff(name: str) -> Callable:
    if name.startswith("const:"):
        return _const_payoff(float(name.split(":", 1)[1]))
    try:
        return PAYOFFS[name]
    except KeyError:
        raise InvalidArgument(f"unknown terminal payoff {name!r}") from None


@dataclass(frozen=True, eq=False)
class TerminalSpec:
    """``xi^i = g(X^i_T)`` and ``xi^{i,N} = xi^i + N^-gamma * kappa * mean_{j!=i}(X^j_T)``.

    ``X_T`` stands for ``X_c,T + X_j,T``; the mean over an empty set is 0.
    """

    name: str = "identity"
    kappa: float = 0.0
    gamma: float = 1.0

    @property
    def g(self) -> Callable:
        return payoff(self.name)

    def single(self, xc, xj):
        return self.g(xc, xj)

    def system(self, xc: np.ndarray, xj: np.ndarray) -> np.ndarray:
        """Terminal values for players along the last axis."""
        base = self.g(xc, xj)
        N = xc.shape[-1]
        if self.kappa == 0 or N == 1:
            return base
        tot = (xc + xj).sum(axis=-1, keepdims=True)
        others = (tot - (xc + xj)) / (N - 1)
        return base + N ** (-self.gamma) * self.kappa * others


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True, eq=False)
class WeightProcess:
    alpha_sq: np.ndarray
    A: np.ndarray
    dA: np.ndarray
    Phi: float
    Abar_check: float


def weight_process(g: GeneratorSpec, ch: Characteristics) -> WeightProcess:
    t = ch.times[1:]
    r, tc, tj, ts = g.coefficients(t)
    alpha_sq = np.maximum.reduce([np.sqrt(r), tc, tj, np.sqrt(ts)]) * np.ones_like(t)
    dA = alpha_sq * ch.dC
    A = np.concatenate([[0.0], np.cumsum(dA)])
    Phi = float(dA.max()) if dA.size else 0.0
    return WeightProcess(alpha_sq, A, dA, Phi, float(A[-1]))


def stochastic_exponential(A, beta: float) -> np.ndarray:
    """``E(beta A)`` of a pure-step nondecreasing ``A`` given on the grid.

    ``E(beta A)_t = exp(beta A_t) * prod_{s<=t} (1 + beta dA_s) exp(-beta dA_s)``,
    which collapses to ``prod (1 + beta dA_s)`` for a pure-step ``A``; the
    literal form is kept so that ``E <= exp(beta A)`` is visible.
    """
    A = np.asarray(A, dtype=float)
    if beta < 0:
        raise InvalidArgument("beta must be nonnegative")
    dA = np.diff(A, prepend=A[0])
    if np.any(dA < 0):
        raise InvalidArgument("A must be nondecreasing")
    x = beta * dA
    log_e = beta * (A - A[0]) + np.cumsum(np.log1p(x) - x)
    return np.exp(log_e)


def left_weights(w: WeightProcess, beta: float) -> np.ndarray:
    """``E(beta A)_{t_j -}`` for steps ``j = 1..k`` (equal to ``E`` at ``t_{j-1}``)."""
    return stochastic_exponential(w.A, beta)[:-1]


# ---------------------------------------------------------------------------
# contraction constant


def contraction_constant(beta: float, phi: float = 0.0) -> float:
    if not beta > 0:
        raise InvalidArgument("beta must be positive")
    s = 2.0 * math.sqrt(2.0 / beta + 9.0) * math.sqrt(2.0 / beta + 17.0)
    return (s + 4.0 / beta + 35.0) / beta + (s + 4.0 / beta + 26.0) * phi


def _minform_objective(gamma, beta, phi):
    w = 1.0 + gamma * phi
    return 9.0 / beta + 8.0 * w / gamma + (2.0 + 9.0 * beta) / (beta - gamma) * w * w / gamma


def contraction_constant_minform(beta: float, phi: float = 0.0, rtol: float = 1e-10):
    """Minimise the defining expression over ``gamma in (0, beta)`` by golden section.

    Returns ``(value, argmin)``.
    """
    if not beta > 0:
        raise InvalidArgument("beta must be positive")
    lo, hi = 1e-9 * beta, beta * (1.0 - 1e-9)
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = _minform_objective(c, beta, phi), _minform_objective(d, beta, phi)
    while (b - a) > rtol * (abs(c) + abs(d)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _minform_objective(c, beta, phi)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = _minform_objective(d, beta, phi)
    x = 0.5 * (a + b)
    return _minform_objective(x, beta, phi), x


def admissible_beta(target: float = 0.25, lo: float = 1.0, hi: float = 1e6) -> float:
    """Smallest ``beta`` with ``M(beta, 0) < target`` (bisection; M is decreasing)."""
    while hi - lo > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if contraction_constant(mid) < target:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# the jump functional and the jump seminorm


def _on_marks(U, ch: Characteristics, j: int) -> np.ndarray:
    marks = ch.marks[j - 1]
    if callable(U):
        x = marks[:, 0] if marks.shape[1] == 1 else marks
        vals = np.asarray(U(x), dtype=float)
    else:
        vals = np.asarray(U, dtype=float)
    if vals.shape[0] != marks.shape[0] or not np.all(np.isfinite(vals)):
        raise InvalidArgument(f"U is not defined on every atom of the kernel at step {j}")
    return vals


def gamma(U, theta: ThetaSpec, ch: Characteristics, j: int):
    """``int (U - U^)(Th - Th^) K + (1 - zeta) dC int U K int Th K`` at step ``j``.

    ``U`` is a callable on marks or its values on ``ch.marks[j-1]`` (trailing
    axes allowed for vector-valued ``U``).
    """
    marks, K = ch.kernel(j)
    if K.size == 0:
        return 0.0
    u = _on_marks(U, ch, j)
    th = np.asarray(theta(ch.times[j], marks[:, 0] if marks.shape[1] == 1 else marks), dtype=float)
    dC, zeta = ch.dC[j - 1], ch.zeta[j - 1]
    nu = ch.nu[j - 1]
    u_hat = np.tensordot(nu, u, axes=(0, 0))
    th_hat = float(nu @ th)
    centred = np.tensordot(K * (th - th_hat), u - u_hat, axes=(0, 0))
    return centred + (1.0 - zeta) * dC * np.tensordot(K, u, axes=(0, 0)) * float(K @ th)


def tnorm_sq(U, ch: Characteristics, j: int) -> float:
    """``int |U - U^|^2 K + (1 - zeta) dC |int U K|^2`` at step ``j``."""
    marks, K = ch.kernel(j)
    if K.size == 0:
        return 0.0
    u = _on_marks(U, ch, j)
    u_hat = np.tensordot(ch.nu[j - 1], u, axes=(0, 0))
    dev = u - u_hat
    sq = np.sum(dev.reshape(dev.shape[0], -1) ** 2, axis=1)
    uk = np.tensordot(K, u, axes=(0, 0))
    return float(K @ sq + (1.0 - ch.zeta[j - 1]) * ch.dC[j - 1] * np.sum(np.square(uk)))


def gamma_rows(U: np.ndarray, theta_vals: np.ndarray, nu: np.ndarray, dC: float) -> np.ndarray:
    """Vectorised jump functional for a stack of ``U`` rows ``(S, m)`` (scalar ``U``).

    Algebraically equal to :func:`gamma`; written in covariance form
    ``(sum U Th nu - U^ Th^) / dC``.
    """
    if nu.size == 0 or dC == 0:
        return np.zeros(U.shape[0])
    u_hat = U @ nu
    return (U @ (nu * theta_vals) - u_hat * float(nu @ theta_vals)) / dC


def tnorm_sq_rows(U: np.ndarray, nu: np.ndarray, dC: float) -> np.ndarray:
    """Vectorised jump seminorm times nothing: returns ``|||U|||^2`` per row."""
    if nu.size == 0 or dC == 0:
        return np.zeros(U.shape[0])
    u_hat = U @ nu
    return ((U * U) @ nu - u_hat * u_hat) / dC


# ---------------------------------------------------------------------------
# standard data and norms


@dataclass(frozen=True, eq=False)
class StandardData:
    driver: DriverSpec
    generator: GeneratorSpec
    terminal: TerminalSpec
    theta: ThetaSpec
    beta_hat: float
    ch: Characteristics = None
    weight: WeightProcess = None

    def __post_init__(self):
        if self.ch is None:
            object.__setattr__(self, "ch", characteristics(self.driver))
        if self.weight is None:
            object.__setattr__(self, "weight", weight_process(self.generator, self.ch))

    @property
    def steps(self) -> int:
        return self.driver.steps

    @property
    def times(self) -> np.ndarray:
        return self.ch.times


def make_standard_data(driver, generator=None, terminal=None, theta=None, beta_hat=240.0) -> StandardData:
    return StandardData(driver,
                        generator if generator is not None else linear_generator(),
                        terminal if terminal is not None else TerminalSpec(),
                        theta if theta is not None else THETAS["identity"],
                        float(beta_hat))


@dataclass(frozen=True)
class NormReport:
    y_sup: float
    y_alpha: float
    z: float
    u: float
    m: float

    @property
    def y(self) -> float:
        return self.y_sup + self.y_alpha

    @property
    def total(self) -> float:
        return self.y_sup + self.y_alpha + self.z + self.u + self.m

    def as_dict(self) -> dict:
        return {"y_sup": self.y_sup, "y_alpha": self.y_alpha, "z": self.z, "u": self.u,
                "m": self.m, "total": self.total}


def star_norm_rows(sol, w: WeightProcess, ch: Characteristics, beta: float) -> np.ndarray:
    """Per-path contributions ``(S, 5)`` to the five star-norm components."""
    k = ch.steps
    if sol.Y.shape[1] != k + 1 or w.alpha_sq.size != k:
        raise InvalidArgument("solution, weights and characteristics use different grids")
    E = stochastic_exponential(w.A, beta)
    El = E[:-1]
    y2 = sol.Y ** 2
    sup_terms = np.concatenate([E[None, :k] * y2[:, :k], (El[-1] * y2[:, k])[:, None]], axis=1)
    out = np.empty((sol.Y.shape[0], 5))
    out[:, 0] = sup_terms.max(axis=1)
    out[:, 1] = y2[:, 1:] @ (El * w.alpha_sq * ch.dC)
    out[:, 2] = (sol.Z ** 2) @ (El * ch.cont_var)
    u_rows = np.zeros_like(sol.Z)
    for j in range(1, k + 1):
        nu = ch.nu[j - 1]
        if nu.size and ch.dC[j - 1] > 0:
            Uj = sol.U[:, j - 1, :nu.size]
            u_hat = Uj @ nu
            u_rows[:, j - 1] = (Uj * Uj) @ nu - u_hat * u_hat
    out[:, 3] = u_rows @ El
    out[:, 4] = (sol.dM ** 2) @ El
    return out


def star_norm_sq(sol, w: WeightProcess, ch: Characteristics, beta: float) -> NormReport:
    """Weighted norms of a path-level solution (or solution difference).

    Expectations are weighted sums over ``sol.weights``: exact on trees,
    empirical on sampled paths.  The ``M`` part uses realised squared
    increments, whose expectation equals that of the predictable bracket.
    The ``U`` part uses ``|||U|||^2 dC``.
    """
    tot = sol.weights @ star_norm_rows(sol, w, ch, beta)
    return NormReport(*(float(x) for x in tot))


# ---------------------------------------------------------------------------
# assumption validation


@dataclass
class ValidationReport:
    entries: list = field(default_factory=list)

    def add(self, assumption: str, status: str, witness):
        self.entries.append({"assumption": assumption, "status": status, "witness": witness})

    @property
    def passed(self) -> bool:
        return all(e["status"] != "fail" for e in self.entries)

    def failed(self) -> list:
        return [e["assumption"] for e in self.entries if e["status"] == "fail"]

    def status(self, assumption: str) -> str:
        for e in self.entries:
            if e["assumption"] == assumption:
                return e["status"]
        raise KeyError(assumption)

    def to_json(self) -> str:
        return json.dumps(self.entries, indent=2, sort_keys=True)


def _terminal_moment(sd: StandardData, max_nodes: int = 200_000):
    """``E[E(beta A)_{T-} |xi|^2]`` over the exact single-player terminal law."""
    from .drivers import RecombiningLattice  # local: avoid building unless needed

    lat = RecombiningLattice(sd.driver, max_nodes=max_nodes)
    xi = sd.terminal.single(lat.state_c[-1][:, 0], lat.state_j[-1][:, 0])
    weight = stochastic_exponential(sd.weight.A, sd.beta_hat)[-2]
    with np.errstate(over="ignore", invalid="ignore"):
        return float(weight * (lat.node_prob[-1] @ (np.asarray(xi, dtype=float) ** 2)))


def _sampled_lipschitz(sd: StandardData, n: int = 2000, seed: int = 0) -> float:
    """Largest observed ratio of the B4 inequality (<= 1 means no violation)."""
    rng = np.random.default_rng(seed)
    t = rng.choice(sd.times[1:], n)
    a = rng.normal(size=(8, n)) * 3.0
    g = sd.generator
    m1, m2 = a[6], a[7]
    s1 = m1 ** 2 + rng.random(n)
    s2 = m2 ** 2 + rng.random(n)
    lhs = (g(t, a[0], a[1], a[2], m1, s1) - g(t, a[3], a[4], a[5], m2, s2)) ** 2
    r, tc, tj, ts = g.coefficients(t)
    # W_2 between the summarised laws: two Gaussians with matching moments
    sd1, sd2 = np.sqrt(s1 - m1 ** 2), np.sqrt(s2 - m2 ** 2)
    w2 = (m1 - m2) ** 2 + (sd1 - sd2) ** 2 if g.uses_second_moment else (m1 - m2) ** 2
    rhs = r * (a[0] - a[3]) ** 2 + tc * (a[1] - a[4]) ** 2 + tj * (a[2] - a[5]) ** 2 + ts * w2
    ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 1e-20, np.inf, 0.0))
    return float(np.max(ratio))


def validate_standard_data(sd: StandardData) -> ValidationReport:
    rep = ValidationReport()
    ch, w, d = sd.ch, sd.weight, sd.driver

    # B1: zero-mean laws are enforced by IncrementLaw; check E[dXc | mark] = 0
    worst = 0.0
    for j in range(1, d.steps + 1):
        probs, dxc, _, mark = d.step_atoms(j)
        for l in np.unique(mark):
            sel = mark == l
            worst = max(worst, float(np.max(np.abs(probs[sel] @ dxc[sel]))))
    rep.add("B1", "pass" if worst <= 1e-12 else "fail",
            {"construction": "i.i.d. copies of one independent-increment driver",
             "max_conditional_mean_dXc_given_mark": worst})

    xi_moment = _terminal_moment(sd)
    rep.add("B2", "pass" if math.isfinite(xi_moment) else "fail",
            {"weighted_terminal_second_moment": xi_moment if math.isfinite(xi_moment) else str(xi_moment)})

    th = sd.theta.check(ch)
    rep.add("B3", "pass" if th <= 1.0 + 1e-12 else "fail", {"max_ratio_theta_over_I": th})

    if sd.generator.family == "linear":
        rep.add("B4", "pass", {"method": "exact for the linear family",
                               "coefficients": [float(np.max(c)) for c in sd.generator.coefficients(ch.times[1:])]})
    else:
        ratio = _sampled_lipschitz(sd)
        rep.add("B4", "sampled-pass" if ratio <= 1.0 + 1e-9 else "fail",
                {"method": "sampled", "max_ratio": ratio})

    rep.add("B5", "pass" if np.all(w.dA <= w.Phi + 1e-15) else "fail",
            {"Phi": w.Phi, "max_dA": float(w.dA.max()) if w.dA.size else 0.0})

    f0 = np.asarray(sd.generator(ch.times[1:], 0.0, 0.0, 0.0, 0.0, 0.0), dtype=float) * np.ones(d.steps)
    El = left_weights(w, sd.beta_hat)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(f0 == 0, 0.0, f0 ** 2 / w.alpha_sq)
    b6 = float(np.sum(El * dens * ch.dC))
    rep.add("B6", "pass" if math.isfinite(b6) else "fail", {"integral": b6 if math.isfinite(b6) else str(b6)})

    M = contraction_constant(sd.beta_hat, w.Phi)
    rep.add("B7", "pass" if 3.0 * M < 1.0 else "fail", {"M_tilde": M, "three_M": 3.0 * M})

    M0 = contraction_constant(sd.beta_hat, 0.0)
    rep.add("S9.ii", "pass" if M0 < 0.25 else "fail", {"M_tilde_0": M0})

    rep.add("S8", "pass", {"method": "structural: holds for built-in families"}
            if sd.generator.family == "linear" else {"method": "structural: not checkable for custom generators"})
    return rep
