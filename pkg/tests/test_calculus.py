import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bsdechaos.calculus import (THETAS, TerminalSpec, admissible_beta, contraction_constant,
                                contraction_constant_minform, gamma, gamma_rows, linear_generator,
                                make_standard_data, payoff, stochastic_exponential, tnorm_sq, tnorm_sq_rows,
                                validate_standard_data, weight_process)
from bsdechaos.drivers import characteristics, make_donsker_driver, make_mixed_driver
from bsdechaos.errors import InvalidArgument

from conftest import random_driver


def test_contraction_constant_values():
    # [PAPER] closed form at beta = 240 and 400 with Phi = 0
    assert abs(contraction_constant(240.0) - 0.24906) < 1e-4
    assert abs(contraction_constant(400.0) - 0.14939) < 1e-4
    # [DERIVED] hand evaluation of the closed form
    assert math.isclose(contraction_constant(1.0), 67.91366458963, rel_tol=1e-10)


@given(st.floats(5.0, 5000.0), st.floats(0.0, 1e-3))
def test_minform_matches_closed_form(beta, phi):
    M = contraction_constant(beta, phi)
    Mmin, g = contraction_constant_minform(beta, phi)
    assert 0 < g < beta
    assert abs(M - Mmin) <= 1e-6 * M


def test_contraction_constant_monotone_and_admissible():
    betas = np.geomspace(1, 1e4, 50)
    vals = [contraction_constant(b) for b in betas]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    b = admissible_beta(0.25)
    assert contraction_constant(b) < 0.25 <= contraction_constant(b * (1 - 1e-6))
    with pytest.raises(InvalidArgument):
        contraction_constant(0.0)


@given(st.lists(st.floats(0.0, 0.5), min_size=1, max_size=30), st.floats(0.0, 50.0))
def test_stochastic_exponential_below_exponential(dA, beta):
    A = np.concatenate([[0.0], np.cumsum(dA)])
    E = stochastic_exponential(A, beta)
    # [DERIVED] E(beta A) = prod (1 + beta dA) <= exp(beta A), and E is nondecreasing
    assert np.all(E <= np.exp(beta * A) * (1 + 1e-12))
    np.testing.assert_allclose(E, np.cumprod(np.concatenate([[1.0], 1 + beta * np.asarray(dA)])), rtol=1e-10)
    assert np.all(np.diff(E) >= -1e-12 * E[1:])


def test_stochastic_exponential_rejects_decreasing():
    with pytest.raises(InvalidArgument):
        stochastic_exponential([0.0, 1.0, 0.5], 1.0)


@given(st.integers(0, 2**32 - 1))
def test_gamma_lipschitz(seed):
    rng = np.random.default_rng(seed)
    d = random_driver(rng)
    ch = characteristics(d)
    theta = THETAS[["identity", "tanh", "clip", "zero"][seed % 4]]
    for j in range(1, d.steps + 1):
        m = ch.nu[j - 1].size
        U1, U2 = rng.normal(size=m) * 3, rng.normal(size=m) * 3
        lhs = (gamma(U1, theta, ch, j) - gamma(U2, theta, ch, j)) ** 2
        assert lhs <= 2.0 * tnorm_sq(U1 - U2, ch, j) + 1e-12


@given(st.integers(0, 2**32 - 1))
def test_vectorised_forms_agree(seed):
    rng = np.random.default_rng(seed)
    d = random_driver(rng)
    ch = characteristics(d)
    for j in range(1, d.steps + 1):
        nu = ch.nu[j - 1]
        if nu.size == 0:
            continue
        U = rng.normal(size=(5, nu.size))
        th = THETAS["tanh"](0.0, ch.marks[j - 1][:, 0])
        # [DERIVED] covariance form equals the kernel form
        rows = gamma_rows(U, th, nu, ch.dC[j - 1])
        ref = [gamma(u, THETAS["tanh"], ch, j) for u in U]
        np.testing.assert_allclose(rows, ref, atol=1e-10)
        np.testing.assert_allclose(tnorm_sq_rows(U, nu, ch.dC[j - 1]),
                                   [tnorm_sq(u, ch, j) for u in U], atol=1e-10)


def test_gamma_rejects_partial_u():
    ch = characteristics(make_mixed_driver(2))
    with pytest.raises(InvalidArgument):
        gamma(np.array([1.0]), THETAS["identity"], ch, 1)


def test_linear_generator_and_weights():
    g = linear_generator(a=0.2, e=0.1, c0=1.0)
    # [TRIVIAL] f = a y + e mean + c0
    assert g(0.0, 2.0, 0.0, 0.0, 3.0, 0.0) == pytest.approx(1.7)
    # [DERIVED] two nonzero slopes: Lipschitz coefficients 2 s^2
    np.testing.assert_allclose([float(c) for c in g.coefficients(0.0)], [0.08, 0.0, 0.0, 0.02])
    ch = characteristics(make_donsker_driver(4))
    w = weight_process(g, ch)
    # [DERIVED] alpha^2 = max(sqrt(r), theta_c, theta_j, sqrt(theta_law)) = sqrt(0.08)
    np.testing.assert_allclose(w.alpha_sq, math.sqrt(0.08))
    assert w.Phi == pytest.approx(math.sqrt(0.08) / 4)


def test_terminal_system_coupling():
    t = TerminalSpec("sum", kappa=2.0, gamma=1.0)
    xc = np.array([[1.0, 2.0, 3.0]])
    xj = np.zeros_like(xc)
    # [DERIVED] xi^i = x_i + N^-1 kappa mean_{j != i} x_j
    np.testing.assert_allclose(t.system(xc, xj), [[1 + 2 / 3 * 2.5, 2 + 2 / 3 * 2.0, 3 + 2 / 3 * 1.5]])
    with pytest.raises(InvalidArgument):
        payoff("nope")
    assert payoff("const:2.5")(np.zeros(3), np.zeros(3)).tolist() == [2.5] * 3


def test_validation_report():
    sd = make_standard_data(make_donsker_driver(16), linear_generator(a=1e-4, c0=1.0))
    rep = validate_standard_data(sd)
    assert rep.passed, rep.to_json()
    bad = make_standard_data(make_donsker_driver(4), linear_generator(a=50.0), beta_hat=1.0)
    rep = validate_standard_data(bad)
    assert not rep.passed and "B7" in rep.failed()
