import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bsdechaos.drivers import (IncrementLaw, RecombiningLattice, ScenarioTree, characteristics,
                               make_donsker_driver, make_jump_driver, make_mixed_driver, sample_ensemble)
from bsdechaos.errors import CapacityError, InvalidArgument

from conftest import random_driver


def test_rademacher_characteristics():
    d = make_donsker_driver(4, 2.0)
    ch = characteristics(d)
    # [TRIVIAL] bracket clock of a +-sqrt(T/k) walk is t
    np.testing.assert_allclose(ch.C, [0, 0.5, 1.0, 1.5, 2.0])
    np.testing.assert_allclose(ch.cont_var, 0.5)
    assert ch.max_marks() == 0
    np.testing.assert_allclose(ch.zeta, 0.0)


def test_mixed_characteristics():
    d = make_mixed_driver(5, 1.0, jump_share=0.3)
    ch = characteristics(d)
    # [DERIVED] dC = E dXc^2 + E dXj^2 = 1/k; nu = 1/2 per mark; K = nu / dC
    np.testing.assert_allclose(ch.dC, 0.2)
    for j in range(1, 6):
        marks, K = ch.kernel(j)
        np.testing.assert_allclose(ch.nu[j - 1], [0.5, 0.5])
        np.testing.assert_allclose(K, [2.5, 2.5])
        np.testing.assert_allclose(ch.c[j - 1] ** 2 * ch.dC[j - 1], 0.7 * 0.2)


@given(st.integers(0, 2**32 - 1))
def test_disintegration_identity(seed):
    # [DERIVED] c^2 dC + int |x|^2 K dC = dC for every step of every driver
    d = random_driver(np.random.default_rng(seed))
    ch = characteristics(d)
    for j in range(1, d.steps + 1):
        marks, K = ch.kernel(j)
        jump_part = float(K @ np.sum(marks ** 2, axis=1)) * ch.dC[j - 1] if K.size else 0.0
        assert math.isclose(ch.c[j - 1] ** 2 * ch.dC[j - 1] + jump_part, ch.dC[j - 1], rel_tol=1e-10)
        assert 0.0 <= ch.zeta[j - 1] <= 1.0 + 1e-12


def test_increment_law_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        IncrementLaw([1.0, 2.0], [0.5, 0.5])  # not centred
    with pytest.raises(InvalidArgument):
        IncrementLaw([1.0, -1.0], [0.6, 0.6])
    with pytest.raises(InvalidArgument):
        make_donsker_driver(0)
    with pytest.raises(InvalidArgument):
        make_donsker_driver(3, mode="gaussian_coupled", skeleton_steps=8)


def test_binomial_walk_moments():
    law = IncrementLaw.binomial_walk(4, 0.5)
    # [DERIVED] variance of a sum of 4 +-0.5 coins is 1
    assert math.isclose(float(law.second_moment()[0, 0]), 1.0)


def test_tree_probabilities_and_capacity():
    d = make_mixed_driver(3)
    t = ScenarioTree(d, players=2)
    # [TRIVIAL] 4 joint atoms per player-step: (4^2)^3 leaves
    assert t.leaves == 16 ** 3
    _, _, w = t.leaf_paths()
    assert math.isclose(w.sum(), 1.0)
    with pytest.raises(CapacityError):
        ScenarioTree(make_donsker_driver(30), 1, max_nodes=1000)


def test_lattice_recombines():
    d = make_donsker_driver(50)
    g = RecombiningLattice(d)
    # [TRIVIAL] a +-h walk occupies j+1 levels at step j
    assert g.n_nodes[-1] == 51
    for j, p in enumerate(g.node_prob):
        assert math.isclose(p.sum(), 1.0)


def test_ensemble_determinism_across_threads():
    d = make_mixed_driver(6)
    a = sample_ensemble(d, 3000, seed=7, threads=1)
    b = sample_ensemble(d, 3000, seed=7, threads=4)
    np.testing.assert_array_equal(a.atoms, b.atoms)
    c = sample_ensemble(d, 3000, seed=8)
    assert not np.array_equal(a.atoms, c.atoms)


def test_gaussian_coupled_paths_agree_on_common_grid():
    ks = 64
    fine = make_donsker_driver(64, mode="gaussian_coupled", skeleton_steps=ks)
    coarse = make_donsker_driver(8, mode="gaussian_coupled", skeleton_steps=ks)
    ef = sample_ensemble(fine, 200, seed=3)
    ec = sample_ensemble(coarse, 200, seed=3)
    # [DERIVED] the coarse walk is the fine walk sampled every 8 steps
    np.testing.assert_allclose(ef.xc[:, ::8], ec.xc, atol=1e-12)


def test_jump_driver_requires_positive_scale():
    with pytest.raises(InvalidArgument):
        make_jump_driver(3, mark_scale=0.0)
