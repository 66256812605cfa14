import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bsdechaos.calculus import TerminalSpec, linear_generator, make_standard_data
from bsdechaos.drivers import make_mixed_driver
from bsdechaos.errors import InvalidArgument, ValidationFailure
from bsdechaos.lab import (CSV_COLUMNS, DataSequenceSpec, build_data_sequence, chaos_sweep, derive_seed,
                           double_sweep, slope, stability_sweep)


@given(st.floats(-3, 3), st.floats(-5, 5))
def test_slope_recovers_power_law(p, logc):
    xs = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    s, se = slope(np.stack([xs, math.exp(logc) * xs ** p], axis=1))
    # [TRIVIAL] exact power law: slope p, zero standard error
    assert s == pytest.approx(p, abs=1e-9)
    assert se < 1e-7


def test_slope_input_checks():
    with pytest.raises(InvalidArgument):
        slope([(1, 1), (2, 2)])
    with pytest.raises(InvalidArgument):
        slope([(1, 1), (2, 0), (3, 1)])


def test_derive_seed_is_pure_and_distinct():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert len({derive_seed(0, r) for r in range(200)}) == 200
    assert derive_seed(0, 1) != derive_seed(1, 0)


def _chaos_sd():
    return make_standard_data(make_mixed_driver(4), linear_generator(e=0.005, c0=1.0), TerminalSpec("sum"))


def test_chaos_sweep_shape_and_determinism():
    sd = _chaos_sd()
    a = chaos_sweep(sd, [4, 8], reps=3, seed=5)
    b = chaos_sweep(sd, [4, 8], reps=3, seed=5, threads=4)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(a.rows) == 6
    assert all(r["runtime_ms"] == 0 for r in a.rows)
    assert a.summary["chaos_bound_holds"][4] == [True, True, True]
    c = chaos_sweep(sd, [4, 8], reps=3, seed=6)
    assert c.to_csv() != a.to_csv()


def test_sequence_validation_is_strict():
    spec = DataSequenceSpec(ks=(2, 4), mode="mixed", generator={"a": 50.0}, beta_hat=1.0)
    with pytest.raises(ValidationFailure):
        build_data_sequence(spec)
    assert len(build_data_sequence(spec, strict=False)) == 2


def test_stability_sweep_small():
    seq = build_data_sequence(DataSequenceSpec(ks=(2, 4, 8, 16), skeleton_steps=16))
    cm = stability_sweep(seq, n_paths=400)
    errs = cm.summary["err_y_sup_sq"]
    vals = [errs[k][0] for k in (2, 4, 8)]
    # [DERIVED] zero generator, xi = X_T: Y is the driver itself, sup error shrinks as k grows
    assert vals[0] > vals[1] > vals[2]
    assert errs[16][0] == 0.0


def test_stability_requires_coupled_sequence():
    seq = build_data_sequence(DataSequenceSpec(ks=(2, 4), mode="rademacher"))
    with pytest.raises(InvalidArgument):
        stability_sweep(seq)


def test_double_sweep_small():
    spec = DataSequenceSpec(ks=(8, 16, 32), skeleton_steps=32, generator={"e": 0.01, "c0": 1.0},
                            terminal=TerminalSpec("identity", kappa=1.0))
    cm = double_sweep(build_data_sequence(spec), [4, 16], reps=2, seed=1)
    ks, Ns, mean, se = cm.matrix()
    assert (ks, Ns) == ([8, 16], [4, 16])
    assert mean.shape == (2, 2) and np.all(np.isfinite(mean))
