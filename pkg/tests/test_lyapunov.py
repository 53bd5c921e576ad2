from fractions import Fraction

import numpy as np
import pytest

from steadytrunc.lyapunov import (
    LyapunovError,
    LyapunovSpec,
    drift,
    drift_many,
    drift_supremum,
    lyapunov_box,
    symbolic_drift,
)
from steadytrunc.model import MichaelisMenten
from steadytrunc.parser import parse_model
from steadytrunc.polynomial import Polynomial


def test_p53_drift_at_origin(p53):
    assert drift(p53, p53.lyapunov, [0, 0, 0]) == pytest.approx(10800)


def test_p53_symbolic_drift_coefficients(p53):
    sd = symbolic_drift(p53, p53.lyapunov)
    p, pm, m = (Polynomial.variable(3, i) for i in range(3))
    # the pMdm2 coefficient is 0.1 * k5 = 0.093
    expected = 10800 - Fraction(2, 100) * p - Fraction(93, 1000) * pm - Fraction(96, 1000) * m
    assert sd.polynomial == expected
    (coef, law), = sd.custom
    assert isinstance(law, MichaelisMenten)
    assert float(coef * law.k) == pytest.approx(-204, rel=1e-12)
    assert float(law.km) == pytest.approx(0.01)


def test_p53_supremum_exact(p53):
    assert drift_supremum(p53, p53.lyapunov) == 10800


def test_p53_box(p53):
    spec = LyapunovSpec.build(p53, 0.1)
    box = lyapunov_box(p53, spec)
    # c / (0.02 * eps) on the p53 axis
    assert box[0] + 1 == pytest.approx(10800 / (0.02 * 0.1), abs=1)
    assert box[1] + 1 == pytest.approx(10800 / (0.093 * 0.1), abs=1)
    assert box[2] + 1 == pytest.approx(10800 / (0.096 * 0.1), abs=1)


def test_linear_birth_death(bd):
    g = Polynomial.variable(1, 0)
    for x in (0, 7, 300):
        assert drift(bd, g, [x]) == pytest.approx(200 - x)
    assert drift_supremum(bd, g, 1000) == pytest.approx(200)


def test_zero_change_network():
    net = parse_model("species S; S -> S @ mass_action(3);")
    assert drift(net, Polynomial.variable(1, 0) ** 2, [4]) == 0
    assert drift_supremum(net, Polynomial.variable(1, 0) ** 2) == 0


def test_constant_g(bd):
    assert drift_supremum(bd, Polynomial.constant(1, 5)) == 0


def test_growing_drift_rejected():
    net = parse_model("species S; S -> 2*S @ mass_action(1);")
    with pytest.raises(LyapunovError, match="not a valid Lyapunov certificate"):
        drift_supremum(net, Polynomial.variable(1, 0) ** 2)


def test_supremum_bounds_samples(switch, pbd):
    rng = np.random.default_rng(2)
    for net in (switch, pbd):
        c = drift_supremum(net, net.lyapunov)
        x = rng.integers(0, 400, (4000, net.n_species))
        if net.mode_indices:
            combos = np.array(net.mode_values)
            x[:, list(net.mode_indices)] = combos[rng.integers(0, len(combos), len(x))]
        assert drift_many(net, net.lyapunov, x).max() <= c + 1e-9


def test_pbd_box_within_reference(pbd):
    box = lyapunov_box(pbd, LyapunovSpec.build(pbd, 1e-4))
    assert max(box) < 8960


@pytest.mark.parametrize("name", ["pbd", "switch", "p53"])
def test_box_monotone(request, name):
    net = request.getfixturevalue(name)
    loose = lyapunov_box(net, LyapunovSpec.build(net, 0.5))
    tight = lyapunov_box(net, LyapunovSpec.build(net, 0.9))
    assert all(t <= l for t, l in zip(tight, loose))


@pytest.mark.parametrize("name", ["pbd", "switch", "p53"])
def test_outside_box_not_certified(request, name):
    net = request.getfixturevalue(name)
    spec = LyapunovSpec.build(net, 0.01)
    box = np.array(lyapunov_box(net, spec))
    rng = np.random.default_rng(4)
    agg = list(net.aggregated_indices)
    x = rng.integers(0, 3 * box[agg].max() + 10, (5000, net.n_species))
    if net.mode_indices:
        combos = np.array(net.mode_values)
        x[:, list(net.mode_indices)] = combos[rng.integers(0, len(combos), len(x))]
    outside = np.any(x[:, agg] > box[agg], axis=1)
    d = drift_many(net, spec.g, x[outside])
    assert np.all(spec.epsilon_l / spec.c * d <= spec.epsilon_l - 1 + 1e-12)


def test_invalid_epsilon(pbd):
    with pytest.raises(ValueError):
        LyapunovSpec.build(pbd, 1.5)
