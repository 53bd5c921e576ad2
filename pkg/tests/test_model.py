from fractions import Fraction

import numpy as np
import pytest

from steadytrunc.model import MassAction, ModelError, Reaction, ReactionNetwork, Species, propensity
from steadytrunc.parser import ModelSyntaxError, format_model, load_model, parse_model


def test_parse_birth_death(bd_small):
    assert bd_small.n_species == 1
    assert len(bd_small.reactions) == 2
    assert bd_small.reactions[0].rate == MassAction(Fraction(10))
    assert bd_small.reactions[1].change == (-1,)


def test_parse_exclusive_switch(switch):
    assert switch.n_species == 5
    assert len(switch.reactions) == 10
    p = switch.parameters
    assert (p["rho1"], p["rho2"], p["lambda"]) == (Fraction(7, 10), Fraction(3, 5), Fraction(1, 50))
    assert (p["beta"], p["gamma1"], p["gamma2"]) == (Fraction(1, 200), Fraction(3, 50), Fraction(1, 20))
    assert switch.mode_values == ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    assert [switch.names[i] for i in switch.mode_indices] == ["D", "DP1", "DP2"]


@pytest.mark.parametrize("text", ["", "   # only a comment\n"])
def test_empty_input_is_syntax_error(text):
    with pytest.raises(ModelSyntaxError):
        parse_model(text)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("species S;\nS -> 0 @ mass_action(k);", "k"),
        ("species S;\nT -> 0 @ mass_action(1);", "T"),
        ("species S;\nparam k = -1;\nS -> 0 @ mass_action(k);", "negative"),
        ("species S\nS -> 0 @ mass_action(1);", "line"),
    ],
)
def test_errors_report_position(text, fragment):
    with pytest.raises(ModelError) as err:
        parse_model(text)
    assert fragment in str(err.value)


def test_syntax_error_has_line_and_column():
    with pytest.raises(ModelSyntaxError) as err:
        parse_model("species S;\nS -> 0 @ mass_action(1)\n0 -> S @ mass_action(2);")
    assert err.value.line == 3
    assert err.value.column >= 1


def test_propensity_examples(bd_small, pbd):
    net = parse_model("species X; 2*X -> 0 @ mass_action(1);")
    assert propensity(net, 0, [3]) == 3
    assert propensity(pbd, 0, [0, 0]) == 100
    assert propensity(pbd, 0, [57, 3]) == 100
    assert propensity(bd_small, 1, [0]) == 0


def test_insufficient_reactants_give_zero(switch):
    rng = np.random.default_rng(1)
    for j, r in enumerate(switch.reactions):
        consume = np.array(r.consume)
        for _ in range(20):
            x = rng.integers(0, 5, switch.n_species)
            if np.any(x < consume):
                assert propensity(switch, j, x) == 0
                assert switch.propensities(j, x[None, :])[0] == 0


def test_mass_action_monotone():
    net = parse_model("species A, B; 2*A + B -> 0 @ mass_action(3);")
    for a in range(6):
        for b in range(6):
            assert propensity(net, 0, [a + 1, b]) >= propensity(net, 0, [a, b])
            assert propensity(net, 0, [a, b + 1]) >= propensity(net, 0, [a, b])


def test_vectorized_matches_scalar(switch, p53):
    rng = np.random.default_rng(0)
    for net in (switch, p53):
        x = rng.integers(0, 30, (50, net.n_species))
        for j in range(len(net.reactions)):
            vec = net.propensities(j, x)
            assert np.allclose(vec, [propensity(net, j, row) for row in x], rtol=1e-12)


@pytest.mark.parametrize("name", ["birth_death", "parallel_birth_death", "exclusive_switch", "p53"])
def test_round_trip(models_dir, name):
    net = load_model(models_dir / f"{name}.model")
    again = parse_model(format_model(net))
    assert again == net
    assert parse_model(format_model(again)) == again


def test_polynomial_rate_validation():
    with pytest.raises(ModelError):
        parse_model("species S; S -> 0 @ rate(5 - S);")
    net = parse_model("species S; S -> 0 @ rate(S^2 + S);")
    assert propensity(net, 0, [3]) == 12


def test_network_invariants():
    with pytest.raises(ModelError):
        ReactionNetwork((), ())
    with pytest.raises(ModelError):
        ReactionNetwork((Species("A"), Species("A")), (Reaction((0, 0), (1, 0), MassAction(Fraction(1))),))
    with pytest.raises(ModelError):
        Reaction((1,), (0, 1), MassAction(Fraction(1)))
    with pytest.raises(ModelError):
        MassAction(Fraction(-1))
