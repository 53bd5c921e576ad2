import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steadytrunc.aggregation import (
    MacroState,
    Partition,
    build_lumped_generator,
    build_lumped_generator_reference,
    exit_set,
    lumped_rate,
    lumped_rates,
    split,
    transition_set,
)
from steadytrunc.generator import StateIndex, build_generator, inboundary_states
from steadytrunc.oracle import brute_force_lumped_rate
from steadytrunc.parser import parse_model

CUBIC = parse_model(
    """
species A, B, C;
0 -> A @ mass_action(3);
2*A -> B @ mass_action(0.5);
A + B -> C @ mass_action(1.25);
3*C -> A @ mass_action(0.1);
B + 2*C -> 0 @ rate(A^2*B + 2*C + 1);
C -> 0 @ mass_action(2);
"""
)


def enumerate_transition(xi, xk, v):
    return {x for x in xi.micro_states() if xk.contains([a + b for a, b in zip(x, v)])}


def box_states(boxes):
    return {x for b in boxes for x in b.micro_states()}


def test_transition_examples():
    assert transition_set(MacroState((0,), (3,)), MacroState((4,), (7,)), (1,)) == MacroState((3,), (3,))
    xi = MacroState((0, 0), (3, 3))
    assert transition_set(xi, xi, (0, 0)) == xi
    got = transition_set(xi, MacroState((4, 0), (7, 3)), (1, 0))
    assert got == MacroState((3, 0), (3, 3))
    assert transition_set(xi, MacroState((9, 9), (9, 9)), (1, 0)) is None


def test_exit_examples():
    assert exit_set(MacroState((0,), (3,)), (1,)) == [MacroState((3,), (3,))]
    assert exit_set(MacroState((0,), (3,)), (-1,)) == [MacroState((0,), (0,))]
    xi = MacroState((0, 0), (3, 3))
    got = box_states(exit_set(xi, (1, -1)))
    assert got == {x for x in xi.micro_states() if x[0] == 3 or x[1] == 0}


interval = st.tuples(st.integers(0, 8), st.integers(0, 4)).map(lambda t: (t[0], t[0] + t[1]))


@settings(max_examples=300, deadline=None)
@given(
    st.lists(interval, min_size=2, max_size=2),
    st.lists(interval, min_size=2, max_size=2),
    st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
)
def test_sets_match_enumeration(a, b, v):
    xi = MacroState(tuple(p[0] for p in a), tuple(p[1] for p in a))
    xk = MacroState(tuple(p[0] for p in b), tuple(p[1] for p in b))
    got = transition_set(xi, xk, v)
    assert (set(got.micro_states()) if got else set()) == enumerate_transition(xi, xk, v)
    leaving = {x for x in xi.micro_states() if not xi.contains([p + q for p, q in zip(x, v)])}
    pieces = exit_set(xi, v)
    assert box_states(pieces) == leaving
    assert sum(p.volume for p in pieces) == len(leaving)


def test_worked_example_rate():
    net = parse_model("species X; 2*X -> 0 @ mass_action(1);")
    assert lumped_rate(net, 0, MacroState((0,), (3,))) == 4
    net = parse_model("species A; 0 -> A @ mass_action(100);")
    assert lumped_rate(net, 0, MacroState((0,), (15,))) == 1600


def test_p53_coarse_rate_uses_indicator(p53):
    region = MacroState((4, 0, 10), (7, 3, 13))
    # k3 * sum(Mdm2) * |slice|, indicator on p53 >= 1
    expected = 1.7 * (10 + 11 + 12 + 13) * 4 * 4
    assert lumped_rate(p53, 3, region) == pytest.approx(expected)
    unit = MacroState((5, 2, 11), (5, 2, 11))
    assert lumped_rate(p53, 3, unit) == pytest.approx(1.7 * 11 * 5 / 5.01)


def random_cases(net, count, seed, max_width=6, max_lower=2000):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        j = int(rng.integers(len(net.reactions)))
        lo = rng.integers(0, max_lower, net.n_species)
        lo[rng.random(net.n_species) < 0.3] = 0
        hi = lo + rng.integers(0, max_width, net.n_species)
        yield j, MacroState(tuple(int(a) for a in lo), tuple(int(a) for a in hi))


def test_lumped_vs_brute_force_1000_cases():
    nets = [CUBIC, parse_model("species X; 4*X -> 0 @ mass_action(0.3); 0 -> X @ mass_action(2);")]
    count = 0
    for s, net in enumerate(nets):
        for j, region in random_cases(net, 500, s):
            exact = lumped_rate(net, j, region)
            brute = brute_force_lumped_rate(net, j, region)
            vec = lumped_rates(net, j, np.array([region.lower]), np.array([region.upper]))[0]
            assert exact == pytest.approx(brute, rel=1e-10, abs=1e-300)
            # float kernel: cancellation leaves ~1e-17 where the exact sum is zero
            assert vec == pytest.approx(brute, rel=1e-10, abs=1e-12)
            count += 1
    assert count == 1000


def test_faulhaber_vs_naive_large_offsets():
    for j, region in random_cases(CUBIC, 200, 9, max_width=40, max_lower=10**6):
        assert lumped_rate(CUBIC, j, region) == pytest.approx(brute_force_lumped_rate(CUBIC, j, region), rel=1e-10)


@pytest.mark.parametrize("name", ["pbd", "switch"])
def test_sum_preserved_by_split(request, name):
    net = request.getfixturevalue(name)
    part = Partition.grid(net, 3, 3)
    for i in range(len(part)):
        parent = part.cell(i)
        kids = split(parent)
        for j in range(len(net.reactions)):
            total = sum(lumped_rate(net, j, k) for k in kids)
            assert total == pytest.approx(lumped_rate(net, j, parent), rel=1e-10, abs=1e-12)


def test_split_examples():
    kids = split(MacroState((0, 0), (3, 3)))
    assert set(kids) == {
        MacroState((0, 0), (1, 1)),
        MacroState((0, 2), (1, 3)),
        MacroState((2, 0), (3, 1)),
        MacroState((2, 2), (3, 3)),
    }
    assert split(MacroState((5,), (5,))) == [MacroState((5,), (5,))]
    clipped = split(MacroState((0, 0), (2, 3)))
    assert {(k.lower[0], k.upper[0]) for k in clipped} == {(0, 0), (1, 2)}
    assert box_states(clipped) == set(MacroState((0, 0), (2, 3)).micro_states())


def test_model1_two_cells(bd_small):
    part = Partition([[0], [2]], [[1], [3]], [2])
    lg = build_lumped_generator(bd_small, part, reentry=False)
    q = lg.generator.offdiag.toarray()
    assert q[0, 1] == pytest.approx(5)
    assert q[1, 0] == pytest.approx(1)


def test_single_cell_has_only_exits():
    net = parse_model("species A, B; A -> B @ mass_action(1); B -> A @ mass_action(1);")
    part = Partition([[0, 0]], [[1, 1]], [2, 2])
    lg = build_lumped_generator(net, part)
    assert lg.generator.n == 1 and lg.generator.offdiag.nnz == 0
    # only (1,1) leaves, once per direction, at rate 1 each: 2 / volume 4
    assert lg.generator.exit_rates()[0] == pytest.approx(0.5)


def unit_partition(net, cells, exponent):
    part = Partition.grid(net, cells, exponent)
    while not part.is_unit():
        part = part.refine(np.arange(len(part)))
    return part


@pytest.mark.parametrize("name", ["pbd", "switch", "p53"])
def test_unit_granularity_equals_micro(request, name):
    net = request.getfixturevalue(name)
    part = unit_partition(net, 3, 2)
    lg = build_lumped_generator(net, part)
    states = StateIndex(part.lower)
    micro = build_generator(net, states)
    assert abs(lg.generator.offdiag - micro.offdiag).max() <= 1e-12
    assert np.max(np.abs(lg.generator.diagonal() - micro.diagonal())) <= 1e-12
    assert np.array_equal(lg.inboundary, inboundary_states(net, states))


@pytest.mark.parametrize("name", ["pbd", "switch", "p53"])
def test_fast_assembly_matches_reference(request, name):
    net = request.getfixturevalue(name)
    part = Partition.grid(net, 4, 2)
    a = build_lumped_generator(net, part)
    b = build_lumped_generator_reference(net, part)
    assert abs(a.generator.offdiag - b.generator.offdiag).max() <= 1e-12 * max(1, a.generator.max_abs_entry())
    assert np.allclose(a.generator.exit_rates(), b.generator.exit_rates(), rtol=1e-12, atol=1e-12)
    assert np.array_equal(a.inboundary, b.inboundary)


def test_offgrid_partition_matches_brute_force(pbd):
    cells = [MacroState((0, 0), (2, 3)), MacroState((3, 0), (4, 3)), MacroState((0, 4), (4, 6))]
    part = Partition.from_cells(cells)
    lg = build_lumped_generator(pbd, part, reentry=False)
    q = lg.generator.offdiag.toarray()
    for i, xi in enumerate(part.cells()):
        for k, xk in enumerate(part.cells()):
            if i == k:
                continue
            expected = sum(
                brute_force_lumped_rate(pbd, j, transition_set(xi, xk, v)) for j, v in enumerate(pbd.change_matrix)
            ) / xi.volume
            assert q[i, k] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_diagonal_equals_exit_sum(pbd):
    part = Partition.grid(pbd, 4, 2)
    lg = build_lumped_generator(pbd, part, reentry=False)
    diag = lg.generator.diagonal()
    for i, xi in enumerate(part.cells()):
        leave = sum(
            lumped_rate(pbd, j, piece) for j, v in enumerate(pbd.change_matrix) for piece in exit_set(xi, tuple(v))
        )
        assert -diag[i] == pytest.approx(leave / xi.volume, rel=1e-12)


@pytest.mark.parametrize("name", ["pbd", "switch", "p53"])
def test_rows_sum_zero_after_reentry(request, name):
    net = request.getfixturevalue(name)
    lg = build_lumped_generator(net, Partition.grid(net, 5, 3))
    gen = lg.generator
    rowsum = gen.offdiag @ np.ones(gen.n) + gen.diagonal() + gen.exit_rates() * gen.reentry.sum()
    assert np.max(np.abs(rowsum)) <= 1e-12 * max(1.0, gen.max_abs_entry())
    assert gen.offdiag.data.min() >= 0


def test_grid_stacks_modes(switch):
    part = Partition.grid(switch, 4, 3)
    assert len(part) == 4 * 4 * 3
    assert set(map(tuple, part.lower[:, 2:].tolist())) == set(switch.mode_values)
    assert np.all(part.upper[:, 2:] == part.lower[:, 2:])
