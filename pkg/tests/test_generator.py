import itertools

import numpy as np
import pytest

from steadytrunc.generator import (
    ReentryError,
    StateIndex,
    apply_single_target,
    apply_uniform_reentry,
    build_generator,
    inboundary_states,
)
from steadytrunc.parser import parse_model


def full_q(gen):
    return gen.to_matrix().toarray()


def brute_inboundary(net, states):
    members = set(states)
    out = []
    for i, y in enumerate(states):
        for j, v in enumerate(net.change_matrix):
            if not v.any():
                continue
            pre = tuple(int(a - b) for a, b in zip(y, v))
            if min(pre) < 0 or pre in members:
                continue
            if net.propensities(j, np.array(pre)[None, :])[0] > 0:
                out.append(i)
                break
    return np.array(out, dtype=np.int64)


def test_state_index_bijection():
    idx = StateIndex([(2, 1), (0, 0), (1, 5), (0, 0)])
    assert len(idx) == 3
    assert list(idx) == [(0, 0), (1, 5), (2, 1)]
    for i, s in enumerate(idx):
        assert idx.index(s) == i
    assert (3, 3) not in idx
    assert idx.lookup(np.array([[1, 5], [9, 9]])).tolist() == [1, -1]
    with pytest.raises(ValueError):
        StateIndex([(-1, 0)])


def test_model1_small_entries(bd_small):
    gen = build_generator(bd_small, StateIndex.from_box([2]))
    q = gen.offdiag.toarray()
    assert q[0, 1] == 10 and q[1, 2] == 10
    assert q[1, 0] == 1 and q[2, 1] == 2
    assert gen.outflow.triples() == [(2, 0, 10.0)]
    assert inboundary_states(bd_small, StateIndex.from_box([2])).tolist() == [2]


def test_single_state_all_outflow(bd_small):
    gen = build_generator(bd_small, StateIndex([(5,)]))
    assert gen.offdiag.nnz == 0
    assert sorted(r for _, _, r in gen.outflow.triples()) == [5.0, 10.0]


def test_model2_row_sums(pbd):
    states = StateIndex.from_box([300, 300])
    gen = apply_uniform_reentry(build_generator(pbd, states), inboundary_states(pbd, states))
    # Q 1 = offdiag 1 + diag + o (w . 1)
    rowsum = gen.offdiag @ np.ones(gen.n) + gen.diagonal() + gen.exit_rates() * gen.reentry.sum()
    assert np.max(np.abs(rowsum)) <= 1e-12


def test_inboundary_model1(bd_small):
    for n in (3, 10, 40):
        assert inboundary_states(bd_small, StateIndex.from_box([n])).tolist() == [n]


def test_inboundary_square(pbd):
    n = 12
    states = StateIndex.from_box([n, n])
    got = inboundary_states(pbd, states)
    faces = [i for i, s in enumerate(states) if s[0] == n or s[1] == n]
    assert got.tolist() == faces


@pytest.mark.parametrize("name", ["pbd", "switch", "p53"])
def test_inboundary_matches_brute_force(request, name):
    net = request.getfixturevalue(name)
    rng = np.random.default_rng(3)
    pts = rng.integers(0, 6, (60, net.n_species))
    if net.mode_indices:
        combos = np.array(net.mode_values)
        pts[:, list(net.mode_indices)] = combos[rng.integers(0, len(combos), len(pts))]
    states = StateIndex(pts)
    assert inboundary_states(net, states).tolist() == brute_inboundary(net, list(states)).tolist()


def test_uniform_split():
    net = parse_model("species S; 0 -> S @ mass_action(10); S -> 0 @ mass_action(1);")
    states = StateIndex([(4,), (5,), (6,)])
    gen = build_generator(net, states)
    # outflow from 6 (birth, 10) and from 4 (death, 4); split over targets 0 and 2
    red = apply_uniform_reentry(gen, [0, 2])
    q = full_q(red)
    assert np.allclose(q.sum(axis=1), 0, atol=1e-12)
    assert q[2, 0] == pytest.approx(5.0)
    # the half that lands back on the source is a dropped self-loop
    assert q[2, 2] == pytest.approx(-(6 + 5))
    assert q[0, 2] == pytest.approx(2.0)


def test_no_outflow_unchanged():
    net = parse_model("species A, B; A -> B @ mass_action(1); B -> A @ mass_action(2);")
    states = StateIndex([(1, 0), (0, 1)])
    gen = build_generator(net, states)
    red = apply_uniform_reentry(gen, inboundary_states(net, states))
    assert red.reentry is None
    assert np.array_equal(full_q(red), full_q(gen))


def test_empty_inboundary_with_outflow_errors(bd_small):
    gen = build_generator(bd_small, StateIndex.from_box([2]))
    with pytest.raises(ReentryError):
        apply_uniform_reentry(gen, [])


def test_single_target_model1(bd_small):
    states = StateIndex.from_box([2])
    gen = build_generator(bd_small, states)
    red = apply_uniform_reentry(gen, inboundary_states(bd_small, states))
    single = apply_single_target(gen, 2)
    assert np.array_equal(full_q(red), full_q(single))
    assert full_q(red)[2, 2] == -2


def test_conservative_after_reentry(switch):
    pts = list(itertools.product(range(8), range(8), [1], [0], [0]))
    pts += list(itertools.product(range(8), range(8), [0], [1], [0]))
    pts += list(itertools.product(range(8), range(8), [0], [0], [1]))
    states = StateIndex(pts)
    gen = apply_uniform_reentry(build_generator(switch, states), inboundary_states(switch, states))
    q = full_q(gen)
    assert np.max(np.abs(q.sum(axis=1))) <= 1e-12
    off = q - np.diag(np.diag(q))
    assert off.min() >= 0
