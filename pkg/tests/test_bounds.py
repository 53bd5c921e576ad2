import numpy as np
import pytest
import scipy.sparse as sp

from steadytrunc.bounds import bounds_from_generator, outside_mass_estimate, statewise_bounds, worker_count
from steadytrunc.generator import SparseGenerator, StateIndex, build_generator, inboundary_states
from steadytrunc.parser import parse_model
from steadytrunc.refinement import RefinementConfig, refine
from steadytrunc.solver import solve_stationary


def test_no_outflow_collapses():
    gen = SparseGenerator(sp.csr_matrix(np.array([[0, 2.0], [6.0, 0]])))
    res = bounds_from_generator(gen, np.array([], dtype=np.int64))
    assert np.array_equal(res.lower, res.upper)
    assert np.allclose(res.uniform, [0.75, 0.25])


def test_conserved_network_has_zero_width():
    net = parse_model("species A, B; A -> B @ mass_action(1); B -> A @ mass_action(2);")
    states = StateIndex(np.array([[3 - b, b] for b in range(4)]))
    res = statewise_bounds(net, states)
    assert res.total_width == 0.0


def test_envelope_contains_each_redirection(pbd):
    states = StateIndex.from_box([110, 110], lower=[90, 90])
    gen = build_generator(pbd, states)
    inb = inboundary_states(pbd, states)
    res = statewise_bounds(pbd, states)
    assert not res.partial
    assert np.all(res.lower <= res.uniform + 1e-15) and np.all(res.uniform <= res.upper + 1e-15)
    for b in inb[:: max(1, len(inb) // 6)]:
        w = np.zeros(gen.n)
        w[b] = 1.0
        pi = solve_stationary(SparseGenerator(gen.offdiag, gen.outflow, w, "single"), "dense").values
        assert np.all(res.lower <= pi + 1e-12) and np.all(pi <= res.upper + 1e-12)
    # the envelope is attained: every bound comes from some redirection
    assert np.all(res.lower >= 0) and np.all(res.upper <= 1)


def test_width_shrinks_with_epsilon(pbd):
    widths = []
    for eps in (1e-1, 1e-2, 1e-3):
        res = refine(pbd, RefinementConfig(epsilon=eps, m=7, init_extent=8960))
        b = statewise_bounds(pbd, res.states)
        assert np.abs(b.uniform - res.distribution.values).max() <= 1e-10
        widths.append(b.total_width)
    assert widths[0] > widths[1] > widths[2]


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("STEADYTRUNC_THREADS", "1")
    assert worker_count() == 1


def test_outside_mass_estimate():
    states = StateIndex(np.array([[0], [1]]))
    assert outside_mass_estimate(states, {(0,): 0.5, (1,): 0.25, (2,): 0.25}) == pytest.approx(0.25)
    assert outside_mass_estimate(states, lambda x: np.full(len(x), 0.4)) == pytest.approx(0.2)
