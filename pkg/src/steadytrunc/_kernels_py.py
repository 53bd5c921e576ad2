"""Pure-Python implementations of the hot kernels.

Same signatures and results as the compiled ``_kernels`` extension; used
when the extension is not built or ``STEADYTRUNC_PURE_PYTHON`` is set.
"""
from __future__ import annotations

from math import comb

import numpy as np


def interval_power_sums(lower, upper, max_degree, table):
    """Rows ``[sum_{x=l}^{u} x**p for p in 0..max_degree]`` for each interval.

    Uses ``sum_{t=0}^{w-1} (l + t)**p = sum_i C(p, i) l**(p-i) F_i(w - 1)``
    with ``F_i`` the closed-form power sum, so every term is nonnegative.
    """
    lower = np.asarray(lower, dtype=np.int64)
    upper = np.asarray(upper, dtype=np.int64)
    n = lower.shape[0]
    out = np.zeros((n, max_degree + 1))
    for r in range(n):
        lo = float(lower[r])
        w = upper[r] - lower[r] + 1
        if w <= 0:
            continue
        m = float(w - 1)
        fsum = []
        for i in range(max_degree + 1):
            acc = 0.0
            for q in range(i + 1, -1, -1):
                acc = acc * m + table[i, q]
            fsum.append(acc)
        for p in range(max_degree + 1):
            acc = 0.0
            for i in range(p + 1):
                acc += comb(p, i) * lo ** (p - i) * fsum[i]
            out[r, p] = acc
    return out


def _propensity(x, order, sat_species, sat_const, rate):
    a = rate
    for s in range(x.shape[0]):
        k = order[s]
        if k:
            if x[s] < k:
                return 0.0
            a *= comb(int(x[s]), int(k))
    if sat_species >= 0:
        xs = x[sat_species]
        a *= xs / (xs + sat_const)
    return a


def ssa_chunk(x, t, t_end, order, change, rates, sat_species, sat_const,
              uniforms, states_out, times_out):
    """Run the direct method from ``(x, t)`` until ``t_end`` or the buffers fill.

    ``states_out[i]``/``times_out[i]`` receive the state entered at jump ``i``
    (index 0 is the starting state) and its entry time.  Returns
    ``(records, t)``; ``x`` is updated in place.
    """
    nr = rates.shape[0]
    cap = states_out.shape[0]
    props = np.empty(nr)
    states_out[0] = x
    times_out[0] = t
    records = 1
    u = 0
    while records < cap:
        total = 0.0
        for j in range(nr):
            props[j] = _propensity(x, order[j], sat_species[j], sat_const[j], rates[j])
            total += props[j]
        if total <= 0.0:
            return records, t_end
        t += -np.log(1.0 - uniforms[u]) / total
        if t >= t_end:
            return records, t_end
        target = uniforms[u + 1] * total
        u += 2
        acc = 0.0
        chosen = nr - 1
        for j in range(nr):
            acc += props[j]
            if target < acc:
                chosen = j
                break
        x += change[chosen]
        states_out[records] = x
        times_out[records] = t
        records += 1
    return records, t
