# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log

cnp.import_array()


cdef double _binom(long n, long k) nogil:
    cdef double out = 1.0
    cdef long i
    if k < 0 or n < k:
        return 0.0
    for i in range(k):
        out = out * (n - i) / (i + 1)
    return out


def interval_power_sums(lower, upper, int max_degree, table):
    cdef cnp.int64_t[:] lo = np.ascontiguousarray(lower, dtype=np.int64)
    cdef cnp.int64_t[:] hi = np.ascontiguousarray(upper, dtype=np.int64)
    cdef double[:, :] tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t n = lo.shape[0]
    out_arr = np.zeros((n, max_degree + 1))
    cdef double[:, :] out = out_arr
    cdef double[32] fsum
    cdef double[32] lpow
    cdef double m, acc, l
    cdef long w
    cdef Py_ssize_t r
    cdef int i, p, q
    if max_degree >= 31:
        raise ValueError("max_degree too large")
    with nogil:
        for r in range(n):
            w = hi[r] - lo[r] + 1
            if w <= 0:
                continue
            m = <double>(w - 1)
            l = <double>lo[r]
            lpow[0] = 1.0
            for i in range(1, max_degree + 1):
                lpow[i] = lpow[i - 1] * l
            for i in range(max_degree + 1):
                acc = 0.0
                q = i + 1
                while q >= 0:
                    acc = acc * m + tab[i, q]
                    q -= 1
                fsum[i] = acc
            for p in range(max_degree + 1):
                acc = 0.0
                for i in range(p + 1):
                    acc += _binom(p, i) * lpow[p - i] * fsum[i]
                out[r, p] = acc
    return out_arr


def ssa_chunk(cnp.int64_t[:] x, double t, double t_end,
              cnp.int64_t[:, :] order, cnp.int64_t[:, :] change,
              double[:] rates, cnp.int64_t[:] sat_species, double[:] sat_const,
              double[:] uniforms, cnp.int64_t[:, :] states_out, double[:] times_out):
    cdef Py_ssize_t nr = rates.shape[0]
    cdef Py_ssize_t d = x.shape[0]
    cdef Py_ssize_t cap = states_out.shape[0]
    cdef Py_ssize_t records = 1, u = 0, j, s, chosen
    cdef double total, acc, a, target, xs
    cdef long k
    props_arr = np.empty(nr)
    cdef double[:] props = props_arr
    for s in range(d):
        states_out[0, s] = x[s]
    times_out[0] = t
    with nogil:
        while records < cap:
            total = 0.0
            for j in range(nr):
                a = rates[j]
                for s in range(d):
                    k = order[j, s]
                    if k:
                        a *= _binom(x[s], k)
                if a != 0.0 and sat_species[j] >= 0:
                    xs = <double>x[sat_species[j]]
                    a *= xs / (xs + sat_const[j])
                props[j] = a
                total += a
            if total <= 0.0:
                t = t_end
                break
            t += -log(1.0 - uniforms[u]) / total
            if t >= t_end:
                t = t_end
                break
            target = uniforms[u + 1] * total
            u += 2
            acc = 0.0
            chosen = nr - 1
            for j in range(nr):
                acc += props[j]
                if target < acc:
                    chosen = j
                    break
            for s in range(d):
                x[s] += change[chosen, s]
                states_out[records, s] = x[s]
            times_out[records] = t
            records += 1
    return records, t
