# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def lstm_gates_forward(double[:, ::1] z, double[:, ::1] c_prev):
    cdef Py_ssize_t batch = c_prev.shape[0]
    cdef Py_ssize_t hidden = c_prev.shape[1]
    # numpy's vectorized tanh beats scalar libm; fuse only the arithmetic
    scale = np.full(4 * hidden, 0.5)
    scale[2 * hidden : 3 * hidden] = 1.0
    gates_arr = np.tanh(np.multiply(z, scale))
    c_arr = np.empty((batch, hidden))
    cdef double[:, ::1] gates = gates_arr
    cdef double[:, ::1] c = c_arr
    cdef Py_ssize_t b, j
    with nogil:
        for b in range(batch):
            for j in range(hidden):
                gates[b, j] = 0.5 * (gates[b, j] + 1.0)
                gates[b, hidden + j] = 0.5 * (gates[b, hidden + j] + 1.0)
                gates[b, 3 * hidden + j] = 0.5 * (gates[b, 3 * hidden + j] + 1.0)
                c[b, j] = gates[b, hidden + j] * c_prev[b, j] + gates[b, j] * gates[b, 2 * hidden + j]
    tc_arr = np.tanh(c_arr)
    h_arr = np.multiply(gates_arr[:, 3 * hidden :], tc_arr)
    return h_arr, c_arr, gates_arr, tc_arr


def lstm_gates_backward(double[:, ::1] dh, double[:, ::1] dc, double[:, ::1] gates,
                        double[:, ::1] c_prev, double[:, ::1] tanh_c):
    cdef Py_ssize_t batch = c_prev.shape[0]
    cdef Py_ssize_t hidden = c_prev.shape[1]
    dz_arr = np.empty((batch, 4 * hidden))
    dcp_arr = np.empty((batch, hidden))
    cdef double[:, ::1] dz = dz_arr
    cdef double[:, ::1] dcp = dcp_arr
    cdef Py_ssize_t b, j
    cdef double i_, f_, g_, o_, t, dct
    with nogil:
        for b in range(batch):
            for j in range(hidden):
                i_ = gates[b, j]
                f_ = gates[b, hidden + j]
                g_ = gates[b, 2 * hidden + j]
                o_ = gates[b, 3 * hidden + j]
                t = tanh_c[b, j]
                dct = dc[b, j] + dh[b, j] * o_ * (1.0 - t * t)
                dz[b, j] = dct * g_ * i_ * (1.0 - i_)
                dz[b, hidden + j] = dct * c_prev[b, j] * f_ * (1.0 - f_)
                dz[b, 2 * hidden + j] = dct * i_ * (1.0 - g_ * g_)
                dz[b, 3 * hidden + j] = dh[b, j] * t * o_ * (1.0 - o_)
                dcp[b, j] = dct * f_
    return dz_arr, dcp_arr


def auc_raw(members, nonmembers):
    cdef double[::1] m = np.sort(np.ascontiguousarray(members, dtype=np.float64))
    cdef double[::1] n = np.sort(np.ascontiguousarray(nonmembers, dtype=np.float64))
    cdef Py_ssize_t n1 = m.shape[0], n2 = n.shape[0]
    cdef Py_ssize_t i, lo = 0, hi = 0
    cdef double wins = 0.0
    with nogil:
        # for each member count nonmembers strictly below (lo) and at-or-below (hi)
        for i in range(n1):
            while lo < n2 and n[lo] < m[i]:
                lo += 1
            if hi < lo:
                hi = lo
            while hi < n2 and n[hi] <= m[i]:
                hi += 1
            wins += lo + 0.5 * (hi - lo)
    return wins / (<double>n1 * <double>n2)


def max_tpr_fpr_gap(members, nonmembers):
    cdef double[::1] m = np.sort(np.ascontiguousarray(members, dtype=np.float64))
    cdef double[::1] n = np.sort(np.ascontiguousarray(nonmembers, dtype=np.float64))
    cdef Py_ssize_t n1 = m.shape[0], n2 = n.shape[0]
    cdef Py_ssize_t i = 0, j = 0
    cdef double t, gap, best = 0.0
    with nogil:
        # sweep thresholds ascending; i, j = counts strictly below t
        while i < n1 or j < n2:
            if j >= n2 or (i < n1 and m[i] <= n[j]):
                t = m[i]
            else:
                t = n[j]
            gap = fabs((n1 - i) / <double>n1 - (n2 - j) / <double>n2)
            if gap > best:
                best = gap
            while i < n1 and m[i] == t:
                i += 1
            while j < n2 and n[j] == t:
                j += 1
    return best
