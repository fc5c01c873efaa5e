# cython: boundscheck=False, wraparound=False, cdivision=True
"""Symmetric projected SOR sweeps for the thin-obstacle relaxation.

Node codes: 0 = fixed value, 1 = interior 5-point node, 2 = constrained
floor node (half-cell closure, projected onto {w >= obstacle}).
The sweep order (lexicographic, then reversed) is part of the contract and
must match the pure-python backend exactly.
"""


def run_psor(double[:, ::1] w, signed char[:, ::1] code, double[:, ::1] obstacle,
             double omega, double tol, long max_sweeps):
    cdef Py_ssize_t ny = w.shape[0]
    cdef Py_ssize_t nx = w.shape[1]
    cdef Py_ssize_t j, i
    cdef long sweep
    cdef double v, newv, delta, diff
    cdef signed char c
    delta = 0.0
    for sweep in range(max_sweeps):
        delta = 0.0
        for j in range(ny):
            for i in range(nx):
                c = code[j, i]
                if c == 0:
                    continue
                if c == 1:
                    v = 0.25 * (w[j - 1, i] + w[j + 1, i] + w[j, i - 1] + w[j, i + 1])
                else:
                    v = 0.25 * (2.0 * w[j + 1, i] + w[j, i - 1] + w[j, i + 1])
                newv = w[j, i] + omega * (v - w[j, i])
                if c == 2 and newv < obstacle[j, i]:
                    newv = obstacle[j, i]
                diff = newv - w[j, i]
                if diff < 0:
                    diff = -diff
                if diff > delta:
                    delta = diff
                w[j, i] = newv
        for j in range(ny - 1, -1, -1):
            for i in range(nx - 1, -1, -1):
                c = code[j, i]
                if c == 0:
                    continue
                if c == 1:
                    v = 0.25 * (w[j - 1, i] + w[j + 1, i] + w[j, i - 1] + w[j, i + 1])
                else:
                    v = 0.25 * (2.0 * w[j + 1, i] + w[j, i - 1] + w[j, i + 1])
                newv = w[j, i] + omega * (v - w[j, i])
                if c == 2 and newv < obstacle[j, i]:
                    newv = obstacle[j, i]
                diff = newv - w[j, i]
                if diff < 0:
                    diff = -diff
                if diff > delta:
                    delta = diff
                w[j, i] = newv
        if delta < tol:
            return sweep + 1, delta
    return max_sweeps, delta
