"""Pure-python backend for the projected SOR sweeps.

Vectorizes the lexicographic Gauss-Seidel order exactly: for the 4-neighbor
stencil, a forward sweep updates anti-diagonals j + i = d in ascending order
(every in-sweep dependency sits on diagonal d - 1, every not-yet-updated
neighbor on d + 1), the reverse sweep runs the diagonals descending. Node
updates use the same expression order as the compiled kernel, so both
backends produce identical iterates.
"""
from __future__ import annotations

import numpy as np


def _diagonal_plan(code: np.ndarray):
    """Per anti-diagonal index arrays, split by node type."""
    ny, nx = code.shape
    J, I = np.where(code != 0)
    diag = J + I
    plan = []
    for d in range(ny + nx - 1):
        sel = diag == d
        if not sel.any():
            plan.append(None)
            continue
        j, i = J[sel], I[sel]
        interior = code[j, i] == 1
        plan.append((j[interior], i[interior], j[~interior], i[~interior]))
    return plan


def _sweep(w, obstacle, omega, plan, order):
    delta = 0.0
    for d in order:
        entry = plan[d]
        if entry is None:
            continue
        ji, ii, jt, it = entry
        if len(ji):
            v = 0.25 * (w[ji - 1, ii] + w[ji + 1, ii] + w[ji, ii - 1] + w[ji, ii + 1])
            newv = w[ji, ii] + omega * (v - w[ji, ii])
            step = np.max(np.abs(newv - w[ji, ii]))
            if step > delta:
                delta = step
            w[ji, ii] = newv
        if len(jt):
            v = 0.25 * (2.0 * w[jt + 1, it] + w[jt, it - 1] + w[jt, it + 1])
            newv = w[jt, it] + omega * (v - w[jt, it])
            newv = np.maximum(newv, obstacle[jt, it])
            step = np.max(np.abs(newv - w[jt, it]))
            if step > delta:
                delta = step
            w[jt, it] = newv
    return delta


def run_psor(w, code, obstacle, omega, tol, max_sweeps):
    """Same contract as the compiled kernel; w is modified in place."""
    w = np.asarray(w)
    plan = _diagonal_plan(np.asarray(code))
    ndiag = len(plan)
    fwd = range(ndiag)
    bwd = range(ndiag - 1, -1, -1)
    delta = 0.0
    for sweep in range(int(max_sweeps)):
        delta = _sweep(w, obstacle, omega, plan, fwd)
        delta = max(delta, _sweep(w, obstacle, omega, plan, bwd))
        if delta < tol:
            return sweep + 1, delta
    return int(max_sweeps), delta


def run_psor_reference(w, code, obstacle, omega, tol, max_sweeps):
    """Literal double-loop implementation, for small cross-validation grids."""
    w = np.asarray(w)
    ny, nx = w.shape
    delta = 0.0
    for sweep in range(int(max_sweeps)):
        delta = 0.0
        sweeps = (
            [(j, i) for j in range(ny) for i in range(nx)],
            [(j, i) for j in range(ny - 1, -1, -1) for i in range(nx - 1, -1, -1)],
        )
        for nodes in sweeps:
            for j, i in nodes:
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
                delta = max(delta, abs(newv - w[j, i]))
                w[j, i] = newv
        if delta < tol:
            return sweep + 1, delta
    return int(max_sweeps), delta
