"""Compiled inner loops for the moment engines."""

from __future__ import annotations

import math
import os

import numba
import numpy as np
from numba import njit

WORKERS_ENV = "BEURLING_WORKERS"


def set_workers(n: int) -> int:
    """Cap the numba thread pool at ``n`` (clipped to what is available)."""
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


if os.environ.get(WORKERS_ENV):
    set_workers(int(os.environ[WORKERS_ENV]))


@njit(cache=True)
def cross_sum_direct(L, w, T, block=256):
    """``sum_{j<k} w_j w_k sin(T(L_k-L_j)) / (T(L_k-L_j))`` by blocked pair loops."""
    M = L.size
    total = 0.0
    comp = 0.0
    for j0 in range(0, M, block):
        j1 = min(j0 + block, M)
        for k0 in range(j0, M, block):
            k1 = min(k0 + block, M)
            part = 0.0
            for j in range(j0, j1):
                lj = L[j]
                row = 0.0
                for k in range(max(k0, j + 1), k1):
                    x = T * (L[k] - lj)
                    row += w[k] * (math.sin(x) / x)
                part += w[j] * row
            # Kahan accumulation across blocks
            y = part - comp
            t = total + y
            comp = (t - total) - y
            total = t
    return total


@njit(cache=True)
def cross_sum_expsum(L, w, T, r, c):
    """Same sum as :func:`cross_sum_direct` in O(M * len(r)).

    Uses ``1/x ~ sum_m c_m exp(-r_m x)`` so that the pair sum factorises into
    a forward recurrence ``P_k = e^{(iT - r) d_k} (P_{k-1} + w_{k-1})`` with
    ``d_k = L_k - L_{k-1}``; ``Im P_k`` collects ``w_j e^{-r D} sin(T D)``.
    """
    M = L.size
    if M < 2:
        return 0.0
    d = np.empty(M - 1)
    cs = np.empty(M - 1)
    sn = np.empty(M - 1)
    for k in range(1, M):
        d[k - 1] = L[k] - L[k - 1]
        cs[k - 1] = math.cos(T * d[k - 1])
        sn[k - 1] = math.sin(T * d[k - 1])
    total = 0.0
    comp = 0.0
    for m in range(r.size):
        rm = r[m]
        pr = 0.0
        pi = 0.0
        acc = 0.0
        for k in range(1, M):
            e = math.exp(-rm * d[k - 1])
            br = pr + w[k - 1]
            nr = e * (cs[k - 1] * br - sn[k - 1] * pi)
            ni = e * (sn[k - 1] * br + cs[k - 1] * pi)
            pr = nr
            pi = ni
            acc += w[k] * pi
        y = c[m] * acc - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total / T


@njit(cache=True)
def eval_kahan(L, w, t):
    """``sum_j w_j exp(-i t L_j)`` with compensated summation."""
    sr = 0.0
    cr = 0.0
    si = 0.0
    ci = 0.0
    for j in range(L.size):
        ph = t * L[j]
        yr = w[j] * math.cos(ph) - cr
        tr = sr + yr
        cr = (tr - sr) - yr
        sr = tr
        yi = -w[j] * math.sin(ph) - ci
        ti = si + yi
        ci = (ti - si) - yi
        si = ti
    return sr + 1j * si


@njit(cache=True)
def eval_panels(L, w, t0, h, n_panels, xq):
    """``f(t) = sum_j w_j exp(-i t L_j)`` at ``t = t0 + p h + xq[q]``.

    Returns an ``(n_panels, len(xq))`` complex array.  Panel phasors advance by
    multiplication and are recomputed exactly every 64 panels.
    """
    nq = xq.size
    out = np.zeros((n_panels, nq), dtype=np.complex128)
    qf = np.empty(nq, dtype=np.complex128)
    for j in range(L.size):
        lj = L[j]
        wj = w[j]
        for q in range(nq):
            qf[q] = wj * complex(math.cos(lj * xq[q]), -math.sin(lj * xq[q]))
        step = complex(math.cos(lj * h), -math.sin(lj * h))
        z = 1.0 + 0.0j
        for p in range(n_panels):
            if p % 64 == 0:
                ph = lj * (t0 + p * h)
                z = complex(math.cos(ph), -math.sin(ph))
            for q in range(nq):
                out[p, q] += z * qf[q]
            z *= step
    return out
