"""Norms of primitive hyperbolic conjugacy classes of PSL2(Z).

A hyperbolic matrix of trace ``t > 2`` has norm ``eps_t**2`` with
``eps_t = (t + sqrt(t*t - 4)) / 2``.  Its conjugacy classes correspond to the
rho-cycles of reduced indefinite forms of discriminant ``t*t - 4`` (primitive
and imprimitive forms alike), via ``[[a, b], [c, d]] -> (c, d - a, -b)``.
Classes that are proper powers are removed by a sieve over the trace
recurrence ``tr(M**k) = t * tr(M**(k-1)) - tr(M**(k-2))``.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .primes import DomainError, GPrimeSystem, format_real, li, pi_count, fit_residual_exponent


class InconclusiveError(RuntimeError):
    """The conjugacy BFS oracle did not stabilise under doubling."""


def _check_discriminant(D: int) -> None:
    if D <= 0 or D % 4 not in (0, 1) or math.isqrt(D) ** 2 == D:
        raise DomainError(f"{D} is not a positive nonsquare discriminant")


def reduced_forms(D: int) -> list[tuple[int, int, int]]:
    """All reduced forms ``(a, b, c)`` with ``b*b - 4ac = D``.

    Reduced means ``0 < b < sqrt(D)`` and ``sqrt(D) - b < 2|a| < sqrt(D) + b``;
    imprimitive forms are included.
    """
    _check_discriminant(D)
    s = math.isqrt(D)
    b = np.arange(D % 2 or 2, s + 1, 2, dtype=np.int64)
    a = np.arange(1, s + 1, dtype=np.int64)
    A, B = np.meshgrid(a, b, indexing="ij")
    n = D - B * B
    ok = ((2 * A + B) ** 2 > D) & ((2 * A - B < 0) | ((2 * A - B) ** 2 < D)) & (n % (4 * A) == 0)
    out = []
    for ai, bi in zip(A[ok].tolist(), B[ok].tolist()):
        ci = -(D - bi * bi) // (4 * ai)
        out.append((ai, bi, ci))
        out.append((-ai, bi, -ci))
    out.sort()
    return out


def rho(form: tuple[int, int, int], D: int) -> tuple[int, int, int]:
    """Reduction operator: ``(a, b, c) -> (c, b', (b'^2 - D) / 4c)``."""
    _, b, c = form
    m = 2 * abs(c)
    s = math.isqrt(D)
    b2 = s - ((s + b) % m)
    return (c, b2, (b2 * b2 - D) // (4 * c))


def form_cycles(D: int) -> list[list[tuple[int, int, int]]]:
    forms = reduced_forms(D)
    seen: set[tuple[int, int, int]] = set()
    cycles = []
    for f in forms:
        if f in seen:
            continue
        cyc = [f]
        seen.add(f)
        g = rho(f, D)
        while g != f:
            cyc.append(g)
            seen.add(g)
            g = rho(g, D)
        cycles.append(cyc)
    return cycles


@lru_cache(maxsize=None)
def class_number(D: int) -> int:
    """Number of rho-cycles of reduced forms of discriminant ``D``."""
    return len(form_cycles(D))


def _pell_one(D: int) -> tuple[int, int]:
    """Minimal ``x*x - D*y*y = 1`` via the continued fraction of sqrt(D)."""
    a0 = math.isqrt(D)
    m, d, a = 0, 1, a0
    h_prev, h = 1, a0
    k_prev, k = 0, 1
    while h * h - D * k * k != 1:
        m = d * a - m
        d = (D - m * m) // d
        a = (a0 + m) // d
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
    return h, k


def _icbrt(n: int) -> int:
    if n < 8:
        return 1 if n else 0
    x = 1 << (n.bit_length() // 3 + 1)  # overestimate: Newton then decreases monotonically
    while True:
        y = (2 * x + n // (x * x)) // 3
        if y >= x:
            break
        x = y
    while x**3 > n:
        x -= 1
    while (x + 1) ** 3 <= n:
        x += 1
    return x


def fundamental_unit(D: int) -> tuple[int, int]:
    """Minimal positive ``(t, u)`` with ``t*t - D*u*u = 4``.

    Starts from the Pell unit ``x + y*sqrt(D) = ((2x) + (2y)sqrt(D)) / 2`` and
    extracts square and cube roots while they exist; a unit's root is found
    from its trace via ``t**2 - 2 = T`` or ``t**3 - 3t = T``.
    """
    _check_discriminant(D)
    r = math.isqrt(D + 4)
    if r * r == D + 4:
        return r, 1
    x, y = _pell_one(D)
    t = 2 * x
    while True:
        for k in (2, 3):
            if k == 2:
                cand = math.isqrt(t + 2)
                hit = cand * cand - 2 == t
            else:
                cand = _icbrt(t)
                while cand**3 - 3 * cand < t:
                    cand += 1
                hit = cand**3 - 3 * cand == t
            if hit and (cand * cand - 4) % D == 0:
                u2 = (cand * cand - 4) // D
                u = math.isqrt(u2)
                if u > 0 and u * u == u2:
                    t = cand
                    break
        else:
            break
    u = math.isqrt((t * t - 4) // D)
    return t, u


@dataclass(frozen=True)
class GeodesicNorm:
    trace: int
    discriminant: int
    epsilon: float
    norm: float
    class_count: int
    primitive_count: int


def unit_from_trace(t: int) -> float:
    return (t + math.sqrt(t * t - 4)) / 2


def norms_by_trace(tmax: int) -> list[GeodesicNorm]:
    """Class and primitive-class counts for traces ``3..tmax``.

    Primitive counts come from the power sieve: every primitive class of trace
    ``t'`` has powers whose traces follow ``T_k = t' T_{k-1} - T_{k-2}``; their
    counts are subtracted from the class count at ``T_k``.  Each integer hit is
    confirmed in log space (``k log eps_{t'} = log eps_{T_k}`` to 1e-9).
    """
    if tmax < 3:
        raise DomainError("tmax must be >= 3")
    counts = {t: class_number(t * t - 4) for t in range(3, tmax + 1)}
    prim = dict(counts)
    for t in range(3, tmax + 1):
        if prim[t] < 0:
            raise ArithmeticError(f"power sieve went negative at trace {t}")
        if prim[t] == 0:
            continue
        log_eps = math.log(unit_from_trace(t))
        t_prev, t_cur, k = 2, t, 1
        while True:
            t_prev, t_cur, k = t_cur, t * t_cur - t_prev, k + 1
            if t_cur > tmax:
                break
            if abs(k * log_eps - math.log(unit_from_trace(t_cur))) > 1e-9 * k * log_eps:
                raise ArithmeticError("power match failed the log-space check")
            prim[t_cur] -= prim[t]
    out = []
    for t in range(3, tmax + 1):
        eps = unit_from_trace(t)
        out.append(GeodesicNorm(t, t * t - 4, eps, eps * eps, counts[t], prim[t]))
    return out


def _trace_bound(xmax: float) -> int:
    # norm(t) = eps_t**2 is increasing; eps_t ~ t
    t = max(3, int(math.sqrt(xmax)) + 2)
    while t > 3 and unit_from_trace(t) ** 2 > xmax:
        t -= 1
    return t


def geodesic_system(xmax: float, norms: list[GeodesicNorm] | None = None) -> GPrimeSystem:
    """Primitive norms ``<= xmax`` as a g-prime system (kind ``geodesic``)."""
    if xmax < unit_from_trace(3) ** 2:
        raise DomainError("xmax is below the smallest norm (3+sqrt5)^2/4")
    if norms is None:
        norms = norms_by_trace(_trace_bound(xmax))
    rows = [g for g in norms if g.norm <= xmax and g.primitive_count > 0]
    return GPrimeSystem(np.array([g.norm for g in rows]),
                        np.array([g.primitive_count for g in rows], dtype=np.int64),
                        "geodesic", float(xmax))


def norms_csv(norms: list[GeodesicNorm]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trace", "D", "t", "u", "norm", "class_count", "primitive_count"])
    for g in norms:
        # u = 1 is minimal for D = trace**2 - 4, so the unit is (trace, 1)
        w.writerow([g.trace, g.discriminant, g.trace, 1, format_real(g.norm),
                    g.class_count, g.primitive_count])
    return buf.getvalue()


@dataclass
class ResidualProfile:
    x: np.ndarray
    residual: np.ndarray
    theta_hat: float

    @property
    def relative(self) -> np.ndarray:
        return np.abs(self.residual) / self.x


def pgt_residual_profile(system: GPrimeSystem, grid) -> ResidualProfile:
    """``pi_P(x) - Li(x)`` on ``grid`` plus the fitted envelope exponent."""
    x = np.asarray(grid, dtype=float)
    if np.any(x < 2):
        raise DomainError("grid points must be >= 2")
    res = pi_count(system, x) - li(x)
    return ResidualProfile(x, res, fit_residual_exponent(x, res))


# -- independent small-scale oracle -----------------------------------------

def _matrices(trace: int, bound: int) -> list[tuple[int, int, int, int]]:
    out = []
    for a in range(-bound, bound + 1):
        d = trace - a
        if abs(d) > bound:
            continue
        bc = a * d - 1  # nonzero since trace >= 3
        for b in range(1, bound + 1):
            if bc % b == 0:
                c = bc // b
                if abs(c) <= bound:
                    out.append((a, b, c, d))
                    out.append((a, -b, -c, d))
    return out


def _neighbours(m: tuple[int, int, int, int]):
    a, b, c, d = m
    yield (d, -c, -b, a)                              # S M S^-1
    yield (a + c, b + d - a - c, c, d - c)            # T M T^-1
    yield (a - c, b - d + a - c, c, d + c)            # T^-1 M T


def _bfs_class_count(trace: int, bound: int, word_length: int, safety: int) -> int:
    base = _matrices(trace, bound)
    parent: dict = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m in base:
        parent.setdefault(m, m)
    for start in base:
        depth = {start: 0}
        queue = deque([start])
        while queue:
            m = queue.popleft()
            if depth[m] >= word_length:
                continue
            for nb in _neighbours(m):
                if max(map(abs, nb)) > safety or nb in depth:
                    continue
                depth[nb] = depth[m] + 1
                parent.setdefault(nb, nb)
                ra, rb = find(m), find(nb)
                if ra != rb:
                    parent[rb] = ra
                queue.append(nb)
    return len({find(m) for m in base})


def conjugacy_bfs_oracle(trace: int, entry_bound: int = 8, word_length: int = 8) -> int:
    """Count PSL2(Z) conjugacy classes of trace ``trace`` by brute force.

    Matrices with entries bounded by ``entry_bound`` are joined whenever a
    word of length ``<= word_length`` in ``S, T, T^-1`` conjugates one to the
    other (intermediate entries capped at ``4 * entry_bound``).  The count
    must agree with the run at doubled bound and word length.
    """
    if not 3 <= trace <= 8:
        raise DomainError("oracle is restricted to traces 3..8")
    first = _bfs_class_count(trace, entry_bound, word_length, 4 * entry_bound)
    second = _bfs_class_count(trace, 2 * entry_bound, 2 * word_length, 8 * entry_bound)
    if first != second:
        raise InconclusiveError(f"trace {trace}: {first} classes vs {second} after doubling")
    return first
