"""Euler products over g-prime systems expanded into generalized Dirichlet series.

Grid points (generalized integers) are kept in log space as sums of
``log p``; points whose logs agree within ``merge_tol * max(1, log nu)`` are
merged and their coefficients added.  Equal prime *values* never need
merging: a value of multiplicity ``m`` contributes the binomial weights of
``(1 - p^-s)^-m`` or ``(1 - p^-s)^m`` directly.
"""

from __future__ import annotations

import heapq
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .primes import DomainError, GPrimeSystem, format_real

TAGS = ("d", "e", "ruelle_b", "ruelle_c", "selberg_b", "selberg_c", "generic")
UNIT_TAGS = frozenset(TAGS) - {"generic"}
DEFAULT_MERGE_TOL = 1e-9
_BASE_META = frozenset({"source", "xmax", "complete_to", "merge_tol", "tag", "entries"})


class ExpansionBudgetError(RuntimeError):
    """Entry budget exhausted; ``partial`` holds the complete prefix."""

    def __init__(self, msg: str, partial: CoefficientSeries):
        super().__init__(msg)
        self.partial = partial
        self.partial_result = True


class TooManyIndicesError(RuntimeError):
    pass


def _slack(log_x: float, tol: float) -> float:
    return tol * max(1.0, abs(log_x))


def merge_grid(logs: np.ndarray, coefs: np.ndarray, tol: float):
    """Sort and merge log-grid points closer than ``tol * max(1, log)``.

    Returns ``(logs, coefs)``; each cluster is represented by its smallest log.
    """
    logs = np.asarray(logs, dtype=float)
    coefs = np.asarray(coefs, dtype=float)
    if logs.size == 0:
        return logs, coefs
    order = np.argsort(logs, kind="stable")
    logs, coefs = logs[order], coefs[order]
    gaps = np.diff(logs) > tol * np.maximum(1.0, np.abs(logs[1:]))
    starts = np.concatenate(([0], np.flatnonzero(gaps) + 1))
    return logs[starts], np.add.reduceat(coefs, starts)


@dataclass(frozen=True)
class CoefficientSeries:
    """Finite generalized Dirichlet series ``sum a_n nu_n^-s``.

    ``complete_to`` is the cutoff below which every coefficient is exact for
    the underlying infinite series (``None`` means the same as ``xmax``).
    """

    log_nu: np.ndarray
    coef: np.ndarray
    xmax: float
    merge_tol: float = DEFAULT_MERGE_TOL
    tag: str = "generic"
    source: str = ""
    complete_to: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lg = np.asarray(self.log_nu, dtype=float)
        cf = np.asarray(self.coef, dtype=float)
        if lg.ndim != 1 or lg.shape != cf.shape:
            raise DomainError("log_nu and coef must be 1-d of equal length")
        if self.tag not in TAGS:
            raise DomainError(f"unknown tag {self.tag!r}")
        if lg.size:
            if np.any(np.diff(lg) <= 0):
                raise DomainError("grid must be strictly increasing")
            if lg[0] < -_slack(0.0, self.merge_tol):
                raise DomainError("grid values must be >= 1")
            if lg[-1] > math.log(self.xmax) + _slack(math.log(self.xmax), self.merge_tol):
                raise DomainError("grid value above xmax")
        if self.tag in UNIT_TAGS and (lg.size == 0 or lg[0] != 0.0 or cf[0] != 1.0):
            raise DomainError(f"tag {self.tag} requires the leading entry (1, 1)")
        lg.setflags(write=False)
        cf.setflags(write=False)
        object.__setattr__(self, "log_nu", lg)
        object.__setattr__(self, "coef", cf)
        if self.complete_to is None:
            object.__setattr__(self, "complete_to", float(self.xmax))

    @classmethod
    def from_entries(cls, entries, xmax: float | None = None, **kw) -> CoefficientSeries:
        """Build from ``(nu, a)`` pairs; equal or near-equal ``nu`` are merged."""
        entries = list(entries)
        tol = kw.get("merge_tol", DEFAULT_MERGE_TOL)
        nu = np.array([float(v) for v, _ in entries], dtype=float)
        a = np.array([float(c) for _, c in entries], dtype=float)
        lg, cf = merge_grid(np.log(nu), a, tol)
        if xmax is None:
            xmax = float(np.exp(lg[-1])) if lg.size else 1.0
        return cls(lg, cf, float(xmax), **kw)

    def __len__(self) -> int:
        return int(self.log_nu.size)

    @property
    def nu(self) -> np.ndarray:
        return np.exp(self.log_nu)

    def entries(self) -> list[tuple[float, float]]:
        return list(zip(self.nu.tolist(), self.coef.tolist()))

    def coefficient_at(self, nu: float, default: float = 0.0) -> float:
        """Coefficient at the grid point within merge tolerance of ``nu``."""
        lg = math.log(nu)
        i = int(np.searchsorted(self.log_nu, lg))
        for j in (i - 1, i):
            if 0 <= j < len(self) and abs(self.log_nu[j] - lg) <= _slack(lg, self.merge_tol):
                return float(self.coef[j])
        return default

    def truncate(self, N: float) -> CoefficientSeries:
        """Entries with ``nu <= N`` (the partial sum ``f_N``)."""
        lim = math.log(N) + _slack(math.log(N), self.merge_tol)
        k = int(np.searchsorted(self.log_nu, lim, side="right"))
        return replace(self, log_nu=self.log_nu[:k], coef=self.coef[:k], xmax=float(N),
                       complete_to=min(float(N), self.complete_to))

    def nonzero(self) -> CoefficientSeries:
        keep = self.coef != 0.0
        if keep.all():
            return self
        return replace(self, log_nu=self.log_nu[keep], coef=self.coef[keep], tag="generic")

    def metadata(self) -> dict:
        return {"source": self.source, "xmax": format_real(self.xmax),
                "complete_to": format_real(self.complete_to),
                "merge_tol": self.merge_tol, "tag": self.tag, "entries": len(self), **self.meta}

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.metadata().items():
            buf.write(f"# {k}: {v}\n")
        buf.write("nu,a\n")
        for lg, a in zip(self.log_nu, self.coef):
            buf.write(f"{format_real(math.exp(lg))},{format_real(a)}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"metadata": self.metadata(),
                           "log_nu": [format_real(v) for v in self.log_nu],
                           "entries": [[format_real(math.exp(lg)), format_real(a)]
                                       for lg, a in zip(self.log_nu, self.coef)]},
                          sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> CoefficientSeries:
        d = json.loads(text)
        m = d["metadata"]
        extra = {k: v for k, v in m.items() if k not in _BASE_META}
        return cls(np.array([float(v) for v in d["log_nu"]]),
                   np.array([float(a) for _, a in d["entries"]]),
                   float(m["xmax"]), float(m["merge_tol"]), m["tag"], m["source"],
                   float(m["complete_to"]), extra)


def unit_series(xmax: float = 1.0) -> CoefficientSeries:
    return CoefficientSeries(np.zeros(1), np.ones(1), xmax)


def _heap_expand(system: GPrimeSystem, xmax: float, reciprocal: bool,
                 max_entries: int | None):
    logp = np.log(system.values).tolist()
    mult = system.multiplicities.tolist()
    n = len(logp)
    log_x = math.log(xmax)
    limit = log_x + _slack(log_x, DEFAULT_MERGE_TOL)
    # (log nu, index of largest prime used, its exponent, coefficient)
    heap: list[tuple[float, int, int, int]] = [(0.0, -1, 0, 1)]
    out_log: list[float] = []
    out_coef: list[int] = []
    sign = -1 if reciprocal else 1
    while heap:
        lg, i, k, c = heapq.heappop(heap)
        out_log.append(lg)
        out_coef.append(c)
        if max_entries is not None and len(out_log) >= max_entries and heap:
            return out_log, out_coef, lg
        if i >= 0:
            nl = lg + logp[i]
            if nl <= limit:
                m = mult[i]
                # binomial weight update C(m+k-1, k) -> C(m+k, k+1), or signed C(m, k+1)
                nc = (c * (m + k)) // (k + 1) if not reciprocal else -(c * (m - k)) // (k + 1)
                heapq.heappush(heap, (nl, i, k + 1, nc))
        for j in range(i + 1, n):
            nl = lg + logp[j]
            if nl > limit:
                break
            heapq.heappush(heap, (nl, j, 1, sign * c * mult[j]))
    return out_log, out_coef, None


def _expand(system: GPrimeSystem, xmax: float, reciprocal: bool, tag: str,
            merge_tol: float, max_entries: int | None) -> CoefficientSeries:
    if xmax < 1:
        raise DomainError("xmax must be >= 1")
    logs, coefs, stopped = _heap_expand(system, xmax, reciprocal, max_entries)
    lg, cf = merge_grid(np.array(logs), np.array(coefs, dtype=float), merge_tol)
    complete = min(float(xmax), float(system.xmax))
    series = CoefficientSeries(lg, cf, float(xmax), merge_tol, tag, system.fingerprint(), complete)
    if stopped is not None:
        # everything strictly below the last popped value is final
        edge = math.exp(stopped - 2 * _slack(stopped, merge_tol))
        partial = series.truncate(edge)
        raise ExpansionBudgetError(f"entry budget {max_entries} exhausted at nu={math.exp(stopped):.6g}",
                                   partial)
    return series


def expand_integers(system: GPrimeSystem, xmax: float, *, tag: str = "d",
                    merge_tol: float = DEFAULT_MERGE_TOL,
                    max_entries: int | None = None) -> CoefficientSeries:
    """Coefficients ``d_n`` of ``prod (1 - p^-s)^-1`` up to ``xmax``.

    Generalized integers are popped from a min-heap in increasing order; each
    exponent vector is generated once, by extending with primes of index not
    below the largest index already used.
    """
    return _expand(system, xmax, False, tag, merge_tol, max_entries)


def expand_reciprocal(system: GPrimeSystem, xmax: float, *, tag: str = "e",
                      merge_tol: float = DEFAULT_MERGE_TOL,
                      max_entries: int | None = None) -> CoefficientSeries:
    """Coefficients ``e_n`` of ``prod (1 - p^-s)`` on the same grid as ``d_n``.

    Non-squarefree grid points are kept with coefficient 0.
    """
    return _expand(system, xmax, True, tag, merge_tol, max_entries)


def brute_force_integers(system: GPrimeSystem, xmax: float, *, reciprocal: bool = False,
                         merge_tol: float = DEFAULT_MERGE_TOL,
                         max_indices: int = 20) -> CoefficientSeries:
    """Exhaustive oracle over exponent vectors, one slot per prime index.

    A prime of multiplicity ``m`` is ``m`` separate indices.  With
    ``reciprocal`` each index takes exponent 0 or 1 and the term carries
    ``(-1)**|S|``; exponents of non-squarefree vectors still mark grid points
    with coefficient 0.
    """
    logp = [math.log(v) for v, m in zip(system.values, system.multiplicities) for _ in range(m)]
    if len(logp) > max_indices:
        raise TooManyIndicesError(f"{len(logp)} prime indices exceed the oracle limit {max_indices}")
    log_x = math.log(xmax)
    limit = log_x + _slack(log_x, merge_tol)
    logs: list[float] = []
    coefs: list[int] = []

    def walk(idx: int, exps: list[int]):
        if idx == len(logp):
            lg = math.fsum(e * l for e, l in zip(exps, logp))
            logs.append(lg)
            if reciprocal:
                coefs.append(0 if any(e > 1 for e in exps) else (-1) ** sum(exps))
            else:
                coefs.append(1)
            return
        cap = int(math.floor(limit / logp[idx])) + 1
        for e in range(cap + 1):
            exps.append(e)
            if math.fsum(x * l for x, l in zip(exps, logp)) <= limit:
                walk(idx + 1, exps)
                exps.pop()
            else:
                exps.pop()
                break

    walk(0, [])
    lg, cf = merge_grid(np.array(logs), np.array(coefs, dtype=float), merge_tol)
    return CoefficientSeries(lg, cf, float(xmax), merge_tol, "e" if reciprocal else "d",
                             system.fingerprint(), min(float(xmax), float(system.xmax)))


def dirichlet_multiply(A: CoefficientSeries, B: CoefficientSeries,
                       xmax: float | None = None) -> CoefficientSeries:
    """Dirichlet product of two series, truncated at ``xmax``."""
    if A.merge_tol != B.merge_tol:
        raise DomainError("series have incompatible merge tolerances")
    tol = A.merge_tol
    if xmax is None:
        xmax = min(A.xmax, B.xmax)
    log_x = math.log(xmax)
    limit = log_x + _slack(log_x, tol)
    la, lb = A.log_nu, B.log_nu
    counts = np.searchsorted(lb, limit - la, side="right")
    total = int(counts.sum())
    ia = np.repeat(np.arange(la.size), counts)
    offsets = np.cumsum(counts) - counts
    ib = np.arange(total) - np.repeat(offsets, counts)
    lg, cf = merge_grid(la[ia] + lb[ib], A.coef[ia] * B.coef[ib], tol)
    if lg.size and lg[0] < 0:
        lg[0] = 0.0
    complete = min(float(xmax), A.complete_to, B.complete_to)
    tag = "generic"
    return CoefficientSeries(lg, cf, float(xmax), tol, tag, f"{A.source}*{B.source}", complete)


def shift_series(A: CoefficientSeries, k: float) -> CoefficientSeries:
    """Coefficients ``a_n / nu_n**k``: the series of ``f(s + k)``."""
    if k < 0:
        raise DomainError("shift must be nonnegative")
    return replace(A, coef=A.coef * np.exp(-k * A.log_nu), tag="generic")


def selberg_truncation(p_min: float, tol: float) -> int:
    """Smallest ``K >= 0`` with ``p_min**-(K+1) <= tol``."""
    if tol <= 0:
        raise DomainError("tol must be positive")
    if tol >= 1.0 / p_min:
        return 0
    return max(0, math.ceil(math.log(1.0 / tol) / math.log(p_min) - 1 - 1e-12))


def selberg_series(system: GPrimeSystem, xmax: float, tol: float = 1e-12,
                   K: int | None = None, merge_tol: float = DEFAULT_MERGE_TOL):
    """Series of ``Z(s) = prod_k Z1(s + k)`` and ``1/Z(s)`` for ``k = 0..K``.

    Returns ``(selberg_b, selberg_c)``; ``Z1`` is the Ruelle product
    ``prod_P (1 - N(P)^-s)`` over the system's g-primes.
    """
    if K is None:
        K = selberg_truncation(system.p_min, tol)
    rb = expand_reciprocal(system, xmax, tag="ruelle_b", merge_tol=merge_tol)
    rc = expand_integers(system, xmax, tag="ruelle_c", merge_tol=merge_tol)
    out = []
    for base, tag in ((rb, "selberg_b"), (rc, "selberg_c")):
        acc = base
        for k in range(1, K + 1):
            acc = dirichlet_multiply(acc, shift_series(base, k), xmax)
        out.append(replace(acc, tag=tag, source=base.source, meta={"K": K}))
    return out[0], out[1]


def euler_product(system: GPrimeSystem, sigma: float, reciprocal: bool = False) -> float:
    """``prod (1 - p^-sigma)^(-m)`` (or ``^m``) over the system, for real ``sigma``."""
    lg = np.log1p(-system.values**-sigma) * system.multiplicities
    tot = math.fsum(lg.tolist())
    return math.exp(tot if reciprocal else -tot)
