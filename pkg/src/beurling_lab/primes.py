"""Generalized prime (Beurling) systems.

A system is a nondecreasing list of real g-primes ``p > 1`` stored as
distinct values with integer multiplicities.  Generators cover the rational
primes, the ``Li``-inverse system (``pi(x) - Li(x)`` bounded by one), a seeded
jittered system whose counting residual grows like ``x**alpha``, and the
geodesic norms (built in :mod:`beurling_lab.geodesic`).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np
from scipy.special import expi

LI_LOWER = 2.0
_EXPI_LOG2 = float(expi(math.log(2.0)))

KINDS = ("rational", "li_inverse", "jittered", "geodesic", "custom")


class DomainError(ValueError):
    """Argument outside the documented domain of an operation."""


class OutOfRangeError(ValueError):
    """Query beyond the generation cutoff of a system or series."""


def li(x):
    """Offset logarithmic integral ``int_2^x dt / log t``.

    Evaluated as ``Ei(log x) - Ei(log 2)``; accepts scalars or arrays.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < LI_LOWER):
        raise DomainError("li(x) requires x >= 2")
    out = expi(np.log(xa)) - _EXPI_LOG2
    if np.ndim(out) == 0:
        return float(out)
    return out


def li_inverse(y, tol: float = 1e-13, max_iter: int = 100):
    """Solve ``li(x) = y`` for ``x >= 2``.

    Newton's method on the concave increasing function ``li``: after the
    first step every iterate sits left of the root, so the sequence increases
    monotonically; iterates falling below 2 are clamped back to 2.
    """
    ya = np.asarray(y, dtype=float)
    if np.any(ya < 0):
        raise DomainError("li_inverse(y) requires y >= 0")
    x = np.maximum(LI_LOWER, ya * np.log(ya + 2.0) + 2.0)
    for _ in range(max_iter):
        g = li(x) - ya
        step = g * np.log(x)
        x_new = np.maximum(LI_LOWER, x - step)
        done = np.all(np.abs(x_new - x) <= tol * x_new)
        x = x_new
        if done:
            break
    if np.ndim(x) == 0:
        return float(x)
    return x


@dataclass(frozen=True)
class GPrimeSystem:
    """Immutable g-prime system: distinct ``values`` with ``multiplicities``."""

    values: np.ndarray
    multiplicities: np.ndarray
    kind: str
    xmax: float
    alpha_hint: float | None = None
    seed: int | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mult = np.asarray(self.multiplicities, dtype=np.int64)
        if values.ndim != 1 or values.shape != mult.shape:
            raise DomainError("values and multiplicities must be 1-d of equal length")
        if values.size:
            if np.any(values <= 1.0):
                raise DomainError("g-primes must exceed 1")
            if np.any(np.diff(values) < 0):
                raise DomainError("g-prime values must be nondecreasing")
            if np.any(mult < 1):
                raise DomainError("multiplicities must be >= 1")
            if values[-1] > self.xmax:
                raise DomainError("g-prime above the generation cutoff")
        if self.kind not in KINDS:
            raise DomainError(f"unknown system kind {self.kind!r}")
        values.setflags(write=False)
        mult.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "multiplicities", mult)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def index_count(self) -> int:
        """Number of prime indices, i.e. total multiplicity."""
        return int(self.multiplicities.sum())

    @property
    def p_min(self) -> float:
        if not self.values.size:
            raise DomainError("empty system")
        return float(self.values[0])

    def truncate(self, xmax: float) -> GPrimeSystem:
        keep = self.values <= xmax
        return GPrimeSystem(self.values[keep], self.multiplicities[keep], self.kind,
                            min(xmax, self.xmax), self.alpha_hint, self.seed,
                            dict(self.metadata))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "alpha_hint": self.alpha_hint,
            "seed": self.seed,
            "xmax": format_real(self.xmax),
            "primes": [[format_real(v), int(m)]
                       for v, m in zip(self.values, self.multiplicities)],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> GPrimeSystem:
        primes = d.get("primes", [])
        values = np.array([float(v) for v, _ in primes], dtype=float)
        mult = np.array([int(m) for _, m in primes], dtype=np.int64)
        return cls(values, mult, d["kind"], float(d["xmax"]), d.get("alpha_hint"),
                   d.get("seed"), dict(d.get("metadata", {})))

    @classmethod
    def from_json(cls, text: str) -> GPrimeSystem:
        return cls.from_dict(json.loads(text))

    def fingerprint(self) -> str:
        payload = json.dumps({k: v for k, v in self.to_dict().items() if k != "metadata"},
                             sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def format_real(x: float) -> str:
    """Decimal string with 17 significant digits (round-trips binary64)."""
    return format(float(x), ".17g")


def system_from_values(values: Iterable[float], xmax: float | None = None,
                       kind: str = "custom", **kw) -> GPrimeSystem:
    """Build a system from a list of g-prime values, collapsing repeats."""
    vals = np.sort(np.asarray(list(values), dtype=float))
    if vals.size:
        uniq, counts = np.unique(vals, return_counts=True)
    else:
        uniq, counts = vals, np.zeros(0, dtype=np.int64)
    if xmax is None:
        xmax = float(uniq[-1]) if uniq.size else 1.0
    return GPrimeSystem(uniq, counts, kind, float(xmax), **kw)


def sieve_primes(n: int) -> np.ndarray:
    """Rational primes ``<= n`` by the sieve of Eratosthenes."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if flags[p]:
            flags[p * p::p] = False
    return np.flatnonzero(flags).astype(np.int64)


def gen_rational_primes(xmax: float) -> GPrimeSystem:
    if xmax < 2:
        raise DomainError("xmax must be >= 2")
    ps = sieve_primes(int(math.floor(xmax)))
    return GPrimeSystem(ps.astype(float), np.ones(ps.size, dtype=np.int64), "rational",
                        float(xmax), alpha_hint=0.5)


def gen_li_inverse_system(count: int) -> GPrimeSystem:
    """``p_j = li_inverse(j)`` for ``j = 1..count``; ``|pi - Li| <= 1``."""
    if count < 1:
        raise DomainError("count must be >= 1")
    ps = li_inverse(np.arange(1, count + 1, dtype=float))
    return GPrimeSystem(ps, np.ones(count, dtype=np.int64), "li_inverse", float(ps[-1]))


JITTER_LAW = ("delta_j = scale * q_j**alpha * (0.5*sin(omega*log q_j + phi) + 0.5*U_j), "
              "q_j = li_inverse(j), U_j ~ Uniform[-1,1], omega ~ Uniform[0.5,1.5], "
              "phi ~ Uniform[0,2pi) from numpy default_rng(seed); |delta_j| <= j/2; "
              "p_j = li_inverse(j + delta_j), sorted")


def gen_jittered_system(count: int, alpha: float, seed: int,
                        scale: float = 1.0) -> GPrimeSystem:
    """Seeded system with ``|pi(x) - Li(x)|`` of size about ``scale * x**alpha``.

    ``scale = 0`` reproduces :func:`gen_li_inverse_system` exactly.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    if seed < 0:
        raise DomainError("seed must be unsigned")
    rng = np.random.default_rng(seed)
    omega = rng.uniform(0.5, 1.5)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    u = rng.uniform(-1.0, 1.0, size=count)
    j = np.arange(1, count + 1, dtype=float)
    base = li_inverse(j)
    delta = scale * base**alpha * (0.5 * np.sin(omega * np.log(base) + phi) + 0.5 * u)
    delta = np.clip(delta, -j / 2, j / 2)
    ps = np.sort(li_inverse(j + delta)) if scale else base
    return GPrimeSystem(ps, np.ones(count, dtype=np.int64), "jittered", float(ps[-1]),
                        alpha_hint=alpha, seed=seed,
                        metadata={"jitter_law": JITTER_LAW, "scale": scale,
                                  "omega": omega, "phi": phi})


def pi_count(system: GPrimeSystem, x):
    """``pi_P(x)``: total multiplicity of g-primes ``<= x``."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa > system.xmax):
        raise OutOfRangeError(f"x beyond generation cutoff {system.xmax}")
    cum = np.concatenate(([0], np.cumsum(system.multiplicities)))
    out = cum[np.searchsorted(system.values, xa, side="right")]
    if np.ndim(out) == 0:
        return int(out)
    return out


def fit_residual_exponent(x: np.ndarray, residual: np.ndarray, block_ratio: float = 4.0,
                          xmin: float = 10.0) -> float:
    """Log-log slope of the envelope of ``|residual|`` against ``x``.

    The envelope is the maximum of ``|residual|`` over geometric blocks
    ``[b, b * block_ratio)``; blocks with zero envelope are dropped.
    """
    x = np.asarray(x, dtype=float)
    r = np.abs(np.asarray(residual, dtype=float))
    keep = x >= xmin
    x, r = x[keep], r[keep]
    if x.size < 2:
        raise DomainError("need at least two sample points")
    edges = xmin * block_ratio ** np.arange(0, math.ceil(math.log(x.max() / xmin, block_ratio)) + 1)
    bx, by = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (x >= lo) & (x < hi)
        if sel.any() and r[sel].max() > 0:
            k = np.argmax(r[sel])
            bx.append(x[sel][k])
            by.append(r[sel][k])
    if len(bx) < 2:
        return 0.0
    slope, _ = np.polyfit(np.log(bx), np.log(by), 1)
    return float(slope)


def counting_residual(system: GPrimeSystem, grid) -> np.ndarray:
    """``pi_P(x) - Li(x)`` on ``grid`` (all points >= 2)."""
    grid = np.asarray(grid, dtype=float)
    return pi_count(system, grid) - li(grid)
