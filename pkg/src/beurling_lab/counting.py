"""Summatory functions ``A(x) = sum_{nu <= x} a`` and residual diagnostics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .expansion import CoefficientSeries
from .primes import DomainError, OutOfRangeError, format_real

DEFAULT_EPSILON = 0.25
E_E = math.exp(math.e)


@dataclass
class CountingFunction:
    series: CoefficientSeries
    prefix_sums: np.ndarray
    rho: float | None = None
    fit_method: str | None = None

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        if np.any(xa > self.series.xmax * (1 + 1e-12)):
            raise OutOfRangeError(f"x beyond series cutoff {self.series.xmax}")
        pos = np.full(xa.shape, -1.0)
        np.log(xa, out=pos, where=xa > 0)
        lim = pos + self.series.merge_tol * np.maximum(1.0, np.abs(pos))
        idx = np.searchsorted(self.series.log_nu, lim, side="right")
        out = np.where(xa > 0, self.prefix_sums[idx], 0.0)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def residual(self, x):
        if self.rho is None:
            raise DomainError("density not fitted")
        return self(x) - self.rho * np.asarray(x, dtype=float)

    def window_mean_residual(self, lo: float, hi: float) -> float:
        """Average of ``R(x)`` over ``[lo, hi]``, integrated exactly."""
        lg = self.series.log_nu
        i0 = int(np.searchsorted(lg, math.log(lo), side="right"))
        i1 = int(np.searchsorted(lg, math.log(hi), side="right"))
        knots = np.concatenate(([lo], np.exp(lg[i0:i1]), [hi]))
        levels = self.prefix_sums[i0:i1 + 1]
        integral_a = math.fsum((levels * np.diff(knots)).tolist())
        return (integral_a - self.rho * (hi * hi - lo * lo) / 2) / (hi - lo)


def counting_function(series: CoefficientSeries) -> CountingFunction:
    if len(series) == 0:
        raise DomainError("empty series")
    prefix = np.concatenate(([0.0], np.cumsum(series.coef)))
    return CountingFunction(series, prefix)


def fit_density(cf: CountingFunction, fit_window: tuple[float, float],
                method: str = "least_squares", samples: int = 200) -> float:
    """Density ``rho`` in ``A(x) = rho x + R(x)``; stored on ``cf``.

    ``least_squares`` regresses ``A`` on ``x`` through the origin over a
    log-spaced sample of the window; ``endpoint`` returns ``A(xhi) / xhi``.
    """
    xlo, xhi = fit_window
    if not (xlo >= math.e and xhi > xlo):
        raise DomainError("fit window must satisfy e <= xlo < xhi")
    if method == "endpoint":
        rho = cf(xhi) / xhi
    elif method == "least_squares":
        x = np.geomspace(xlo, xhi, samples)
        rho = float(np.dot(cf(x), x) / np.dot(x, x))
    else:
        raise DomainError(f"unknown fit method {method!r}")
    cf.rho = float(rho)
    cf.fit_method = method
    return cf.rho


def supply_density(cf: CountingFunction, rho: float) -> float:
    cf.rho = float(rho)
    cf.fit_method = "supplied"
    return cf.rho


@dataclass
class ResidualReport:
    grid: np.ndarray
    residuals: np.ndarray
    normalized: np.ndarray
    normalized_exp_sqrt: np.ndarray
    epsilon: float
    c: float
    sup_normalized: float
    best_fit_c: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "R", "normalized_log_power", "normalized_exp_sqrt"])
        for row in zip(self.grid, self.residuals, self.normalized, self.normalized_exp_sqrt):
            w.writerow([format_real(v) for v in row])
        return buf.getvalue()


def _exp_sqrt_scale(x: np.ndarray) -> np.ndarray:
    lx = np.log(x)
    return np.sqrt(lx * np.log(lx))


def residual_report(cf: CountingFunction, epsilon: float = DEFAULT_EPSILON, grid=None,
                    points: int = 200, c: float = 1.0) -> ResidualReport:
    """Residual ``R(x)`` against both decay shapes.

    ``normalized`` is ``R(x) (log x)^(3/2+eps) / x`` and
    ``normalized_exp_sqrt`` is ``R(x) exp(c sqrt(log x log log x)) / x``.
    ``best_fit_c`` solves ``log(|R|/x) = -c sqrt(log x log log x)`` by least
    squares over the nonzero residuals.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if cf.rho is None:
        raise DomainError("density not fitted")
    if grid is None:
        if cf.series.xmax <= E_E:
            raise DomainError("series cutoff below e^e")
        grid = np.geomspace(E_E, cf.series.xmax, points)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < E_E * (1 - 1e-12)) or np.any(grid > cf.series.xmax * (1 + 1e-12)):
        raise DomainError("grid must lie within [e^e, cutoff]")
    r = cf.residual(grid)
    norm = r * np.log(grid) ** (1.5 + epsilon) / grid
    scale = _exp_sqrt_scale(grid)
    norm_exp = r * np.exp(c * scale) / grid
    nz = r != 0
    if nz.any():
        yv = -np.log(np.abs(r[nz]) / grid[nz])
        best_c = float(np.dot(yv, scale[nz]) / np.dot(scale[nz], scale[nz]))
    else:
        best_c = math.inf
    return ResidualReport(grid, r, norm, norm_exp, epsilon, c,
                          float(np.max(np.abs(norm))), best_c)
