"""Mean squares of generalized Dirichlet series on the line ``sigma = 1``.

Two independent engines compute ``(1/T) int_0^T |f_N(1+it)|^2 dt`` for a
finite series: the exact diagonal-plus-sinc expansion
(:func:`moment_closed_form`) and Gauss-Legendre panel quadrature
(:func:`moment_quadrature`).  The continuation of the full series to
``sigma = 1`` comes from the summation-by-parts formula with a linear model
of ``A(x)`` beyond the cutoff.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .counting import DEFAULT_EPSILON, counting_function
from .expansion import CoefficientSeries
from .primes import DomainError, format_real

GL_NODES = 6
DIRECT_PAIR_LIMIT = 4000


class AccuracyError(RuntimeError):
    """Requested tolerance not reached within the node budget."""

    def __init__(self, msg: str, estimate: float, error: float):
        super().__init__(msg)
        self.estimate = estimate
        self.error = error


def _weights(series: CoefficientSeries, sigma: float = 1.0):
    s = series.nonzero()
    L = np.ascontiguousarray(s.log_nu, dtype=float)
    return L, np.ascontiguousarray(s.coef * np.exp(-sigma * L))


def eval_polynomial(series: CoefficientSeries, sigma: float, t):
    """``f_N(sigma + it) = sum a nu^-sigma e^{-it log nu}`` (compensated sum)."""
    L, w = _weights(series, sigma)
    if np.ndim(t) == 0:
        return complex(_kernels.eval_kahan(L, w, float(t)))
    return np.array([_kernels.eval_kahan(L, w, float(ti)) for ti in np.ravel(t)]).reshape(np.shape(t))


# -- closed form ------------------------------------------------------------

def _expsum_nodes(dmin: float, dmax: float, eps: float = 1e-16):
    """Nodes ``r_m`` and weights ``c_m`` with ``sum c_m e^{-r_m x} = 1/x`` on [dmin, dmax].

    Trapezoid rule for ``1/x = int exp(u - x e^u) du``.
    """
    h = math.pi**2 / math.log(1 / eps)
    lo = math.log(eps / dmax)
    hi = math.log(math.log(1 / eps) / dmin)
    u = np.arange(lo, hi + h, h)
    return np.exp(u), h * np.exp(u)


def cross_term_sum(series: CoefficientSeries, T: float, method: str = "auto") -> float:
    """``sum_{j<k} w_j w_k s(T log(nu_k/nu_j))`` with ``w = a/nu``, ``s(x) = sin x / x``."""
    L, w = _weights(series, 1.0)
    if L.size < 2:
        return 0.0
    if method == "auto":
        method = "direct" if L.size <= DIRECT_PAIR_LIMIT else "expsum"
    if method == "direct":
        return float(_kernels.cross_sum_direct(L, w, float(T)))
    if method == "expsum":
        r, c = _expsum_nodes(float(np.min(np.diff(L))), float(L[-1] - L[0]))
        return float(_kernels.cross_sum_expsum(L, w, float(T), r, c))
    raise DomainError(f"unknown method {method!r}")


def diagonal(series: CoefficientSeries) -> float:
    """``sum a^2 / nu^2``."""
    return math.fsum((series.coef * np.exp(-series.log_nu)) ** 2)


def moment_closed_form(series: CoefficientSeries, T: float, method: str = "auto") -> float:
    """Exact ``(1/T) int_0^T |f_N(1+it)|^2 dt`` for a finite series.

    Diagonal ``sum a^2/nu^2`` plus twice the sinc-weighted cross terms.
    """
    if T <= 0:
        raise DomainError("T must be positive")
    return diagonal(series) + 2.0 * cross_term_sum(series, T, method)


def cross_term_envelope(series: CoefficientSeries, T: float) -> float:
    """``sum_{j<k} |w_j w_k| / (T log(nu_k/nu_j))`` from ``|s(x)| <= 1/|x|``."""
    L, w = _weights(series, 1.0)
    aw = np.abs(w)
    tot = 0.0
    for j in range(L.size - 1):
        tot += aw[j] * float(np.sum(aw[j + 1:] / (L[j + 1:] - L[j])))
    return tot / T


# -- quadrature -------------------------------------------------------------

def _gl_panel(h: float):
    x, wq = np.polynomial.legendre.leggauss(GL_NODES)
    return h * (x + 1) / 2, h * wq / 2


def _panel_integral(L, w, t0: float, t1: float, n_panels: int, extra=None) -> float:
    """``int_{t0}^{t1} |f(t) + extra(t)|^2 dt`` on ``n_panels`` equal panels."""
    h = (t1 - t0) / n_panels
    xq, wq = _gl_panel(h)
    vals = _kernels.eval_panels(L, w, t0, h, n_panels, xq)
    if extra is not None:
        tt = t0 + h * np.arange(n_panels)[:, None] + xq[None, :]
        vals = vals + extra(tt)
    return math.fsum((np.abs(vals) ** 2 @ wq).tolist())


def _panels_for(t0: float, t1: float, bandwidth: float) -> int:
    width = 2 * math.pi / (16 * bandwidth) if bandwidth > 0 else (t1 - t0)
    return max(1, math.ceil((t1 - t0) / width))


def _adaptive(L, w, t0, t1, bandwidth, tol, max_nodes, extra=None):
    n = _panels_for(t0, t1, bandwidth)
    coarse = _panel_integral(L, w, t0, t1, n, extra)
    err = math.inf
    while True:
        if 2 * n * GL_NODES > max_nodes:
            raise AccuracyError(f"node budget exhausted at error {err:.3g}", coarse, err)
        fine = _panel_integral(L, w, t0, t1, 2 * n, extra)
        err = abs(fine - coarse)
        if err <= tol * max(abs(fine), 1e-300):
            return fine, err
        n, coarse = 2 * n, fine


def moment_quadrature(series: CoefficientSeries, T: float, tol: float = 1e-8,
                      max_nodes: int = 20_000_000, return_error: bool = False):
    """``(1/T) int_0^T |f_N(1+it)|^2 dt`` by composite Gauss-Legendre panels.

    Panel width is at most ``2 pi / (16 log nu_max)``; the panel count is
    doubled until successive results agree to relative ``tol``.
    """
    if T <= 0:
        raise DomainError("T must be positive")
    L, w = _weights(series, 1.0)
    band = float(L[-1] - L[0]) if L.size else 0.0
    val, err = _adaptive(L, w, 0.0, float(T), band, tol, max_nodes)
    if return_error:
        return val / T, err / T
    return val / T


# -- continuation to sigma = 1 ----------------------------------------------

def _tail_terms(series_full: CoefficientSeries, rho: float, tail_model: str):
    cf = counting_function(series_full)
    cf.rho = rho
    X = series_full.xmax
    R_X = cf(X) - rho * X
    if tail_model == "linear":
        rbar = R_X
    elif tail_model == "mean":
        rbar = cf.window_mean_residual(X / 2, X)
    else:
        raise DomainError(f"unknown tail model {tail_model!r}")
    return cf, X, R_X, rbar


def eval_continuation(series_full: CoefficientSeries, rho: float, N: float, t: float,
                      tail_model: str = "linear") -> complex:
    """``f(1+it)`` from ``f_N`` plus the summation-by-parts remainder.

    ``f = f_N - rho N^{1-s}/(1-s) - R(N) N^{-s} + s int_N^inf R(x) x^{-s-1} dx``
    where ``R = A - rho x`` is integrated exactly on each interval between
    grid points up to the cutoff ``X``.  Beyond ``X`` the model
    ``R(x) = const`` is used (``linear``: ``A`` continues with slope ``rho``;
    ``mean``: the constant is the mean of ``R`` over ``[X/2, X]``).
    """
    if t < 1:
        raise DomainError("continuation is evaluated for t >= 1 only")
    cf, X, R_X, rbar = _tail_terms(series_full, rho, tail_model)
    if X <= N:
        raise DomainError("series cutoff must exceed N")
    s = complex(1.0, t)
    f_n = eval_polynomial(series_full.truncate(N), 1.0, t)
    A_N = cf(N)
    lg = series_full.log_nu
    i0 = len(series_full.truncate(N))
    knots = np.concatenate(([N], np.exp(lg[i0:]), [X]))
    levels = cf.prefix_sums[i0:lg.size + 1]
    x0, x1 = knots[:-1], knots[1:]
    panel = (levels * (x0 ** -s - x1 ** -s) / s
             - rho * (x1 ** (1 - s) - x0 ** (1 - s)) / (1 - s))
    integral = complex(math.fsum(panel.real.tolist()), math.fsum(panel.imag.tolist()))
    return (f_n - rho * N ** (1 - s) / (1 - s) - (A_N - rho * N) * N ** -s
            + s * integral + rbar * X ** -s)


def continuation_fast(series_full: CoefficientSeries, rho: float, t,
                      tail_model: str = "linear"):
    """Telescoped form of :func:`eval_continuation` (independent of ``N``).

    ``f(s) = f_X(s) - rho X^{1-s}/(1-s) + (Rbar - R(X)) X^{-s}``.
    """
    _, X, R_X, rbar = _tail_terms(series_full, rho, tail_model)
    t = np.asarray(t, dtype=float)
    s = 1.0 + 1j * t
    return (eval_polynomial(series_full, 1.0, t) - rho * X ** (1 - s) / (1 - s)
            + (rbar - R_X) * X ** -s)


def pointwise_envelope(t: float, N: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """``1/t + (log N)^{-3/2-eps}``: size of the boundary terms of ``f - f_N``."""
    return 1.0 / t + math.log(N) ** (-1.5 - epsilon)


def lemma_bound(N: float, T: float, epsilon: float = DEFAULT_EPSILON) -> float:
    lN = math.log(N)
    return 1.0 / T**2 + lN ** (-3 - 2 * epsilon) + T * lN ** (-2 - 2 * epsilon)


def mean_square_difference(series_full: CoefficientSeries, rho: float, N: float, T: float,
                           epsilon: float = DEFAULT_EPSILON, tol: float = 1e-6,
                           tail_model: str = "linear", max_nodes: int = 20_000_000):
    """``(1/T) int_1^T |f(1+it) - f_N(1+it)|^2 dt`` and its ratio to the bound shape.

    The difference is ``sum_{N < nu <= X} a nu^{-s}`` plus the explicit
    boundary terms at ``X``; it is integrated with the panel quadrature.
    Returns ``(value, bound_ratio)`` with the bound
    ``1/T^2 + (log N)^{-3-2eps} + T (log N)^{-2-2eps}``.
    """
    if N <= math.exp(math.e):
        raise DomainError("N must exceed e^e")
    if T <= 1:
        raise DomainError("T must exceed 1")
    _, X, R_X, rbar = _tail_terms(series_full, rho, tail_model)
    lg = series_full.log_nu
    i0 = len(series_full.truncate(N))
    keep = series_full.coef[i0:] != 0
    L = np.ascontiguousarray(lg[i0:][keep])
    w = np.ascontiguousarray(series_full.coef[i0:][keep] * np.exp(-L))
    logX = math.log(X)

    def extra(tt):
        s = 1.0 + 1j * tt
        return -rho * np.exp(-1j * tt * logX) / (-1j * tt) + (rbar - R_X) * X ** -s

    val, _ = _adaptive(L, w, 1.0, float(T), logX, tol, max_nodes, extra)
    value = val / T
    return value, value / lemma_bound(N, T, epsilon)


# -- series side ------------------------------------------------------------

def rhs_series(series: CoefficientSeries, density: float | None = None):
    """``sum a^2/nu^2`` over the grid and an estimate of the omitted tail.

    The tail beyond the cutoff ``X`` is modelled as
    ``density * max|a| * int_X^inf du/u^2``, where ``density`` is that of
    ``sum |a|`` (estimated from ``[X/2, X]`` when not given) and ``max|a|`` is
    taken over the same window.
    """
    value = diagonal(series)
    X = series.xmax
    if len(series) <= 1 or X <= 1:
        return value, 0.0
    window = series.log_nu > math.log(X / 2)
    if not window.any():
        return value, 0.0
    amax = float(np.max(np.abs(series.coef[window])))
    if density is None:
        density = float(np.sum(np.abs(series.coef[window]))) / (X / 2)
    return value, density * amax / X


def fejer_pair_check(T: float, u: float, tol: float = 1e-13) -> float:
    """``|(1/4T) int_{-4T}^{4T} (1 - |t|/4T) e^{-iut} dt - s(2Tu)^2|``.

    The left side is integrated numerically (Gauss-Legendre panels on the
    half line, using evenness).
    """
    if T <= 0:
        raise DomainError("T must be positive")
    span = 4.0 * T
    n = max(4, math.ceil(span * abs(u) / 0.5))
    xq, wq = np.polynomial.legendre.leggauss(12)
    edges = np.linspace(0.0, span, n + 1)
    mid = (edges[:-1] + edges[1:]) / 2
    half = (edges[1] - edges[0]) / 2
    tt = (mid[:, None] + half * xq[None, :]).ravel()
    vals = (1 - tt / span) * np.cos(u * tt)
    integral = 2 * half * math.fsum((vals.reshape(n, -1) @ wq).tolist()) / span
    x = 2 * T * u
    sinc2 = 1.0 if x == 0 else (math.sin(x) / x) ** 2
    return abs(integral - sinc2)


# -- schedules ----------------------------------------------------------------

SCHEDULES = ("logsq_eps", "logcube")


@dataclass
class MomentReport:
    N: float
    T: float
    closed_form: float
    quadrature: float | None
    rhs_series: float
    rhs_tail_bound: float
    discrepancy: float
    schedule: str
    wall_time: float
    mean_square_difference: float | None = None
    polarization_bound: float | None = None
    entries: int = 0


def schedule_T(N: float, schedule: str, epsilon: float = DEFAULT_EPSILON) -> float:
    lN = math.log(N)
    if schedule == "logcube":
        return lN**3
    if schedule == "logsq_eps":
        return lN ** (2 + epsilon)
    raise DomainError(f"unknown schedule {schedule!r}")


def convergence_run(series: CoefficientSeries, schedule: str = "logcube", steps: int = 4,
                    epsilon: float = DEFAULT_EPSILON, N_min: float | None = None,
                    N_max: float | None = None, quadrature: bool = False,
                    polarization: bool = False, rho: float | None = None,
                    quad_tol: float = 1e-8) -> list[MomentReport]:
    """Moments of ``f_N`` along ``T = T(N)`` against the full diagonal series.

    ``N`` runs geometrically from ``N_min`` to ``N_max`` (default: 100 up to
    the series cutoff).  With ``polarization`` the mean square of ``f - f_N``
    on ``[1, T]`` and the cross-term bound ``2 sqrt(moment * msd)`` are added.
    """
    if steps < 2:
        raise DomainError("steps must be >= 2")
    if schedule not in SCHEDULES:
        raise DomainError(f"unknown schedule {schedule!r}")
    N_max = float(N_max or series.xmax)
    N_min = float(N_min or min(100.0, N_max / 10))
    rhs, tail = rhs_series(series)
    if polarization and rho is None:
        raise DomainError("polarization diagnostics need the density rho")
    reports = []
    for N in np.geomspace(N_min, N_max, steps):
        t0 = time.perf_counter()
        T = schedule_T(N, schedule, epsilon)
        part = series.truncate(N).nonzero()
        closed = moment_closed_form(part, T)
        quad = moment_quadrature(part, T, quad_tol) if quadrature else None
        msd = pol = None
        if polarization and N > math.exp(math.e) and T > 1:
            if N < series.xmax:
                msd, _ = mean_square_difference(series, rho, N, T, epsilon)
                pol = 2 * math.sqrt(max(closed, 0.0) * msd)
        reports.append(MomentReport(float(N), T, closed, quad, rhs, tail, abs(closed - rhs),
                                    schedule, time.perf_counter() - t0, msd, pol, len(part)))
    return reports


REPORT_COLUMNS = ("N", "T", "closed_form", "quadrature", "rhs", "tail", "discrepancy",
                  "schedule", "seconds")


def reports_csv(reports: list[MomentReport], with_time: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = REPORT_COLUMNS if with_time else REPORT_COLUMNS[:-1]
    w.writerow(cols + ("msd", "polarization_bound"))
    for r in reports:
        row = [format_real(r.N), format_real(r.T), format_real(r.closed_form),
               "" if r.quadrature is None else format_real(r.quadrature),
               format_real(r.rhs_series), format_real(r.rhs_tail_bound),
               format_real(r.discrepancy), r.schedule]
        if with_time:
            row.append(f"{r.wall_time:.3f}")
        row += ["" if r.mean_square_difference is None else format_real(r.mean_square_difference),
                "" if r.polarization_bound is None else format_real(r.polarization_bound)]
        w.writerow(row)
    return buf.getvalue()


def reports_json(reports: list[MomentReport], with_time: bool = True) -> str:
    rows = []
    for r in reports:
        d = asdict(r)
        if not with_time:
            d.pop("wall_time")
        rows.append(d)
    return json.dumps(rows, sort_keys=True, indent=1)
