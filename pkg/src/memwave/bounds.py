"""Theoretical decay envelopes and empirical envelope fitting.

The scalar comparison inequality

    F'(t) <= -c1 xi(t)^(alpha+1) F(t)^(alpha+1) + c2 h(t)^(alpha+1)

forces the algebraic envelope

    F(t) <= C (1+t)^(-1/alpha) xi(t)^(-(alpha+1)/alpha)
            [ 1 + int_0^t (s+1)^(1/alpha) xi(s)^((alpha+1)/alpha)
                          h(s)^(alpha+1) ds ],

where h(t) = xi(t) int_t^inf g is the tail weight.  The energy of an
admissible run obeys this envelope with alpha = 2p - 2 (basic form) and,
when the basic envelope is integrable over [0, inf), again with
alpha = p - 1 (improved form).  Under the second operator condition the
energy instead obeys quotient envelopes built from the initial energies and
running integrals of h and xi.

Every envelope is evaluated with C = 1; the multiplicative constant is an
existence statement, so it is always *fitted* against a measured trace.
What is falsifiable is the stability of the fitted constant under horizon
growth, which ``fit_envelope`` reports alongside a log-log slope of the
trace on a trailing window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class UndefinedBoundError(ValueError):
    """The requested envelope family is undefined for these parameters."""


class ImprovedBoundUnavailableError(RuntimeError):
    """The integrability condition gating the improved envelope failed."""


class FitDomainError(ValueError):
    """Envelope or trace is nonpositive/undefined on the fit window."""


def _prefix_trapezoid(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))))


def _check_grid(t: np.ndarray):
    if t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0.0):
        raise ValueError("envelope grids must start at 0 and increase")


def log_grid(horizon: float, n: int = 4096) -> np.ndarray:
    """0 followed by log-spaced points up to ``horizon``."""
    return np.concatenate(([0.0], np.geomspace(min(1e-3, horizon / n), horizon, n - 1)))


def comparison_envelope(alpha: float, xi, h_fn: Callable, t: np.ndarray) -> np.ndarray:
    """Envelope of the comparison inequality with C = 1 on the grid ``t``.

    The bracket integral is accumulated by the trapezoid rule on the given
    grid, so the grid must start at 0.
    """
    if alpha <= 0.0:
        raise UndefinedBoundError(f"alpha must be positive, got {alpha}")
    t = np.asarray(t, dtype=float)
    _check_grid(t)
    beta = (alpha + 1.0) / alpha
    xiv = np.asarray(xi(t), dtype=float)
    hv = np.asarray(h_fn(t), dtype=float)
    integrand = (t + 1.0) ** (1.0 / alpha) * xiv**beta * hv ** (alpha + 1.0)
    bracket = 1.0 + _prefix_trapezoid(integrand, t)
    return (1.0 + t) ** (-1.0 / alpha) * xiv ** (-beta) * bracket


@dataclass(frozen=True)
class DecayBound:
    """Evaluable envelope; ``evaluate`` needs a grid starting at 0."""

    family: str
    t_min: float
    _fn: Callable[[np.ndarray], np.ndarray]

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        _check_grid(t)
        vals = self._fn(t)
        if self.t_min > 0.0:
            vals = np.where(t < self.t_min, np.nan, vals)
        return vals


def case1_bound_basic(p: float, xi, h_fn: Callable) -> DecayBound:
    """First-condition envelope, exponent 1/(2p-2), tail weight power 2p-1."""
    if p == 1.0:
        raise UndefinedBoundError(
            "p = 1 gives exponential-type decay, outside the algebraic envelope family"
        )
    if not (1.0 < p < 1.5):
        raise UndefinedBoundError(f"p must lie in (1, 3/2), got {p}")
    alpha = 2.0 * p - 2.0
    return DecayBound(family="case1_basic", t_min=0.0,
                      _fn=lambda t: comparison_envelope(alpha, xi, h_fn, t))


def case1_integrability(p: float, xi, h_fn: Callable, horizon: float = 1e4,
                        n_grid: int = 4096) -> tuple[float, bool]:
    """Horizon-doubling convergence test for the integral of the basic envelope."""
    bound = case1_bound_basic(p, xi, h_fn)
    t = log_grid(horizon, n_grid)
    prefix = _prefix_trapezoid(bound.evaluate(t), t)

    def at(x):
        return float(np.interp(x, t, prefix))

    h8 = horizon / 8.0
    d1 = at(2 * h8) - at(h8)
    d2 = at(4 * h8) - at(2 * h8)
    d3 = at(horizon) - at(4 * h8)
    converged = d1 <= 0.0 or ((d2 < 0.9 * d1) and (d3 < 0.9 * d2))
    return float(prefix[-1]), converged


def case1_bound_improved(p: float, xi, h_fn: Callable, enforce: bool = True,
                         horizon: float = 1e4) -> DecayBound:
    """Improved first-condition envelope, exponent 1/(p-1), tail weight power p.

    Available only when the basic envelope is integrable; the numeric
    doubling test gates it unless ``enforce`` is False.
    """
    if p == 1.0:
        raise UndefinedBoundError(
            "p = 1 gives exponential-type decay, outside the algebraic envelope family"
        )
    if not (1.0 < p < 1.5):
        raise UndefinedBoundError(f"p must lie in (1, 3/2), got {p}")
    if enforce:
        _, converged = case1_integrability(p, xi, h_fn, horizon=horizon)
        if not converged:
            raise ImprovedBoundUnavailableError(
                "basic envelope integral diverges under horizon doubling; "
                "improved envelope unavailable"
            )
    alpha = p - 1.0
    return DecayBound(family="case1_improved", t_min=0.0,
                      _fn=lambda t: comparison_envelope(alpha, xi, h_fn, t))


def _case2_values(p, xi, h_fn, e0, e2_0, power, t):
    xiv = np.asarray(xi(t), dtype=float)
    hv = np.asarray(h_fn(t), dtype=float)
    num = e2_0 + e0**power + _prefix_trapezoid(hv**power, t)
    den = _prefix_trapezoid(xiv**power, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (num / den) ** (1.0 / power)
    vals[den <= 0.0] = np.nan
    return vals


def case2_bound(p: float, xi, h_fn: Callable, e0: float, e2_0: float,
                variant: str = "basic", t_min: float = 1.0,
                enforce_condition: bool = True, horizon: float = 1e4) -> DecayBound:
    """Second-condition quotient envelope.

    ``basic`` uses power 2p-1, ``improved`` uses power p.  The quotient is
    0/0 at t = 0, so the envelope is only defined for t >= t_min (default 1).
    The improved variant is formally gated by integrability of the basic
    quotient; ``enforce_condition=False`` evaluates it regardless and leaves
    the condition status to the caller's report.
    """
    if not (1.0 <= p < 1.5):
        raise UndefinedBoundError(f"p must lie in [1, 3/2), got {p}")
    if e0 < 0.0 or e2_0 < 0.0:
        raise ValueError("initial energies must be nonnegative")
    if variant == "basic":
        power = 2.0 * p - 1.0
    elif variant == "improved":
        if enforce_condition:
            _, converged = case2_integrability(p, xi, h_fn, e0, e2_0,
                                               t_min=t_min, horizon=horizon)
            if not converged:
                raise ImprovedBoundUnavailableError(
                    "basic quotient envelope is not integrable under horizon "
                    "doubling; improved quotient unavailable"
                )
        power = p
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return DecayBound(family=f"case2_{variant}", t_min=t_min,
                      _fn=lambda t: _case2_values(p, xi, h_fn, e0, e2_0, power, t))


def case2_integrability(p: float, xi, h_fn: Callable, e0: float, e2_0: float,
                        t_min: float = 1.0, horizon: float = 1e4,
                        n_grid: int = 4096) -> tuple[float, bool]:
    """Doubling test for the integral of the basic quotient envelope."""
    t = log_grid(horizon, n_grid)
    vals = _case2_values(p, xi, h_fn, e0, e2_0, 2.0 * p - 1.0, t)
    mask = t >= t_min
    ts = t[mask]
    prefix = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(ts) * (vals[mask][1:] + vals[mask][:-1]))))

    def at(x):
        return float(np.interp(x, ts, prefix))

    h8 = horizon / 8.0
    d1 = at(2 * h8) - at(h8)
    d2 = at(4 * h8) - at(2 * h8)
    d3 = at(horizon) - at(4 * h8)
    converged = d1 <= 0.0 or ((d2 < 0.9 * d1) and (d3 < 0.9 * d2))
    return float(prefix[-1]), converged


@dataclass(frozen=True)
class PriorRates:
    """Best previously published algebraic rates for the worked kernel family."""

    case1_sup: float      # any exponent below (q-1)/2 was available
    case2_sup: float      # any exponent below (q-1)/(q+1)
    case1_new: float      # (q^2 - q - 1)/q from the improved envelope
    case2_new: float      # q/(q+1) from the improved quotient

    @property
    def case1_improves(self) -> bool:
        return self.case1_new > self.case1_sup

    @property
    def case2_improves(self) -> bool:
        return self.case2_new > self.case2_sup


def prior_polynomial_rates(q: float) -> PriorRates:
    if q <= 2.0:
        raise ValueError(f"comparison rates need q > 2, got {q}")
    half = (q - 1.0) / 2.0
    return PriorRates(
        case1_sup=half,
        case2_sup=half / (half + 1.0),
        case1_new=(q * q - q - 1.0) / q,
        case2_new=q / (q + 1.0),
    )


@dataclass(frozen=True)
class FitReport:
    c_star: float
    c_star_series: tuple
    c_star_drift: float
    slope: float
    slope_residual: float
    window: tuple


def fit_envelope(t: np.ndarray, values: np.ndarray, bound, window) -> FitReport:
    """Fit the envelope constant and the trailing log-log slope.

    C* is the supremum of values/bound over the window; the series re-fits
    it on the nested horizons (hi/4, hi/2, hi) with the window start held
    fixed, so a stable C* means the envelope direction holds with a constant
    that horizon growth no longer moves.  The slope is a least-squares fit
    of log(values) against log(1+t) over the window.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    bound_vals = bound.evaluate(t) if isinstance(bound, DecayBound) else np.asarray(bound, dtype=float)

    lo, hi = float(window[0]), float(window[1])
    mask = (t >= lo) & (t <= hi)
    if not np.any(mask):
        raise FitDomainError(f"window [{lo}, {hi}] contains no samples")
    if np.any(~np.isfinite(bound_vals[mask])) or np.any(bound_vals[mask] <= 0.0):
        raise FitDomainError("envelope is nonpositive or undefined on the window")
    if np.any(values[mask] <= 0.0):
        raise FitDomainError("trace is nonpositive on the window")

    ratio = values / bound_vals
    series = []
    for horizon in (hi / 4.0, hi / 2.0, hi):
        m = (t >= lo) & (t <= horizon)
        if np.any(m):
            series.append((horizon, float(np.max(ratio[m]))))
    c_star = series[-1][1]
    if len(series) >= 2 and series[-2][1] > 0.0:
        drift = abs(series[-1][1] - series[-2][1]) / series[-2][1]
    else:
        drift = math.nan

    x = np.log1p(t[mask])
    y = np.log(values[mask])
    if x.size >= 2:
        slope, intercept = np.polyfit(x, y, 1)
        resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    else:
        slope, resid = math.nan, math.nan
    return FitReport(c_star=c_star, c_star_series=tuple(series), c_star_drift=float(drift),
                     slope=float(slope), slope_residual=resid, window=(lo, hi))


def default_fit_window(horizon: float) -> tuple[float, float]:
    """Trailing quarter of the horizon in log-time."""
    lo = (1.0 + horizon) ** 0.75 - 1.0
    return lo, horizon


@dataclass(frozen=True)
class ComparisonOdeReport:
    t: np.ndarray
    F: np.ndarray
    bound: np.ndarray
    fit: FitReport
    phi_ok: bool


def verify_comparison_ode(alpha: float, xi, h_fn: Callable, c1: float, c2: float,
                          f0: float, horizon: float, n_grid: int = 1024,
                          substeps: int = 10) -> ComparisonOdeReport:
    """Integrate the equality comparison ODE and check it against the envelope.

    F' = -c1 xi^(alpha+1) F^(alpha+1) + c2 h^(alpha+1) is integrated with
    classic RK4 in the substituted time tau = log(1+t) (the dynamics slow
    like 1/t, so log-time keeps long horizons cheap and the integrator in
    its stability region) at ``substeps`` internal steps per grid interval.
    The transformed variable phi = xi^((alpha+1)/alpha) F is also checked
    against its own inequality phi' <= -c1 phi^(alpha+1)
    + c2 xi^((alpha+1)/alpha) h^(alpha+1) on the grid.
    """
    if alpha <= 0.0 or c1 <= 0.0 or c2 < 0.0 or f0 < 0.0:
        raise ValueError("need alpha, c1 > 0 and c2, f0 >= 0")
    tau = np.linspace(0.0, math.log1p(horizon), n_grid)
    t = np.expm1(tau)
    beta = (alpha + 1.0) / alpha

    def rate(ti, fi):
        fi = max(fi, 0.0)
        return (1.0 + ti) * (
            -c1 * float(xi(ti)) ** (alpha + 1.0) * fi ** (alpha + 1.0)
            + c2 * float(h_fn(ti)) ** (alpha + 1.0)
        )

    fvals = np.empty(n_grid)
    fvals[0] = f0
    f = f0
    for i in range(n_grid - 1):
        h = (tau[i + 1] - tau[i]) / substeps
        ti = tau[i]
        for _ in range(substeps):
            t0 = math.expm1(ti)
            tmid = math.expm1(ti + 0.5 * h)
            tend = math.expm1(ti + h)
            k1 = rate(t0, f)
            k2 = rate(tmid, f + 0.5 * h * k1)
            k3 = rate(tmid, f + 0.5 * h * k2)
            k4 = rate(tend, f + h * k3)
            f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            ti += h
        if not math.isfinite(f):
            raise RuntimeError(f"comparison ODE integration blew up near t = {math.expm1(ti):g}")
        fvals[i + 1] = f

    bound = comparison_envelope(alpha, xi, h_fn, t)
    fit = fit_envelope(t, np.maximum(fvals, 1e-300), bound, (0.0, horizon))

    xiv = np.asarray(xi(t), dtype=float)
    hv = np.asarray(h_fn(t), dtype=float)
    phi = xiv**beta * fvals
    dphi = np.gradient(phi, t)
    rhs = -c1 * np.maximum(phi, 0.0) ** (alpha + 1.0) + c2 * xiv**beta * hv ** (alpha + 1.0)
    scale = max(float(np.max(np.abs(dphi))), float(np.max(np.abs(rhs))), 1e-300)
    phi_ok = bool(np.all(dphi[1:-1] <= rhs[1:-1] + 1e-3 * scale + 1e-12))

    return ComparisonOdeReport(t=t, F=fvals, bound=bound, fit=fit, phi_ok=phi_ok)
