"""Relaxation kernels, decay weights, and admissibility checks.

A relaxation kernel g is a positive, nonincreasing, integrable function on
[0, inf) weighting past states in a fading-memory convolution.  Three
families are supported:

* polynomial    g(t) = a (1+t)^(-q)      with a > 0, q > 1
* exponential   g(t) = a exp(-lam t)     with a >= 0, lam > 0
* tabulated     monotone cubic interpolation of samples, extended beyond
                the last sample by a power-law tail fitted to the samples

Every kernel exposes the derivative g', the tail integral G(t) = int_t^inf g,
and the total mass g0 = G(0).  A decay weight xi is a positive nonincreasing
function paired with an exponent 1 <= p < 3/2; together they certify the
pointwise differential condition

    g'(t) <= -xi(t) g(t)^p      for all t >= 0,

which, combined with the mass condition 0 < g0 < 1/a0, is what the decay
envelopes in :mod:`memwave.bounds` require.  ``check_hypotheses`` evaluates
both conditions on a grid and reports margins rather than raising.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator


class ParameterDomainError(ValueError):
    """A kernel/weight parameter is outside its admissible domain."""


class AdmissibilityError(ValueError):
    """No admissible (xi, p) pair exists for the requested kernel."""


class TailUndefinedError(ValueError):
    """The kernel (or history) has no usable decaying-tail model."""


# Derivative step for tabulated kernels; closed-form families never use it.
_FD_STEP = 1e-4


def default_check_grid(t_max: float = 1e3, n: int = 512) -> np.ndarray:
    """0 followed by log-spaced points up to ``t_max`` (n points total)."""
    return np.concatenate(([0.0], np.geomspace(1e-3, t_max, n - 1)))


@dataclass(frozen=True)
class PolynomialKernel:
    """g(t) = a (1+t)^(-q); integrable tail requires q > 1."""

    a: float
    q: float
    family: str = "polynomial"

    def g(self, t):
        return self.a * (1.0 + np.asarray(t, dtype=float)) ** (-self.q)

    def dg(self, t):
        return -self.a * self.q * (1.0 + np.asarray(t, dtype=float)) ** (-self.q - 1.0)

    def tail(self, t):
        """G(t) = a (1+t)^(1-q) / (q-1)."""
        return self.a / (self.q - 1.0) * (1.0 + np.asarray(t, dtype=float)) ** (1.0 - self.q)

    @property
    def g0(self) -> float:
        return self.a / (self.q - 1.0)

    def tail_cutoff(self, t: float, eps: float) -> float:
        """Smallest S >= 0 with G(t + S) <= eps."""
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        edge = (self.a / (eps * (self.q - 1.0))) ** (1.0 / (self.q - 1.0))
        return max(0.0, edge - 1.0 - t)


@dataclass(frozen=True)
class ExponentialKernel:
    """g(t) = a exp(-lam t).

    a = 0 is accepted as the degenerate memoryless kernel (g identically
    zero); it fails the mass condition but lets the simulator run the
    conservative reference dynamics.
    """

    a: float
    lam: float
    family: str = "exponential"

    def g(self, t):
        return self.a * np.exp(-self.lam * np.asarray(t, dtype=float))

    def dg(self, t):
        return -self.lam * self.g(t)

    def tail(self, t):
        return (self.a / self.lam) * np.exp(-self.lam * np.asarray(t, dtype=float))

    @property
    def g0(self) -> float:
        return self.a / self.lam

    def tail_cutoff(self, t: float, eps: float) -> float:
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.a == 0.0:
            return 0.0
        edge = math.log(self.a / (self.lam * eps)) / self.lam
        return max(0.0, edge - t)


class TabulatedKernel:
    """Kernel built from samples (s_i, g_i) with s_0 = 0, s strictly increasing.

    Interpolation inside the table is shape-preserving cubic; the derivative
    is estimated by central differences.  Beyond the last sample the kernel
    follows a power-law a_fit (1+t)^(-q_fit) fitted to the last decade of
    samples, which supplies the tail integral a raw table cannot.
    """

    family = "tabulated"

    def __init__(self, s: np.ndarray, values: np.ndarray):
        s = np.asarray(s, dtype=float)
        values = np.asarray(values, dtype=float)
        if s.ndim != 1 or s.shape != values.shape or s.size < 4:
            raise ParameterDomainError("need matching 1-d arrays with at least 4 samples")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0.0):
            raise ParameterDomainError("sample grid must start at 0 and be strictly increasing")
        if np.any(values <= 0.0):
            raise ParameterDomainError("kernel samples must be positive")
        if np.any(np.diff(values) > 0.0):
            raise ParameterDomainError("kernel samples must be nonincreasing")
        self.s = s
        self.values = values
        self.s_max = float(s[-1])
        self._interp = PchipInterpolator(s, values, extrapolate=False)
        self._anti = self._interp.antiderivative()
        self._fit_tail()

    def _fit_tail(self):
        mask = self.s >= self.s_max / 10.0
        if mask.sum() < 2:
            mask = self.s >= self.s[-2]
        x = np.log1p(self.s[mask])
        y = np.log(self.values[mask])
        slope, intercept = np.polyfit(x, y, 1)
        self.q_fit = -float(slope)
        self.a_fit = float(math.exp(intercept))
        if self.q_fit <= 1.0:
            raise TailUndefinedError(
                f"fitted tail exponent {self.q_fit:.3g} <= 1: tail integral undefined"
            )

    def _model(self, t):
        return self.a_fit * (1.0 + t) ** (-self.q_fit)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        inside = t <= self.s_max
        out = np.where(inside, self._interp(np.clip(t, 0.0, self.s_max)), self._model(t))
        return out if out.ndim else float(out)

    def dg(self, t):
        t = np.asarray(t, dtype=float)
        lo = np.maximum(t - _FD_STEP, 0.0)
        hi = t + _FD_STEP
        out = (self.g(hi) - self.g(lo)) / (hi - lo)
        return out if np.ndim(out) else float(out)

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        tail_at_smax = self.a_fit / (self.q_fit - 1.0) * (1.0 + self.s_max) ** (1.0 - self.q_fit)
        inner = float(self._anti(self.s_max)) - self._anti(np.clip(t, 0.0, self.s_max))
        model = self.a_fit / (self.q_fit - 1.0) * (1.0 + np.maximum(t, self.s_max)) ** (1.0 - self.q_fit)
        out = np.where(t <= self.s_max, inner + tail_at_smax, model)
        return out if out.ndim else float(out)

    @property
    def g0(self) -> float:
        return float(self.tail(0.0))

    def tail_cutoff(self, t: float, eps: float) -> float:
        edge = (self.a_fit / (eps * (self.q_fit - 1.0))) ** (1.0 / (self.q_fit - 1.0))
        return max(0.0, max(edge - 1.0, self.s_max) - t)


def make_polynomial_kernel(a: float, q: float) -> PolynomialKernel:
    """Kernel a (1+t)^(-q).

    q > 1 keeps the mass finite; the stricter q > 2 needed for an admissible
    closed-form weight is enforced later by ``admissible_xi_p``.
    """
    if a <= 0.0:
        raise ParameterDomainError(f"amplitude a must be positive, got {a}")
    if q <= 1.0:
        raise ParameterDomainError(f"exponent q must exceed 1, got {q}")
    return PolynomialKernel(a=float(a), q=float(q))


def make_exponential_kernel(a: float, lam: float) -> ExponentialKernel:
    if a < 0.0:
        raise ParameterDomainError(f"amplitude a must be nonnegative, got {a}")
    if lam <= 0.0:
        raise ParameterDomainError(f"rate lam must be positive, got {lam}")
    return ExponentialKernel(a=float(a), lam=float(lam))


def make_tabulated_kernel(s, values) -> TabulatedKernel:
    return TabulatedKernel(s, values)


def load_kernel_table(path) -> TabulatedKernel:
    """Read a two-column CSV with header row ``s,g`` into a tabulated kernel."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["s", "g"]:
        raise ParameterDomainError(f"{path}: expected header row 's,g'")
    data = np.array([[float(r[0]), float(r[1])] for r in rows[1:]], dtype=float)
    return TabulatedKernel(data[:, 0], data[:, 1])


@dataclass(frozen=True)
class XiWeight:
    """Positive nonincreasing weight xi(t) with exponent 1 <= p < 3/2."""

    p: float
    family: str = "constant"
    value: float = 1.0
    s: np.ndarray | None = None
    values: np.ndarray | None = None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "constant":
            out = np.full_like(t, self.value, dtype=float)
        else:
            out = np.interp(t, self.s, self.values)
        return out if out.ndim else float(out)


def _check_p(p: float):
    if not (1.0 <= p < 1.5):
        raise ParameterDomainError(f"exponent p must lie in [1, 3/2), got {p}")


def constant_xi(value: float, p: float) -> XiWeight:
    if value <= 0.0:
        raise ParameterDomainError(f"xi must be positive, got {value}")
    _check_p(p)
    return XiWeight(p=float(p), family="constant", value=float(value))


def tabulated_xi(s, values, p: float) -> XiWeight:
    """Piecewise-linear xi from samples; constant extension past the table."""
    _check_p(p)
    s = np.asarray(s, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0.0) or np.any(np.diff(values) > 0.0):
        raise ParameterDomainError("xi samples must be positive and nonincreasing")
    if np.any(np.diff(s) <= 0.0):
        raise ParameterDomainError("xi sample grid must be strictly increasing")
    return XiWeight(p=float(p), family="tabulated", s=s, values=values)


def admissible_xi_p(kernel: PolynomialKernel) -> tuple[XiWeight, float]:
    """Closed-form constant weight for a polynomial kernel.

    For g = a (1+t)^(-q) the derivative satisfies
    g' = -q a^(-1/q) g^((q+1)/q) identically, so xi = q a^(-1/q) and
    p = (q+1)/q make the differential condition an equality for all t.
    Requires q > 2 so that p < 3/2.
    """
    if getattr(kernel, "family", None) != "polynomial":
        raise AdmissibilityError("closed-form admissible weight exists only for polynomial kernels")
    if kernel.q <= 2.0:
        raise AdmissibilityError(
            f"q = {kernel.q} <= 2 puts p = (q+1)/q at or above 3/2; no admissible pair"
        )
    p = (kernel.q + 1.0) / kernel.q
    b = kernel.q * kernel.a ** (-1.0 / kernel.q)
    return constant_xi(b, p), p


@dataclass(frozen=True)
class HypothesisReport:
    """Grid evaluation of the mass and differential conditions.

    ``mass_margin`` is 1/a0 - g0 (positive means room to spare);
    ``decay_margin`` is the grid minimum of -g'(t) - xi(t) g(t)^p, which is
    zero to roundoff when the pair achieves equality.
    """

    mass_ok: bool
    decay_ok: bool
    mass_margin: float
    decay_margin: float
    xi_nonincreasing: bool
    n_violations: int
    first_violation_t: float
    tol: float
    grid: np.ndarray

    @property
    def all_ok(self) -> bool:
        return self.mass_ok and self.decay_ok


def check_hypotheses(kernel, xi: XiWeight, p: float, a0: float,
                     grid: np.ndarray | None = None) -> HypothesisReport:
    """Evaluate both admissibility conditions pointwise on ``grid``.

    Failures are report content, never exceptions.  The pointwise tolerance
    is 1e-9 * max(1, g(0)) so that pairs satisfying the differential
    condition with equality pass under roundoff.
    """
    if grid is None:
        grid = default_check_grid()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0.0):
        raise ValueError("check grid must be nonempty and increasing")

    g0 = kernel.g0
    mass_margin = 1.0 / a0 - g0
    mass_ok = (g0 > 0.0) and (mass_margin > 0.0)

    tol = 1e-9 * max(1.0, float(kernel.g(0.0)))
    gvals = np.asarray(kernel.g(grid), dtype=float)
    residual = -np.asarray(kernel.dg(grid), dtype=float) - np.asarray(xi(grid), dtype=float) * gvals**p
    decay_margin = float(np.min(residual))
    violations = residual < -tol
    n_violations = int(np.count_nonzero(violations))
    first_violation_t = float(grid[violations][0]) if n_violations else math.nan

    xiv = np.asarray(xi(grid), dtype=float)
    xi_nonincreasing = bool(np.all(np.diff(xiv) <= 1e-12 * max(1.0, float(xiv[0]))))

    decay_ok = (n_violations == 0) and xi_nonincreasing
    return HypothesisReport(
        mass_ok=mass_ok,
        decay_ok=decay_ok,
        mass_margin=float(mass_margin),
        decay_margin=decay_margin,
        xi_nonincreasing=xi_nonincreasing,
        n_violations=n_violations,
        first_violation_t=first_violation_t,
        tol=tol,
        grid=grid,
    )


def tail_weight(kernel, xi: XiWeight, t):
    """h(t) = xi(t) G(t), the surviving-mass weight driving the envelopes."""
    t = np.asarray(t, dtype=float)
    out = np.asarray(xi(t), dtype=float) * np.asarray(kernel.tail(t), dtype=float)
    return out if out.ndim else float(out)


def _quad_panels(f: Callable[[float], float], lo: float, hi: float) -> float:
    """Adaptive quadrature over [lo, hi] split into geometric panels."""
    if hi <= lo:
        return 0.0
    edges = [lo]
    width = 1.0
    while edges[-1] + width < hi:
        edges.append(edges[-1] + width)
        width *= 4.0
    edges.append(hi)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(f, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
        total += val
    return total


def weighted_kernel_integral(kernel, xi: XiWeight, p: float, sigma: float,
                             horizon: float) -> tuple[float, bool]:
    """Numeric int_0^horizon xi(t) g(t)^(1-sigma) dt with a doubling flag.

    The flag reports practical convergence: the increments contributed by the
    last three horizon doublings must shrink geometrically (successive ratio
    < 0.9).  For sigma below 2 - p and catalog kernels the integral is
    finite; exponents very close to that threshold may still be flagged
    divergent by the conservative ratio test.
    """
    if not (0.0 < sigma < 1.0):
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")

    def f(t):
        return float(xi(t)) * float(kernel.g(t)) ** (1.0 - sigma)

    h8 = horizon / 8.0
    base = _quad_panels(f, 0.0, h8)
    d1 = _quad_panels(f, h8, 2.0 * h8)
    d2 = _quad_panels(f, 2.0 * h8, 4.0 * h8)
    d3 = _quad_panels(f, 4.0 * h8, horizon)
    value = base + d1 + d2 + d3
    if d1 <= 0.0:
        converged = True
    else:
        converged = (d2 < 0.9 * d1) and (d3 < 0.9 * d2)
    return value, converged
