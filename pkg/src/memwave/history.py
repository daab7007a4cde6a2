"""Prescribed infinite history and its kernel-weighted tail integrals.

The displacement is given analytically for all negative times: mode k of the
history is u0_k(s) for s >= 0, with u(-s) = u0_k(s).  Catalog families
(amplitude c_k per mode, one shared shape parameter):

* constant      u0_k(s) = c_k
* exponential   u0_k(s) = c_k exp(-mu s),          mu > 0
* bump          u0_k(s) = c_k max(0, 1 - s/tau),   tau > 0

All families attain sup_s |u0_k(s)| = |c_k| at s = 0, so the boundedness
constants the decay theory needs are available in closed form.

The tail integrals int_t^inf g(s) u0_k(s-t) ds (and the squared and
derivative-kernel variants used by the energy functionals) are evaluated in
closed form where the (kernel, history) combination allows and otherwise by
adaptive quadrature over [t, t+S], with S chosen so the neglected remainder
is below eps_tail = 1e-10 (1 + sup|u0_k|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .kernels import TailUndefinedError


@dataclass(frozen=True)
class HistoryData:
    family: str
    coeffs: np.ndarray
    u1: np.ndarray
    mu: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        v = np.atleast_1d(np.asarray(self.u1, dtype=float))
        if v.size == 1 and c.size > 1:
            v = np.full_like(c, v[0])
        if c.shape != v.shape:
            raise ValueError("coefficients and initial velocities must have equal length")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "u1", v)

    @property
    def n_modes(self) -> int:
        return int(self.coeffs.size)

    def eval_mode(self, k: int, s):
        """u0_k(s) for s >= 0 (vectorized in s)."""
        s = np.asarray(s, dtype=float)
        c = self.coeffs[k]
        if self.family == "constant":
            out = np.full_like(s, c, dtype=float)
        elif self.family == "exponential":
            out = c * np.exp(-self.mu * s)
        elif self.family == "bump":
            out = c * np.maximum(0.0, 1.0 - s / self.tau)
        else:
            raise ValueError(f"unknown history family {self.family!r}")
        return out if out.ndim else float(out)

    def initial_displacement(self) -> np.ndarray:
        """u(0) = u0(0), which is the coefficient vector for all families."""
        return self.coeffs.copy()

    def sup_per_mode(self) -> np.ndarray:
        return np.abs(self.coeffs)

    def subset(self, idx) -> "HistoryData":
        return HistoryData(family=self.family, coeffs=self.coeffs[idx],
                           u1=self.u1[idx], mu=self.mu, tau=self.tau)


def constant_history(coeffs, u1=0.0) -> HistoryData:
    return HistoryData(family="constant", coeffs=coeffs, u1=u1)


def exponential_history(coeffs, mu: float, u1=0.0) -> HistoryData:
    if mu <= 0.0:
        raise ValueError(f"decay rate mu must be positive, got {mu}")
    return HistoryData(family="exponential", coeffs=coeffs, u1=u1, mu=float(mu))


def bump_history(coeffs, tau: float, u1=0.0) -> HistoryData:
    if tau <= 0.0:
        raise ValueError(f"support tau must be positive, got {tau}")
    return HistoryData(family="bump", coeffs=coeffs, u1=u1, tau=float(tau))


def sup_b_norm(history: HistoryData, pair) -> float:
    """sup_s ||B^(1/2) u0(s)|| = sqrt(sum_k b_k c_k^2) for catalog families."""
    return float(np.sqrt(np.sum(pair.b_eigs * history.coeffs**2)))


def sup_ab_norm(history: HistoryData, pair) -> float:
    """sup_s ||A^(1/2) B^(1/2) u0(s)||, weights a_k b_k."""
    return float(np.sqrt(np.sum(pair.a_eigs * pair.b_eigs * history.coeffs**2)))


def eps_tail_default(history: HistoryData) -> float:
    return 1e-10 * (1.0 + float(np.max(history.sup_per_mode(), initial=0.0)))


def _cutoff(kernel, history: HistoryData, k: int, t: float, eps: float) -> float:
    """Integration cutoff S with |remainder beyond t+S| <= eps."""
    if history.family == "bump":
        return history.tau
    c = abs(float(history.coeffs[k]))
    if c == 0.0:
        return 0.0
    if not hasattr(kernel, "tail_cutoff"):
        raise TailUndefinedError("kernel without decaying tail model")
    s_g = kernel.tail_cutoff(t, eps / c)
    if history.family == "exponential":
        # extra exp(-mu s) decay of the integrand tightens the cutoff
        g_tail = float(kernel.tail(t))
        if g_tail <= 0.0:
            return 0.0
        s_mu = math.log(max(1.0, c * g_tail / eps)) / history.mu
        return min(s_g, s_mu)
    return s_g


def _quad_shifted(f, t: float, cut: float, eps: float) -> float:
    """Quadrature of f over [t, t + cut], split into geometric panels."""
    if cut <= 0.0:
        return 0.0
    edges = [0.0]
    width = 1.0
    while edges[-1] + width < cut:
        edges.append(edges[-1] + width)
        width *= 4.0
    edges.append(cut)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(f, t + a, t + b, epsabs=0.1 * eps, epsrel=1e-12, limit=200)
        total += val
    return total


def _moment_quad(kernel, history, k, t, derivative, squared) -> float:
    eps = eps_tail_default(history)
    cut = _cutoff(kernel, history, k, t, eps)
    weight = kernel.dg if derivative else kernel.g

    def f(s):
        u = history.eval_mode(k, s - t)
        return float(weight(s)) * (u * u if squared else u)

    return _quad_shifted(f, t, cut, eps)


def history_tail_integral(history: HistoryData, kernel, t: float, mode: int) -> float:
    """int_t^inf g(s) u0_k(s - t) ds, the prescribed part of the memory term."""
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    m0, _ = _moments_at(kernel, history, mode, float(t), derivative=False)
    return m0


def _moments_at(kernel, history, k, t, derivative) -> tuple[float, float]:
    """(int w(s) u0_k(s-t) ds, int w(s) u0_k(s-t)^2 ds) with w = g or g'."""
    c = float(history.coeffs[k])
    fam = history.family
    if c == 0.0:
        return 0.0, 0.0
    if fam == "constant":
        # int_t^inf g'(s) ds = -g(t); int_t^inf g(s) ds = G(t)
        val = -float(kernel.g(t)) if derivative else float(kernel.tail(t))
        return c * val, c * c * val
    if fam == "exponential" and getattr(kernel, "family", None) == "exponential":
        a, lam, mu = kernel.a, kernel.lam, history.mu
        m0 = a * c * math.exp(-lam * t) / (lam + mu)
        m0sq = a * c * c * math.exp(-lam * t) / (lam + 2.0 * mu)
        if derivative:
            return -lam * m0, -lam * m0sq
        return m0, m0sq
    m0 = _moment_quad(kernel, history, k, t, derivative, squared=False)
    m0sq = _moment_quad(kernel, history, k, t, derivative, squared=True)
    return m0, m0sq


def tail_moment_arrays(kernel, history: HistoryData, times,
                       derivative: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Tail moments for every (time, mode); shape (len(times), n_modes).

    Returns (M0, M0SQ) with M0[n, k] = int w(s) u0_k(s - t_n) ds and M0SQ the
    squared-history variant, w = g' when ``derivative`` else g.  Closed forms
    cover constant histories (any kernel) and exponential histories under
    exponential kernels; other combinations fall back to per-entry
    quadrature, which is the slow path.
    """
    times = np.asarray(times, dtype=float)
    c = history.coeffs
    fam = history.family
    if fam == "constant":
        base = np.asarray(-kernel.g(times) if derivative else kernel.tail(times), dtype=float)
        return np.outer(base, c), np.outer(base, c**2)
    if fam == "exponential" and getattr(kernel, "family", None) == "exponential":
        a, lam, mu = kernel.a, kernel.lam, history.mu
        decay = a * np.exp(-lam * times)
        sign = -lam if derivative else 1.0
        m0 = sign * np.outer(decay / (lam + mu), c)
        m0sq = sign * np.outer(decay / (lam + 2.0 * mu), c**2)
        return m0, m0sq
    m0 = np.zeros((times.size, history.n_modes))
    m0sq = np.zeros_like(m0)
    for k in range(history.n_modes):
        if c[k] == 0.0:
            continue
        for n, t in enumerate(times):
            m0[n, k], m0sq[n, k] = _moments_at(kernel, history, k, float(t), derivative)
    return m0, m0sq
