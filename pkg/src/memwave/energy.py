"""Energy functionals along a simulated trajectory.

With eta(t, s) = u(t) - u(t - s), the first-order energy is

    E(t) = 1/2 ( ||A^(1/2)u||^2 - g0 ||B^(1/2)u||^2 + ||u'||^2
                 + int_0^inf g(s) ||B^(1/2) eta(t,s)||^2 ds ),

its dissipation identity reads E'(t) = 1/2 int g'(s) ||B^(1/2) eta||^2 ds,
and the second energy E2 applies the same shape with weights a^2, a b, a.
All integrals over s reuse the trajectory grid for s <= t (trapezoid, same
split as the memory convolution in the simulator) and the analytic history
moments beyond, so no extrapolation of simulated data ever occurs.

The perturbed functionals I1 = <u', u>, I2 = -<u', int g eta ds> and
I3 = (M + alpha0) E + I1 + (g0/2) I2 are diagnostics: M and alpha0 default
to 10 and 1 and affect neither the dynamics nor the decay envelopes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .history import HistoryData, tail_moment_arrays
from .simulator import ModalTrajectory

DEFAULT_M = 10.0
DEFAULT_ALPHA0 = 1.0


def _trap_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def _eta_moments_at(traj: ModalTrajectory, kernel, history: HistoryData, n: int):
    """Per-mode (Q, Qd, D) at step n.

    Q  = int_0^inf g(s)  eta_k(t_n, s)^2 ds
    Qd = int_0^inf g'(s) eta_k(t_n, s)^2 ds
    D  = int_0^inf g(s)  eta_k(t_n, s)   ds
    """
    dt = traj.dt
    tn = float(traj.t[n])
    un = traj.u[n]

    if n > 0:
        s = np.arange(n + 1) * dt
        g = np.asarray(kernel.g(s), dtype=float)
        dg = np.asarray(kernel.dg(s), dtype=float)
        w = _trap_weights(n, dt)
        diff = un[None, :] - traj.u[n::-1]          # row j holds u(t_n) - u(t_n - s_j)
        q_stored = (w * g) @ diff**2
        qd_stored = (w * dg) @ diff**2
        d_stored = (w * g) @ diff
    else:
        q_stored = qd_stored = d_stored = np.zeros_like(un)

    tarr = np.array([tn])
    m0, m0sq = tail_moment_arrays(kernel, history, tarr)
    d0, d0sq = tail_moment_arrays(kernel, history, tarr, derivative=True)
    big_g = float(kernel.tail(tn))
    g_at = float(kernel.g(tn))
    q_tail = un**2 * big_g - 2.0 * un * m0[0] + m0sq[0]
    qd_tail = -(un**2) * g_at - 2.0 * un * d0[0] + d0sq[0]
    d_tail = un * big_g - m0[0]
    return q_stored + q_tail, qd_stored + qd_tail, d_stored + d_tail


def energy(traj: ModalTrajectory, pair, kernel, history: HistoryData, n: int) -> float:
    q, _, _ = _eta_moments_at(traj, kernel, history, n)
    a, b, g0 = pair.a_eigs, pair.b_eigs, kernel.g0
    un, vn = traj.u[n], traj.v[n]
    return float(0.5 * np.sum((a - g0 * b) * un**2 + vn**2 + b * q))


def energy_rate_identity(traj: ModalTrajectory, pair, kernel,
                         history: HistoryData, n: int) -> float:
    """E'(t_n) from the dissipation identity; nonpositive up to quadrature slack."""
    _, qd, _ = _eta_moments_at(traj, kernel, history, n)
    return float(0.5 * np.sum(pair.b_eigs * qd))


def energy2(traj: ModalTrajectory, pair, kernel, history: HistoryData, n: int) -> float:
    q, _, _ = _eta_moments_at(traj, kernel, history, n)
    a, b, g0 = pair.a_eigs, pair.b_eigs, kernel.g0
    un, vn = traj.u[n], traj.v[n]
    return float(0.5 * np.sum((a**2 - g0 * a * b) * un**2 + a * vn**2 + a * b * q))


def coercivity_floor(traj: ModalTrajectory, pair, kernel,
                     history: HistoryData, n: int) -> float:
    """(1 - a0 g0)/2 times the plain quadratic form; E never drops below it."""
    q, _, _ = _eta_moments_at(traj, kernel, history, n)
    a, b = pair.a_eigs, pair.b_eigs
    un, vn = traj.u[n], traj.v[n]
    factor = 0.5 * (1.0 - pair.a0 * kernel.g0)
    return float(factor * np.sum(a * un**2 + vn**2 + b * q))


def lyapunov_functionals(traj: ModalTrajectory, pair, kernel, history: HistoryData,
                         n: int, m_const: float = DEFAULT_M,
                         alpha0: float = DEFAULT_ALPHA0) -> tuple[float, float, float]:
    """(I1, I2, I3) at step n with caller-supplied equivalence constants."""
    if m_const <= 0.0 or alpha0 < 0.0:
        raise ValueError("need m_const > 0 and alpha0 >= 0")
    _, _, d = _eta_moments_at(traj, kernel, history, n)
    un, vn = traj.u[n], traj.v[n]
    i1 = float(np.sum(vn * un))
    i2 = float(-np.sum(vn * d))
    e = energy(traj, pair, kernel, history, n)
    i3 = (m_const + alpha0) * e + i1 + 0.5 * kernel.g0 * i2
    return i1, i2, i3


@dataclass(frozen=True)
class EnergyTrace:
    t: np.ndarray
    E: np.ndarray
    E2: np.ndarray
    Eprime: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray
    floor: np.ndarray
    m_const: float
    alpha0: float
    dt: float


def compute_energy_trace(traj: ModalTrajectory, pair, kernel, history: HistoryData,
                         m_const: float = DEFAULT_M,
                         alpha0: float = DEFAULT_ALPHA0) -> EnergyTrace:
    """All functionals at every step in one incremental O(N^2 K) pass.

    The stored trapezoid sums are expanded as u^2 S_g - 2 u conv(g, u)
    + conv(g, u^2), algebraically identical to the direct per-step
    evaluation, so this agrees with the pointwise functions to roundoff.
    """
    if m_const <= 0.0 or alpha0 < 0.0:
        raise ValueError("need m_const > 0 and alpha0 >= 0")
    t = traj.t
    dt = traj.dt
    n_samples = t.size
    u = traj.u
    v = traj.v
    a, b, g0 = pair.a_eigs, pair.b_eigs, kernel.g0
    a0 = pair.a0

    u2 = u**2
    v2 = v**2

    g = np.asarray(kernel.g(t), dtype=float)
    dg = np.asarray(kernel.dg(t), dtype=float)
    big_g = np.asarray(kernel.tail(t), dtype=float)

    with_memory = g0 > 0.0
    if with_memory:
        # trapezoid prefix masses of g and g' on the step grid
        s_g = np.concatenate(([0.0], np.cumsum(0.5 * dt * (g[1:] + g[:-1]))))
        s_dg = np.concatenate(([0.0], np.cumsum(0.5 * dt * (dg[1:] + dg[:-1]))))
        m0, m0sq = tail_moment_arrays(kernel, history, t)
        d0, d0sq = tail_moment_arrays(kernel, history, t, derivative=True)

    q = np.zeros_like(u)
    qd = np.zeros_like(u)
    d_lin = np.zeros_like(u)
    if with_memory:
        weights = np.empty((2, n_samples))
        for n in range(n_samples):
            if n == 0:
                conv_u = conv_u2 = dconv_u = dconv_u2 = np.zeros_like(u[0])
            else:
                wview = weights[:, : n + 1]
                wview[0] = g[n::-1]
                wview[1] = dg[n::-1]
                cu = dt * (wview @ u[: n + 1])
                cu2 = dt * (wview @ u2[: n + 1])
                # trapezoid end corrections (half weight at s = 0 and s = t_n)
                cu[0] -= 0.5 * dt * (g[0] * u[n] + g[n] * u[0])
                cu[1] -= 0.5 * dt * (dg[0] * u[n] + dg[n] * u[0])
                cu2[0] -= 0.5 * dt * (g[0] * u2[n] + g[n] * u2[0])
                cu2[1] -= 0.5 * dt * (dg[0] * u2[n] + dg[n] * u2[0])
                conv_u, dconv_u = cu
                conv_u2, dconv_u2 = cu2
            q[n] = u2[n] * s_g[n] - 2.0 * u[n] * conv_u + conv_u2 \
                + u2[n] * big_g[n] - 2.0 * u[n] * m0[n] + m0sq[n]
            qd[n] = u2[n] * s_dg[n] - 2.0 * u[n] * dconv_u + dconv_u2 \
                - u2[n] * g[n] - 2.0 * u[n] * d0[n] + d0sq[n]
            d_lin[n] = u[n] * (s_g[n] + big_g[n]) - (conv_u + m0[n])

    e = 0.5 * np.sum((a - g0 * b) * u2 + v2 + b * q, axis=1)
    e2 = 0.5 * np.sum((a**2 - g0 * a * b) * u2 + a * v2 + a * b * q, axis=1)
    eprime = 0.5 * np.sum(b * qd, axis=1)
    i1 = np.sum(v * u, axis=1)
    i2 = -np.sum(v * d_lin, axis=1)
    i3 = (m_const + alpha0) * e + i1 + 0.5 * g0 * i2
    floor = 0.5 * (1.0 - a0 * g0) * np.sum(a * u2 + v2 + b * q, axis=1)

    return EnergyTrace(t=t, E=e, E2=e2, Eprime=eprime, I1=i1, I2=i2, I3=i3,
                       floor=floor, m_const=m_const, alpha0=alpha0, dt=dt)


def write_energy_csv(trace: EnergyTrace, path):
    """CSV export with header ``t,E,E2,Eprime,I1,I2,I3``."""
    with open(path, "w", newline="") as fh:
        fh.write("t,E,E2,Eprime,I1,I2,I3\n")
        for n in range(trace.t.size):
            fh.write(
                f"{trace.t[n]:.17g},{trace.E[n]:.17g},{trace.E2[n]:.17g},"
                f"{trace.Eprime[n]:.17g},{trace.I1[n]:.17g},"
                f"{trace.I2[n]:.17g},{trace.I3[n]:.17g}\n"
            )
