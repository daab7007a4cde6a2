"""Time integration of the modal equations with fading memory.

Each mode obeys the scalar integro-differential equation

    u_k'' + a_k u_k - b_k int_0^inf g(s) u_k(t - s) ds = 0,

with u_k prescribed by the analytic history for negative times.  The memory
integral splits at s = t into a stored-trajectory part, evaluated by the
composite trapezoid rule on the time grid itself (s_j = j dt, so past
samples are reused without interpolation), and the analytic history tail
from :mod:`memwave.history`.

The scheme is the explicit central difference

    u^(n+1) = 2 u^n - u^(n-1) + dt^2 (-a u^n + b w^n),

second order, with the first step bootstrapped by a Taylor expansion and
velocities recovered by centered differences (one-sided second order at the
final step).  Stability requires dt sqrt(max a_k) below the configured CFL
limit, 1.9 by default.  Cost is O(N^2) per mode from the growing
convolution window.

For exponential kernels g = a exp(-lam s) the memory term satisfies the
closed companion ODE w' = a u - lam w, so the whole system reduces to three
coupled ODEs per mode; ``exponential_oracle`` integrates that reduction with
classic fourth-order Runge-Kutta at a tenth of the step and serves as an
independent reference solution.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .history import HistoryData, history_tail_integral, tail_moment_arrays


class InstabilityError(RuntimeError):
    """Non-finite state detected during time stepping."""

    def __init__(self, step: int, time: float):
        super().__init__(f"non-finite state first detected at step {step} (t = {time:g})")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    kernel: object
    pair: object
    history: HistoryData
    xi: object = None
    quad_rule: str = "trapezoid"
    scheme: str = "central"
    cfl_limit: float = 1.9

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def validate(self):
        if self.dt <= 0.0 or self.horizon <= 0.0:
            raise ValueError("dt and horizon must be positive")
        n = self.horizon / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(f"horizon/dt = {n} is not an integer number of steps")
        if round(n) < 2:
            raise ValueError("need at least two steps")
        if self.quad_rule != "trapezoid":
            raise ValueError(f"unsupported quadrature rule {self.quad_rule!r}")
        if self.scheme != "central":
            raise ValueError(f"unsupported scheme {self.scheme!r}")
        omega_max = math.sqrt(float(np.max(self.pair.a_eigs)))
        if self.dt * omega_max > self.cfl_limit:
            raise ValueError(
                f"CFL violated: dt*sqrt(max a) = {self.dt * omega_max:.4g} "
                f"> {self.cfl_limit}"
            )
        if self.history.n_modes != self.pair.n_modes:
            raise ValueError("history and operator pair disagree on mode count")


@dataclass(frozen=True)
class ModalTrajectory:
    """Sampled displacements/velocities, rows = time steps, cols = modes."""

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    dt: float
    history: HistoryData

    @property
    def n_modes(self) -> int:
        return int(self.u.shape[1])

    def eval_mode(self, k: int, time: float) -> float:
        """u_k at a grid time, delegating to the analytic history for t < 0."""
        if time < 0.0:
            return float(self.history.eval_mode(k, -time))
        idx = int(round(time / self.dt))
        if not (0 <= idx < self.t.size) or abs(self.t[idx] - time) > 1e-9 * max(1.0, abs(time)):
            raise ValueError(f"time {time} is not on the trajectory grid")
        return float(self.u[idx, k])


def memory_convolution(traj: ModalTrajectory, kernel, history: HistoryData,
                       mode: int, n: int) -> float:
    """int_0^inf g(s) u_k(t_n - s) ds at step n (stored part + analytic tail)."""
    if not (0 <= n < traj.t.size):
        raise ValueError(f"step {n} outside trajectory")
    dt = traj.dt
    tail = history_tail_integral(history, kernel, float(traj.t[n]), mode)
    if n == 0:
        return tail
    g = np.asarray(kernel.g(np.arange(n + 1) * dt), dtype=float)
    ucol = traj.u[: n + 1, mode]
    stored = dt * (g[::-1] @ ucol) - 0.5 * dt * (g[0] * ucol[n] + g[n] * ucol[0])
    return float(stored + tail)


def step(u_prev: np.ndarray, u_curr: np.ndarray, conv: np.ndarray,
         a_eigs: np.ndarray, b_eigs: np.ndarray, dt: float) -> np.ndarray:
    """One central-difference update given the memory term at the current step."""
    return 2.0 * u_curr - u_prev + dt * dt * (-a_eigs * u_curr + b_eigs * conv)


def _velocities(u: np.ndarray, u1: np.ndarray, dt: float) -> np.ndarray:
    v = np.empty_like(u)
    v[0] = u1
    v[1:-1] = (u[2:] - u[:-2]) / (2.0 * dt)
    v[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dt)
    return v


def _simulate_block(kernel, history: HistoryData, a_eigs: np.ndarray,
                    b_eigs: np.ndarray, dt: float, n_steps: int) -> np.ndarray:
    t = np.arange(n_steps + 1) * dt
    u = np.empty((n_steps + 1, a_eigs.size))
    u[0] = history.initial_displacement()

    with_memory = kernel.g0 > 0.0
    if with_memory:
        g = np.asarray(kernel.g(t), dtype=float)
        tail0 = tail_moment_arrays(kernel, history, t)[0]
        conv = tail0[0]
    else:
        conv = np.zeros_like(u[0])

    accel = -a_eigs * u[0] + b_eigs * conv
    u[1] = u[0] + dt * history.u1 + 0.5 * dt * dt * accel

    dt2 = dt * dt
    for n in range(1, n_steps):
        if with_memory:
            stored = dt * (g[n::-1] @ u[: n + 1])
            stored -= 0.5 * dt * (g[0] * u[n] + g[n] * u[0])
            conv = stored + tail0[n]
        u[n + 1] = 2.0 * u[n] - u[n - 1] + dt2 * (-a_eigs * u[n] + b_eigs * conv)
        if not np.all(np.isfinite(u[n + 1])):
            raise InstabilityError(step=n + 1, time=(n + 1) * dt)
    return u


def simulate(config: SimConfig, modes_parallel: int = 1) -> ModalTrajectory:
    """Run the full trajectory over [0, horizon].

    Modes are fully decoupled, so they may be split across ``modes_parallel``
    worker threads; each worker owns its block and results are joined at the
    end.  The output is deterministic for a fixed configuration.
    """
    config.validate()
    n_steps = config.n_steps
    dt = config.dt
    a = config.pair.a_eigs
    b = config.pair.b_eigs
    n_modes = a.size

    if modes_parallel <= 1 or n_modes == 1:
        u = _simulate_block(config.kernel, config.history, a, b, dt, n_steps)
    else:
        chunks = np.array_split(np.arange(n_modes), min(modes_parallel, n_modes))
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            futures = [
                pool.submit(_simulate_block, config.kernel,
                            config.history.subset(idx), a[idx], b[idx], dt, n_steps)
                for idx in chunks
            ]
            u = np.hstack([f.result() for f in futures])

    t = np.arange(n_steps + 1) * dt
    v = _velocities(u, config.history.u1, dt)
    return ModalTrajectory(t=t, u=u, v=v, dt=dt, history=config.history)


def exponential_oracle(config: SimConfig, refine: int = 10) -> ModalTrajectory:
    """Reference trajectory from the companion-ODE reduction.

    Only valid for single-mode configurations with an exponential kernel;
    other kernels have no exact finite-dimensional reduction here.  The
    (u, v, w) system is integrated by classic RK4 at dt/refine and sampled
    back onto the trajectory grid, giving errors O((dt/refine)^4).
    """
    if getattr(config.kernel, "family", None) != "exponential":
        raise ValueError("oracle supports exponential kernels only")
    if config.pair.n_modes != 1:
        raise ValueError("oracle supports single-mode configurations only")
    config.validate()

    a1 = float(config.pair.a_eigs[0])
    b1 = float(config.pair.b_eigs[0])
    ka = config.kernel.a
    lam = config.kernel.lam
    n_steps = config.n_steps
    h = config.dt / refine

    u = float(config.history.initial_displacement()[0])
    v = float(config.history.u1[0])
    w = history_tail_integral(config.history, config.kernel, 0.0, 0)

    us = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    us[0], vs[0] = u, v

    def rhs(u, v, w):
        return v, -a1 * u + b1 * w, ka * u - lam * w

    for n in range(n_steps):
        for _ in range(refine):
            k1u, k1v, k1w = rhs(u, v, w)
            k2u, k2v, k2w = rhs(u + 0.5 * h * k1u, v + 0.5 * h * k1v, w + 0.5 * h * k1w)
            k3u, k3v, k3w = rhs(u + 0.5 * h * k2u, v + 0.5 * h * k2v, w + 0.5 * h * k2w)
            k4u, k4v, k4w = rhs(u + h * k3u, v + h * k3v, w + h * k3w)
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        us[n + 1], vs[n + 1] = u, v

    t = np.arange(n_steps + 1) * config.dt
    return ModalTrajectory(t=t, u=us[:, None], v=vs[:, None], dt=config.dt,
                           history=config.history)


def write_trajectory_csv(traj: ModalTrajectory, path):
    """CSV export with header ``t,mode,u,v``, one row per (time, mode)."""
    with open(path, "w", newline="") as fh:
        fh.write("t,mode,u,v\n")
        for n in range(traj.t.size):
            tn = traj.t[n]
            for k in range(traj.n_modes):
                fh.write(f"{tn:.17g},{k + 1},{traj.u[n, k]:.17g},{traj.v[n, k]:.17g}\n")
