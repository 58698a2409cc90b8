"""Fixed-step integrators: method-of-steps RK4 for one discrete delay, and a
plain RK4 core for delay-free systems.

The delay integrator keeps the step commensurate with the delay
(h = tau / steps_per_delay exactly), so the delayed argument of the first and
last Runge-Kutta stages always lands on a stored grid point.  The two middle
stages need x(t + h/2 - tau); that value is interpolated with a cubic Hermite
polynomial from the two straddling grid samples and their stored derivatives,
which keeps the overall order at four.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .model import DelaySystem

__all__ = ["Trajectory", "DelayHistory", "DivergenceError",
           "integrate_delay", "integrate_ode", "history_window"]

_DIVERGENCE_LIMIT = 1e6


class DivergenceError(RuntimeError):
    """Raised when the state norm exceeds any physically meaningful value
    (amplitudes of a normalized quantum state are bounded by one)."""


@dataclass
class Trajectory:
    """Time-stamped states on a uniform grid."""

    times: np.ndarray
    states: np.ndarray

    def populations(self) -> np.ndarray:
        """|amplitude|^2 per basis index (columns follow the state layout)."""
        return np.abs(self.states) ** 2

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def at(self, t: float) -> np.ndarray:
        """State at the grid point closest to t."""
        return self.states[int(np.argmin(np.abs(self.times - t)))]


@dataclass
class DelayHistory:
    """Uniform ring of past samples used for the delayed lookups."""

    step: float
    steps_per_delay: int
    samples: np.ndarray      # states on the grid, oldest first
    derivatives: np.ndarray  # f-values on the same grid

    def __post_init__(self):
        if self.steps_per_delay < 1:
            raise ValueError("steps_per_delay must be positive")
        if len(self.samples) < self.steps_per_delay + 1:
            raise ValueError("history must retain steps_per_delay + 1 samples")

    @property
    def tau(self) -> float:
        return self.step * self.steps_per_delay

    def interpolant(self) -> Callable[[float], np.ndarray]:
        """Piecewise cubic Hermite interpolant on [-tau, 0], suitable as the
        ``history`` argument of integrate_delay (continuation runs)."""
        h, m = self.step, self.steps_per_delay
        samples, derivs = self.samples[-(m + 1):], self.derivatives[-(m + 1):]

        def phi(t: float) -> np.ndarray:
            s = (t + self.tau) / h
            k = min(max(int(np.floor(s)), 0), m - 1)
            u = s - k
            h00 = (1 + 2 * u) * (1 - u) ** 2
            h10 = u * (1 - u) ** 2
            h01 = u * u * (3 - 2 * u)
            h11 = u * u * (u - 1)
            return (h00 * samples[k] + h * h10 * derivs[k]
                    + h01 * samples[k + 1] + h * h11 * derivs[k + 1])

        return phi


def history_window(traj: Trajectory, tau: float) -> DelayHistory:
    """Final delay window of a trajectory, for continuation runs.

    Requires the trajectory step to divide the delay exactly (which
    integrate_delay guarantees)."""
    h = float(traj.times[1] - traj.times[0])
    m = int(round(tau / h))
    if abs(m * h - tau) > 1e-12 * max(1.0, tau):
        raise ValueError("trajectory step does not divide the delay")
    states = traj.states[-(m + 1):]
    derivs = np.gradient(states, h, axis=0)
    return DelayHistory(step=h, steps_per_delay=m, samples=states.copy(),
                        derivatives=derivs)


def _check_divergence(x: np.ndarray):
    if not np.all(np.isfinite(x.view(float))) or np.max(np.abs(x)) > _DIVERGENCE_LIMIT:
        raise DivergenceError("state norm exceeded the divergence guard")


def _hermite_midpoint(x0, f0, x1, f1, h):
    # cubic Hermite value at the midpoint of [t0, t0 + h]
    return 0.5 * (x0 + x1) + 0.125 * h * (f0 - f1)


def integrate_delay(sys: DelaySystem,
                    history: Callable[[float], np.ndarray] | None,
                    t_end: float,
                    steps_per_delay: int) -> Trajectory:
    """Integrate x'(t) = A(t) x(t) + B x(t - tau) over [0, t_end].

    ``history`` overrides the system's initial segment on [-tau, 0];
    pass None to use the canonical one attached at construction.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if steps_per_delay < 16:
        raise ValueError("steps_per_delay must be at least 16")

    phi = history if history is not None else sys.history
    tau = sys.tau
    m = int(steps_per_delay)
    h = tau / m
    n_steps = int(np.ceil(t_end / h - 1e-12))
    b = sys.b

    x0 = np.asarray(phi(0.0))
    dim = x0.shape[0]
    states = np.empty((n_steps + 1, dim), dtype=x0.dtype)
    derivs = np.empty_like(states)
    times = h * np.arange(n_steps + 1)
    states[0] = x0

    def delayed_exact(idx: int, t: float) -> np.ndarray:
        # delayed value at a grid time t = idx*h - tau
        k = idx - m
        return states[k] if k >= 0 else phi(t - tau)

    def delayed_mid(idx: int, t: float) -> np.ndarray:
        # delayed value at t + h/2 - tau, straddled by grid indices k, k+1
        k = idx - m
        td = t + 0.5 * h - tau
        if td <= 0.0:
            return phi(td)
        return _hermite_midpoint(states[k], derivs[k],
                                 states[k + 1], derivs[k + 1], h)

    for n in range(n_steps):
        t = times[n]
        x = states[n]
        a_t = sys.a_of_t(t)
        f1 = a_t @ x + b @ delayed_exact(n, t)
        derivs[n] = f1

        zd_mid = delayed_mid(n, t)
        a_mid = sys.a_of_t(t + 0.5 * h)
        f2 = a_mid @ (x + 0.5 * h * f1) + b @ zd_mid
        f3 = a_mid @ (x + 0.5 * h * f2) + b @ zd_mid

        a_end = sys.a_of_t(t + h)
        zd_end = delayed_exact(n + 1, t + h)
        f4 = a_end @ (x + h * f3) + b @ zd_end

        xn = x + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        _check_divergence(xn)
        states[n + 1] = xn

    derivs[n_steps] = sys.a_of_t(times[-1]) @ states[-1] \
        + b @ delayed_exact(n_steps, times[-1])
    return Trajectory(times=times, states=states)


def integrate_ode(generator: Union[np.ndarray, Callable[[float], np.ndarray]],
                  x0: np.ndarray,
                  t_end: float,
                  h: float) -> Trajectory:
    """Plain RK4 for x'(t) = G(t) x(t); ``generator`` may be a constant
    matrix or a function of time."""
    if h <= 0:
        raise ValueError("h must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")

    if callable(generator):
        g_of_t = generator
    else:
        g_const = np.asarray(generator)
        g_of_t = lambda t: g_const  # noqa: E731

    x0 = np.asarray(x0)
    n_steps = int(np.ceil(t_end / h - 1e-12))
    dtype = np.result_type(x0.dtype, g_of_t(0.0).dtype)
    states = np.empty((n_steps + 1, x0.shape[0]), dtype=dtype)
    times = h * np.arange(n_steps + 1)
    states[0] = x0

    for n in range(n_steps):
        t = times[n]
        x = states[n]
        g1 = g_of_t(t)
        g_mid = g_of_t(t + 0.5 * h)
        g_end = g_of_t(t + h)
        f1 = g1 @ x
        f2 = g_mid @ (x + 0.5 * h * f1)
        f3 = g_mid @ (x + 0.5 * h * f2)
        f4 = g_end @ (x + h * f3)
        xn = x + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        _check_divergence(xn)
        states[n + 1] = xn

    return Trajectory(times=times, states=states)
